//! Probability vectors on the simplex and their reduced coordinates.

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// A point of the n-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidProb(format!(
                "need at least 2 classes, got {}",
                entries.len()
            )));
        }
        if let Some(x) = entries.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidProb(format!("entry {x} outside [0, 1]")));
        }
        let s: f64 = entries.iter().sum();
        if (s - 1.0).abs() > SUM_TOL * entries.len() as f64 {
            return Err(Error::InvalidProb(format!("entries sum to {s}")));
        }
        Ok(ProbVector(entries))
    }

    /// Normalizes non-negative weights onto the simplex.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidProb(format!("cannot normalize {weights:?}")));
        }
        ProbVector::new(weights.iter().map(|w| w / s).collect())
    }

    /// `(p1, 1 - p1)`.
    pub fn binary(p1: f64) -> Self {
        let p1 = p1.clamp(0.0, 1.0);
        ProbVector(vec![p1, 1.0 - p1])
    }

    pub fn uniform(n: usize) -> Self {
        ProbVector(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        ProbVector(v)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(p, x)| if *p == 0.0 { 0.0 } else { p * x })
            .sum()
    }

    pub fn midpoint(&self, other: &ProbVector) -> ProbVector {
        ProbVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The first n-1 coordinates of a simplex point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProb(Vec<f64>);

impl ReducedProb {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidProb("empty reduced vector".into()));
        }
        if let Some(x) = entries.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidProb(format!("entry {x} outside [0, 1]")));
        }
        let s: f64 = entries.iter().sum();
        if s > 1.0 + SUM_TOL {
            return Err(Error::InvalidProb(format!("reduced entries sum to {s}")));
        }
        Ok(ReducedProb(entries))
    }

    pub fn scalar(p: f64) -> Result<Self> {
        ReducedProb::new(vec![p])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn project(p: &ProbVector) -> ReducedProb {
    ReducedProb(p.0[..p.n() - 1].to_vec())
}

pub fn lift(r: &ReducedProb) -> Result<ProbVector> {
    let s: f64 = r.0.iter().sum();
    if s > 1.0 + SUM_TOL {
        return Err(Error::InvalidProb(format!("reduced entries sum to {s}")));
    }
    let mut v = r.0.clone();
    v.push((1.0 - s).clamp(0.0, 1.0));
    Ok(ProbVector(v))
}

/// All compositions of `m` into `n` non-negative parts, i.e. the barycentric
/// grid with coordinates `k / m`.
pub fn barycentric_grid(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(n - 1, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, m, &mut Vec::with_capacity(n), &mut out);
    out
}

pub fn grid_point(counts: &[usize], m: usize) -> ProbVector {
    let mut v: Vec<f64> = counts.iter().map(|k| *k as f64 / m as f64).collect();
    // keep the sum exact
    let head: f64 = v[..v.len() - 1].iter().sum();
    let last = v.len() - 1;
    v[last] = (1.0 - head).max(0.0);
    ProbVector(v)
}

/// Interior grid `lo, lo+step, ..., hi` (inclusive, rounded to the nearest count).
pub fn interval_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step).round() as usize;
    (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_and_lift() {
        let p = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(project(&p).as_slice(), &[0.2, 0.3]);
        let r = ReducedProb::new(vec![0.2, 0.3]).unwrap();
        assert_eq!(lift(&r).unwrap().as_slice(), &[0.2, 0.3, 0.5]);
        let q = ProbVector::new(vec![0.1, 0.9]).unwrap();
        assert_eq!(lift(&project(&q)).unwrap(), q);
    }

    #[test]
    fn lift_rejects_overfull() {
        assert!(ReducedProb::new(vec![0.7, 0.4]).is_err());
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.0]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(barycentric_grid(2, 10).len(), 11);
        assert_eq!(barycentric_grid(3, 14).len(), 120);
        for c in barycentric_grid(3, 7) {
            assert_eq!(c.iter().sum::<usize>(), 7);
        }
    }
}
