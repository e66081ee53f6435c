//! Exp-prediction sets of multi-class losses: point clouds, the ray-escape
//! test of the boundary condition, supporting hyperplanes and the surrogate
//! loss built from them.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{mixability_constant, ProperLossSpec};
use crate::simplex::{barycentric_grid, grid_point, ProbVector};

pub const RAY_TOL: f64 = 1e-3;
pub const GAP_TOL: f64 = 1e-9;
const SEP_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-10;
const MAX_ROUNDS: usize = 400;
const MAX_NEWTON: usize = 100_000;
const BETA_SLACK: f64 = 1e-9;

/// `E_β(ℓ(p))` evaluated on the barycentric grid with coordinates `k/m`.
#[derive(Debug, Clone)]
pub struct ExpPredictionCloud {
    pub loss: ProperLossSpec,
    pub beta: f64,
    pub m: usize,
    pub points: Vec<(ProbVector, Vec<f64>)>,
}

fn exp_point(loss: &ProperLossSpec, beta: f64, p: &[f64]) -> Vec<f64> {
    (0..p.len()).map(|i| (-beta * loss.partial(i, p)).exp()).collect()
}

pub fn build_cloud(loss: &ProperLossSpec, beta: f64, m: usize) -> Result<ExpPredictionCloud> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    if m < 10 {
        return Err(Error::arg(format!("grid resolution must be at least 10, got {m}")));
    }
    let points = barycentric_grid(loss.n(), m)
        .into_iter()
        .map(|c| {
            let p = grid_point(&c, m);
            let z = exp_point(loss, beta, p.as_slice());
            (p, z)
        })
        .collect();
    Ok(ExpPredictionCloud {
        loss: loss.clone(),
        beta,
        m,
        points,
    })
}

impl ExpPredictionCloud {
    pub fn n(&self) -> usize {
        self.loss.n()
    }

    pub fn z(&self, p: &[f64]) -> Vec<f64> {
        exp_point(&self.loss, self.beta, p)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.n();
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<String> = (1..=n)
            .map(|i| format!("p_{i}"))
            .chain((1..=n).map(|i| format!("z_{i}")))
            .collect();
        out.write_record(&header)?;
        for (p, z) in &self.points {
            out.write_record(p.as_slice().iter().chain(z).map(f64::to_string))?;
        }
        out.flush()?;
        Ok(())
    }

    fn argmax_dot(&self, q: &[f64]) -> (Vec<f64>, f64) {
        let (p, v) = self
            .points
            .iter()
            .map(|(p, z)| (p, dot(q, z)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty cloud");
        (p.as_slice().to_vec(), v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compass search over moves `x + s(e_a − e_b)` that keep every coordinate
/// at or above `lower`. Minimizes `f`.
fn pattern_search(
    mut f: impl FnMut(&[f64]) -> f64,
    start: Vec<f64>,
    step0: f64,
    lower: f64,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut x = start;
    let mut fx = f(&x);
    let mut step = step0;
    while step >= MIN_STEP {
        let mut improved = false;
        for a in 0..n {
            for b in 0..n {
                if a == b || x[b] - step < lower {
                    continue;
                }
                let mut y = x.clone();
                y[a] += step;
                y[b] -= step;
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// `−max_z p'z` over the cloud.
pub fn gamma_p(cloud: &ExpPredictionCloud, p: &ProbVector) -> Result<f64> {
    if p.n() != cloud.n() {
        return Err(Error::Dimension {
            expected: cloud.n(),
            got: p.n(),
        });
    }
    Ok(-cloud.argmax_dot(p.as_slice()).1)
}

/// `−max p'E_β(ℓ(r))` over the whole simplex, refined locally from `start`.
/// Returns the value and the maximizing `r`.
fn gamma_refined(cloud: &ExpPredictionCloud, q: &[f64], start: Vec<f64>) -> (f64, Vec<f64>) {
    let step = 1.0 / cloud.m as f64;
    let (r, v) = pattern_search(|r| -dot(q, &cloud.z(r)), start, step, 0.0);
    (v, r)
}

/// `d_i = p_i e^{βℓ_i(p)}`; `p` is in `S_ε` when every normalized `d_i > ε`.
pub fn in_s_epsilon(loss: &ProperLossSpec, beta: f64, epsilon: f64, p: &ProbVector) -> Result<bool> {
    let d = kkt_direction(loss, beta, p)?;
    Ok(d.iter().all(|x| *x > epsilon))
}

fn kkt_direction(loss: &ProperLossSpec, beta: f64, p: &ProbVector) -> Result<Vec<f64>> {
    let l = loss.partial_loss(p)?;
    let d: Vec<f64> = p.as_slice().iter().zip(&l).map(|(pi, li)| pi * (beta * li).exp()).collect();
    let s: f64 = d.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Evaluation {
            at: p[0],
            msg: "degenerate exp-prediction direction".into(),
        });
    }
    Ok(d.into_iter().map(|x| x / s).collect())
}

/// Fraction of interior grid points at resolution `m` outside `S_ε`.
pub fn excluded_fraction(loss: &ProperLossSpec, beta: f64, epsilon: f64, m: usize) -> Result<f64> {
    let mut total = 0usize;
    let mut out = 0usize;
    for c in barycentric_grid(loss.n(), m) {
        if c.contains(&0) {
            continue;
        }
        total += 1;
        if !in_s_epsilon(loss, beta, epsilon, &grid_point(&c, m))? {
            out += 1;
        }
    }
    Ok(out as f64 / total.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayWitness {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub escape: bool,
    /// Largest `r` with `c + r·1` inside the unit cube.
    pub max_travel: f64,
    /// Distance from the ray segment to the exp-prediction surface.
    pub min_distance: f64,
}

impl RayWitness {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.c.len();
        let mut out = csv::Writer::from_writer(w);
        let mut header = Vec::new();
        for name in ["a", "b", "c"] {
            header.extend((1..=n).map(|i| format!("{name}_{i}")));
        }
        header.extend(["escape".into(), "max_travel".into(), "min_distance".into()]);
        out.write_record(&header)?;
        let mut row: Vec<String> = self.a.iter().chain(&self.b).chain(&self.c).map(f64::to_string).collect();
        row.extend([self.escape.to_string(), self.max_travel.to_string(), self.min_distance.to_string()]);
        out.write_record(&row)?;
        out.flush()?;
        Ok(())
    }
}

/// Follows `c + r·1`, `r ∈ [0, max_travel]`, from the midpoint of two cloud
/// points and measures how close it comes to `E_β(ℓ(Δ))`.
pub fn ray_test(cloud: &ExpPredictionCloud, a: &[f64], b: &[f64]) -> RayWitness {
    let c: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    let n = c.len() as f64;
    let r_max = c.iter().map(|x| 1.0 - x).fold(f64::INFINITY, f64::min);
    let dist = |s: &[f64]| -> f64 {
        let t = (s.iter().zip(&c).map(|(x, y)| x - y).sum::<f64>() / n).clamp(0.0, r_max);
        s.iter().zip(&c).map(|(x, y)| (x - y - t).powi(2)).sum::<f64>().sqrt()
    };
    let (start, _) = cloud
        .points
        .iter()
        .map(|(p, z)| (p, dist(z)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty cloud");
    let (_, d) = pattern_search(|r| dist(&cloud.z(r)), start.as_slice().to_vec(), 1.0 / cloud.m as f64, 0.0);
    RayWitness {
        a: a.to_vec(),
        b: b.to_vec(),
        c,
        escape: d > RAY_TOL,
        max_travel: r_max,
        min_distance: d,
    }
}

#[derive(Debug, Clone)]
pub struct Prop1Report {
    pub holds: bool,
    pub pairs_tested: usize,
    pub witness: Option<RayWitness>,
}

/// Seeded random pairs of cloud points; stops at the first escaping ray.
pub fn check_prop1_condition_with(cloud: &ExpPredictionCloud, pairs: usize, seed: u64) -> Prop1Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cloud.points.len();
    for i in 0..pairs {
        let a = &cloud.points[rng.gen_range(0..k)].1;
        let b = &cloud.points[rng.gen_range(0..k)].1;
        let w = ray_test(cloud, a, b);
        if w.escape {
            return Prop1Report {
                holds: false,
                pairs_tested: i + 1,
                witness: Some(w),
            };
        }
    }
    Prop1Report {
        holds: true,
        pairs_tested: pairs,
        witness: None,
    }
}

pub fn check_prop1_condition(cloud: &ExpPredictionCloud) -> Prop1Report {
    check_prop1_condition_with(cloud, 2000, 0)
}

pub fn ray_escape_witness(cloud: &ExpPredictionCloud, seed: u64) -> Option<RayWitness> {
    check_prop1_condition_with(cloud, 5000, seed).witness
}

/// A supporting hyperplane `q'x ≤ −γ_q` of the exp-prediction set.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub q: Vec<f64>,
    pub gamma: f64,
    /// Maximizer of `q'E_β(ℓ(r))`.
    pub support: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub beta: f64,
    pub epsilon: f64,
    pub cloud: ExpPredictionCloud,
    pub hyperplanes: Vec<Hyperplane>,
}

impl SurrogateModel {
    fn plane(&self, q: Vec<f64>, start: Option<Vec<f64>>) -> Hyperplane {
        let start = start.unwrap_or_else(|| self.cloud.argmax_dot(&q).0);
        let (gamma, support) = gamma_refined(&self.cloud, &q, start);
        Hyperplane { q, gamma, support }
    }

    fn clamp(&self, q: &[f64]) -> Vec<f64> {
        clamp_to_eps_simplex(q, self.epsilon * (1.0 + 1e-12))
    }
}

/// Euclidean projection onto `{q : Σq = 1, q_i ≥ lo}`.
fn clamp_to_eps_simplex(q: &[f64], lo: f64) -> Vec<f64> {
    let n = q.len();
    if q.iter().all(|x| *x >= lo) && (q.iter().sum::<f64>() - 1.0).abs() < 1e-15 {
        return q.to_vec();
    }
    let free = 1.0 - lo * n as f64;
    let y: Vec<f64> = q.iter().map(|x| x - lo).collect();
    let mut s = y.clone();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, v) in s.iter().enumerate() {
        cum += v;
        let t = (cum - free) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0) + lo).collect()
}

/// Hyperplanes with normals on the grid of `Δ^n_ε` at resolution `m`.
pub fn build_surrogate(loss: &ProperLossSpec, beta: f64, epsilon: f64, m: usize) -> Result<SurrogateModel> {
    let n = loss.n();
    if !(epsilon > 0.0 && epsilon < 1.0 / n as f64) {
        return Err(Error::arg(format!("epsilon must lie in (0, 1/{n}), got {epsilon}")));
    }
    let limit = mixability_constant(loss)?;
    if beta > limit + BETA_SLACK {
        return Err(Error::arg(format!("beta {beta} exceeds the mixability constant {limit}")));
    }
    let cloud = build_cloud(loss, beta, m)?;
    let mut model = SurrogateModel {
        beta,
        epsilon,
        cloud,
        hyperplanes: Vec::new(),
    };
    let normals: Vec<Vec<f64>> = barycentric_grid(n, m)
        .into_iter()
        .filter(|c| c.iter().all(|&k| k as f64 / m as f64 > epsilon))
        .map(|c| grid_point(&c, m).into_vec())
        .collect();
    if normals.is_empty() {
        return Err(Error::arg(format!("no grid point of resolution {m} has all coordinates above {epsilon}")));
    }
    model.hyperplanes = normals.into_iter().map(|q| model.plane(q, None)).collect();
    Ok(model)
}

/// Log-barrier Newton for `max Σ p_i ln x_i` subject to `q'x ≤ −γ_q` for the
/// given planes and `x ≤ 1`. Stops at duality gap `GAP_TOL`.
fn barrier_solve(p: &[f64], planes: &[&Hyperplane]) -> Result<Vec<f64>> {
    let n = p.len();
    let rows: Vec<(&[f64], f64)> = planes
        .iter()
        .map(|h| (h.q.as_slice(), -h.gamma))
        .collect();
    let k = (rows.len() + n) as f64;
    let slack = |x: &[f64]| -> Option<Vec<f64>> {
        let mut r = Vec::with_capacity(rows.len() + n);
        for (q, b) in &rows {
            r.push(b - dot(q, x));
        }
        r.extend(x.iter().map(|v| 1.0 - v));
        (x.iter().all(|v| *v > 0.0) && r.iter().all(|v| *v > 0.0)).then_some(r)
    };
    let barrier = |x: &[f64], t: f64| -> Option<f64> {
        let r = slack(x)?;
        Some(-t * p.iter().zip(x).map(|(pi, xi)| pi * xi.ln()).sum::<f64>() - r.iter().map(|v| v.ln()).sum::<f64>())
    };

    let s = 0.5 * rows.iter().map(|r| r.1).fold(1.0, f64::min);
    if !(s > 0.0) {
        return Err(Error::Solver("hyperplane set excludes the positive orthant".into()));
    }
    let mut x = vec![s; n];
    let mut t = 1.0;
    let mut iterations = 0;
    loop {
        loop {
            iterations += 1;
            if iterations > MAX_NEWTON {
                return Err(Error::Solver("barrier method did not converge".into()));
            }
            let r = slack(&x).expect("iterate stays strictly feasible");
            let mut g = DVector::from_fn(n, |i, _| -t * p[i] / x[i]);
            let mut h = DMatrix::from_fn(n, n, |i, j| if i == j { t * p[i] / (x[i] * x[i]) } else { 0.0 });
            for (idx, (q, _)) in rows.iter().enumerate() {
                let inv = 1.0 / r[idx];
                for i in 0..n {
                    g[i] += q[i] * inv;
                    for j in 0..n {
                        h[(i, j)] += q[i] * q[j] * inv * inv;
                    }
                }
            }
            for i in 0..n {
                let inv = 1.0 / r[rows.len() + i];
                g[i] += inv;
                h[(i, i)] += inv * inv;
            }
            let dx = h
                .cholesky()
                .ok_or_else(|| Error::Solver("singular barrier Hessian".into()))?
                .solve(&(-&g));
            let decrement = -g.dot(&dx);
            if decrement / 2.0 < 1e-10 {
                break;
            }
            let f0 = barrier(&x, t).expect("feasible");
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-20 {
                let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
                if let Some(fnew) = barrier(&xn, t) {
                    if fnew <= f0 - 0.25 * step * decrement {
                        moved = fnew < f0;
                        x = xn;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                // no representable progress left at this t
                break;
            }
        }
        if k / t <= GAP_TOL {
            return Ok(x);
        }
        t *= 20.0;
    }
}

/// `ℓ̃_ε(p) = E_β^{−1}(x*)` for the maximizer `x*` of `Σ p_i ln x_i` over the
/// hyperplane intersection.
///
/// The stored grid is refined by cutting planes drawn from the whole of
/// `Δ^n_ε`: after each solve the most violated supporting hyperplane is
/// located by local search and added, until none is violated by more than
/// `1e-9`.
pub fn surrogate_loss(model: &SurrogateModel, p: &ProbVector) -> Result<Vec<f64>> {
    let n = model.cloud.n();
    if p.n() != n {
        return Err(Error::Dimension { expected: n, got: p.n() });
    }
    if p.as_slice().iter().any(|x| *x <= 0.0) {
        return Err(Error::InvalidProb("surrogate needs an interior point".into()));
    }
    let pv = p.as_slice();
    // start from the plane that supports the exp-prediction of p itself
    let d = kkt_direction(&model.cloud.loss, model.beta, p)?;
    let mut extra = vec![model.plane(model.clamp(&d), Some(pv.to_vec()))];
    let mut base_active: Vec<usize> = Vec::new();

    for _ in 0..MAX_ROUNDS {
        let planes: Vec<&Hyperplane> = base_active
            .iter()
            .map(|&i| &model.hyperplanes[i])
            .chain(extra.iter())
            .collect();
        let x = barrier_solve(pv, &planes)?;

        // stored grid
        let mut viol: Vec<(usize, f64)> = model
            .hyperplanes
            .iter()
            .enumerate()
            .map(|(i, h)| (i, dot(&h.q, &x) + h.gamma))
            .filter(|(_, v)| *v > SEP_TOL)
            .collect();
        if !viol.is_empty() {
            viol.sort_by(|a, b| b.1.total_cmp(&a.1));
            base_active.extend(viol.iter().take(4).map(|v| v.0));
            continue;
        }

        // continuum of normals around the active set
        let mut starts: Vec<Hyperplane> = planes
            .iter()
            .filter(|h| -h.gamma - dot(&h.q, &x) < 1e-6)
            .map(|h| (*h).clone())
            .collect();
        let u: Vec<f64> = pv.iter().zip(&x).map(|(a, b)| a / b).collect();
        let us: f64 = u.iter().sum();
        let u = model.clamp(&u.iter().map(|v| v / us).collect::<Vec<_>>());
        starts.push(model.plane(u, None));

        let mut best: Option<(f64, Hyperplane)> = None;
        for st in starts {
            let mut support = st.support.clone();
            let lo = model.epsilon * (1.0 + 1e-12);
            let (q, neg) = pattern_search(
                |q| {
                    let (g, r) = gamma_refined(&model.cloud, q, support.clone());
                    support = r;
                    -(dot(q, &x) + g)
                },
                st.q.clone(),
                0.05,
                lo,
            );
            if best.as_ref().is_none_or(|b| -neg > b.0) {
                let h = model.plane(q, None);
                let v = dot(&h.q, &x) + h.gamma;
                best = Some((v, h));
            }
        }
        match best {
            Some((v, h)) if v > SEP_TOL => extra.push(h),
            _ => return Ok(x.iter().map(|xi| -xi.ln() / model.beta).collect()),
        }
    }
    Err(Error::Solver(format!("cutting planes did not settle within {MAX_ROUNDS} rounds")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;
    use approx::assert_abs_diff_eq;

    fn sq3() -> ProperLossSpec {
        ProperLossSpec::new(LossKind::SquareVector, 3).unwrap()
    }

    #[test]
    fn cloud_examples() {
        let log = build_cloud(&ProperLossSpec::binary(LossKind::Log), 1.0, 20).unwrap();
        for (p, z) in &log.points {
            assert_abs_diff_eq!(z[0], p[0], epsilon = 1e-12);
            assert_abs_diff_eq!(z[0] + z[1], 1.0, epsilon = 1e-12);
        }
        let sq = build_cloud(&ProperLossSpec::binary(LossKind::SquareVector), 1.0, 10).unwrap();
        let (_, z) = sq.points.iter().find(|(p, _)| p[0] == 0.5).unwrap();
        assert_abs_diff_eq!(z[0], (-0.5f64).exp(), epsilon = 1e-12);
        let c3 = build_cloud(&sq3(), 1.0, 12).unwrap();
        assert_eq!(c3.points.len(), 91);
        for (p, z) in &c3.points {
            for i in 0..3 {
                if p[i] == 1.0 {
                    assert_eq!(z[i], 1.0);
                }
            }
        }
        assert!(build_cloud(&sq3(), 1.0, 5).is_err());
    }

    #[test]
    fn gamma_examples() {
        let log = build_cloud(&ProperLossSpec::binary(LossKind::Log), 1.0, 100).unwrap();
        assert_abs_diff_eq!(gamma_p(&log, &ProbVector::uniform(2)).unwrap(), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma_p(&log, &ProbVector::vertex(2, 1)).unwrap(), -1.0, epsilon = 1e-12);
        let sq = build_cloud(&ProperLossSpec::binary(LossKind::SquareVector), 1.0, 100).unwrap();
        assert_abs_diff_eq!(gamma_p(&sq, &ProbVector::uniform(2)).unwrap(), -(-0.5f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn s_epsilon_examples() {
        let log = ProperLossSpec::binary(LossKind::Log);
        assert!(in_s_epsilon(&log, 1.0, 0.49, &ProbVector::binary(0.2)).unwrap());
        assert!(in_s_epsilon(&sq3(), 1.0, 0.3, &ProbVector::uniform(3)).unwrap());
        let p = ProbVector::new(vec![0.9, 0.05, 0.05]).unwrap();
        assert!(!in_s_epsilon(&sq3(), 1.0, 0.2, &p).unwrap());
    }

    #[test]
    fn projection_onto_eps_simplex() {
        let q = clamp_to_eps_simplex(&[0.9, 0.08, 0.02], 0.05);
        assert_abs_diff_eq!(q.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(q.iter().all(|v| *v >= 0.05 - 1e-15));
        assert_eq!(clamp_to_eps_simplex(&[0.4, 0.3, 0.3], 0.05), vec![0.4, 0.3, 0.3]);
    }

    #[test]
    fn binary_ray_tests() {
        let log = build_cloud(&ProperLossSpec::binary(LossKind::Log), 1.0, 100).unwrap();
        assert!(check_prop1_condition(&log).holds);
        assert!(ray_escape_witness(&log, 1).is_none());
        let sq = build_cloud(&ProperLossSpec::binary(LossKind::SquareVector), 1.0, 100).unwrap();
        assert!(check_prop1_condition(&sq).holds);
        // beyond the mixability constant the exp-prediction curve bends the other way
        let sq2 = build_cloud(&ProperLossSpec::binary(LossKind::SquareVector), 2.0, 100).unwrap();
        assert!(!check_prop1_condition(&sq2).holds);
    }

    #[test]
    fn square_three_class_escapes() {
        let c = build_cloud(&sq3(), 1.0, 40).unwrap();
        let w = ray_escape_witness(&c, 7).expect("witness");
        assert!(w.escape && w.min_distance > RAY_TOL);
        assert!(w.max_travel >= 0.0);
        let log = build_cloud(&ProperLossSpec::new(LossKind::Log, 3).unwrap(), 1.0, 40).unwrap();
        assert!(ray_escape_witness(&log, 7).is_none());
    }

    #[test]
    fn surrogate_model_shape() {
        let m = build_surrogate(&ProperLossSpec::binary(LossKind::Log), 1.0, 0.4, 100).unwrap();
        assert_eq!(m.hyperplanes.len(), 19);
        let m3 = build_surrogate(&sq3(), 1.0, 0.05, 60).unwrap();
        assert_eq!(m3.hyperplanes.len(), 1225);
        for h in &m3.hyperplanes {
            assert!(h.q.iter().all(|v| *v > 0.05));
            assert!(h.gamma < 0.0);
            for (_, z) in &m3.cloud.points {
                assert!(dot(&h.q, z) <= -h.gamma + 1e-9);
            }
        }
        assert!(build_surrogate(&sq3(), 1.0, 0.4, 60).is_err());
        assert!(build_surrogate(&sq3(), 1.5, 0.05, 60).is_err());
    }

    #[test]
    fn surrogate_examples() {
        let log = build_surrogate(&ProperLossSpec::binary(LossKind::Log), 1.0, 0.05, 100).unwrap();
        let l = surrogate_loss(&log, &ProbVector::uniform(2)).unwrap();
        assert_abs_diff_eq!(l[0], 2f64.ln(), epsilon = 1e-3);
        assert_abs_diff_eq!(l[1], 2f64.ln(), epsilon = 1e-3);

        let sq = build_surrogate(&sq3(), 1.0, 0.05, 60).unwrap();
        let l = surrogate_loss(&sq, &ProbVector::uniform(3)).unwrap();
        for v in l {
            assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-3);
        }

        let wide = build_surrogate(&sq3(), 1.0, 0.3, 60).unwrap();
        let p = ProbVector::new(vec![0.9, 0.05, 0.05]).unwrap();
        assert!(!in_s_epsilon(&sq3(), 1.0, 0.3, &p).unwrap());
        let l = surrogate_loss(&wide, &p).unwrap();
        let exact = sq3().partial_loss(&p).unwrap();
        let gap = l.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-2, "gap {gap}");
    }
}
