//! Bregman divergences, loss functions they generate and the probability-game
//! mixability checks.

use std::fmt;
use std::sync::Arc;

use crate::analysis::{curve_mixability, GridReport, MIDPOINT_TOL};
use crate::error::{Error, Result};
use crate::losses::ProperLossSpec;
use crate::simplex::{interval_grid, lift, ProbVector, ReducedProb};

const GRAD_STEP: f64 = 1e-6;
const GRAD_MARGIN: f64 = 1e-4;
pub const LEMMA14_STEP: f64 = 1e-5;
pub const LEMMA14_TOL: f64 = 1e-6;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type PairFn = Arc<dyn Fn(&ProbVector, &ProbVector) -> Result<f64> + Send + Sync>;

/// A convex function on reduced coordinates together with its gradient.
#[derive(Clone)]
pub struct BregmanGenerator {
    phi: ScalarFn,
    gradient: Option<VectorFn>,
}

impl fmt::Debug for BregmanGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BregmanGenerator")
            .field("closed_form_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl BregmanGenerator {
    /// Gradient by central differences.
    pub fn new(phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        BregmanGenerator {
            phi: Arc::new(phi),
            gradient: None,
        }
    }

    pub fn with_gradient(
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        BregmanGenerator {
            phi: Arc::new(phi),
            gradient: Some(Arc::new(gradient)),
        }
    }

    /// `φ = −L̲_ℓ` with gradient `−(ℓ_i − ℓ_n)`.
    pub fn from_loss(loss: &ProperLossSpec) -> Result<Self> {
        if !loss.is_strictly_proper() {
            return Err(Error::arg(format!("`{}` is not strictly proper", loss.name())));
        }
        let l1 = loss.clone();
        let l2 = loss.clone();
        Ok(BregmanGenerator::with_gradient(
            move |s| {
                let p = lift(&ReducedProb::new(s.to_vec()).expect("reduced point"))
                    .expect("reduced point");
                -l1.bayes_risk(&p).expect("matching dimension")
            },
            move |s| {
                let mut q = s.to_vec();
                q.push(1.0 - s.iter().sum::<f64>());
                let last = l2.partial(q.len() - 1, &q);
                (0..s.len()).map(|i| -(l2.partial(i, &q) - last)).collect()
            },
        ))
    }

    pub fn phi(&self, s: &[f64]) -> f64 {
        (self.phi)(s)
    }

    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.gradient {
            return g(s);
        }
        let total: f64 = s.iter().sum();
        (0..s.len())
            .map(|i| {
                let room = s[i].min(1.0 - total) - GRAD_MARGIN;
                let h = GRAD_STEP.min(room.max(f64::EPSILON));
                let mut a = s.to_vec();
                let mut b = s.to_vec();
                a[i] += h;
                b[i] -= h;
                (self.phi(&a) - self.phi(&b)) / (2.0 * h)
            })
            .collect()
    }
}

fn is_interior(s: &[f64]) -> bool {
    s.iter().all(|x| *x > 0.0) && s.iter().sum::<f64>() < 1.0
}

/// `B_φ(s, s0) = φ(s) − φ(s0) − (s − s0)'Dφ(s0)`. The base point `s0` must be
/// interior; `s` may lie on the boundary when `φ` is finite there.
pub fn bregman_divergence(gen: &BregmanGenerator, s: &ReducedProb, s0: &ReducedProb) -> Result<f64> {
    let (s, s0) = (s.as_slice(), s0.as_slice());
    if s.len() != s0.len() {
        return Err(Error::Dimension {
            expected: s0.len(),
            got: s.len(),
        });
    }
    if !is_interior(s0) {
        return Err(Error::Evaluation {
            at: s0[0],
            msg: format!("base point {s0:?} is not interior"),
        });
    }
    let grad = gen.gradient(s0);
    let lin: f64 = s.iter().zip(s0).zip(&grad).map(|((a, b), g)| (a - b) * g).sum();
    let d = gen.phi(s) - gen.phi(s0) - lin;
    if !d.is_finite() {
        return Err(Error::Evaluation {
            at: s[0],
            msg: format!("divergence is {d}"),
        });
    }
    Ok(d)
}

/// A loss on pairs of distributions.
#[derive(Clone)]
pub struct PairLoss {
    n: usize,
    eval: PairFn,
}

impl fmt::Debug for PairLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairLoss").field("n", &self.n).finish()
    }
}

impl PairLoss {
    pub fn new(
        n: usize,
        eval: impl Fn(&ProbVector, &ProbVector) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        PairLoss {
            n,
            eval: Arc::new(eval),
        }
    }

    pub fn kl(n: usize) -> Self {
        PairLoss::new(n, kl_loss)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, y: &ProbVector, v: &ProbVector) -> Result<f64> {
        for p in [y, v] {
            if p.n() != self.n {
                return Err(Error::Dimension {
                    expected: self.n,
                    got: p.n(),
                });
            }
        }
        (self.eval)(y, v)
    }
}

/// The Bregman loss `ℓ_φ(y, v) = B_φ(ỹ, ṽ)` with `φ = −L̲_ℓ`.
pub fn blf_from_proper_loss(loss: &ProperLossSpec) -> Result<PairLoss> {
    let gen = BregmanGenerator::from_loss(loss)?;
    Ok(PairLoss::new(loss.n(), move |y, v| {
        let reduce = |p: &ProbVector| ReducedProb::new(p.as_slice()[..p.n() - 1].to_vec());
        bregman_divergence(&gen, &reduce(y)?, &reduce(v)?).map(|d| d.max(0.0))
    }))
}

/// `Σ y_i ln(y_i / v_i)` with `0 ln 0 = 0`.
pub fn kl_loss(y: &ProbVector, v: &ProbVector) -> Result<f64> {
    if y.n() != v.n() {
        return Err(Error::Dimension {
            expected: y.n(),
            got: v.n(),
        });
    }
    let mut total = 0.0;
    for i in 0..y.n() {
        if y[i] == 0.0 {
            continue;
        }
        if v[i] == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += y[i] * (y[i] / v[i]).ln();
    }
    Ok(total.max(0.0))
}

/// Default grid of `ỹ`, `ṽ₁`, `ṽ₂` values for the Hessian condition.
pub fn lemma14_grid() -> Vec<f64> {
    interval_grid(0.02, 0.98, 0.02)
}

/// `g'' + (g')² ≥ 0` in `ỹ` for `g = (β/c)ℓ(y,v₁) − βℓ(y,v₂)` on every grid
/// triple. Reports the worst value per `ỹ`.
pub fn check_lemma14_condition(
    pair: &PairLoss,
    beta: f64,
    c_beta: f64,
    grid: &[f64],
) -> Result<GridReport> {
    if pair.n() != 2 {
        return Err(Error::UnsupportedClassCount {
            name: "pair loss",
            n: pair.n(),
        });
    }
    if !(beta > 0.0) || !(c_beta >= 1.0) {
        return Err(Error::arg(format!(
            "need beta > 0 and c_beta >= 1, got {beta} and {c_beta}"
        )));
    }
    let h = LEMMA14_STEP;
    let mut points = Vec::new();
    let mut worst = Vec::new();
    for &y in grid.iter().filter(|y| **y - h > 0.0 && **y + h < 1.0) {
        let mut w = f64::INFINITY;
        for &v1 in grid {
            for &v2 in grid {
                let (p1, p2) = (ProbVector::binary(v1), ProbVector::binary(v2));
                let g = |t: f64| -> Result<f64> {
                    let yy = ProbVector::binary(t);
                    Ok(beta / c_beta * pair.eval(&yy, &p1)? - beta * pair.eval(&yy, &p2)?)
                };
                let (gm, g0, gp) = (g(y - h)?, g(y)?, g(y + h)?);
                let d2 = (gp - 2.0 * g0 + gm) / (h * h);
                let d1 = (gp - gm) / (2.0 * h);
                w = w.min(d2 + d1 * d1);
            }
        }
        points.push(y);
        worst.push(w);
    }
    Ok(GridReport::from_slacks(points, worst.clone(), worst, LEMMA14_TOL))
}

/// Mixability of the binary pair loss restricted to vertex outcomes, i.e. of
/// the curve `ṽ ↦ (ℓ(e_1, v), ℓ(e_2, v))`.
pub fn blf_mixability_report(pair: &PairLoss, beta: f64, grid_step: f64) -> Result<GridReport> {
    if pair.n() != 2 {
        return Err(Error::UnsupportedClassCount {
            name: "pair loss",
            n: pair.n(),
        });
    }
    let k = (1.0 / grid_step).round() as usize;
    let params: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let (e1, e2) = (ProbVector::vertex(2, 0), ProbVector::vertex(2, 1));
    let mut curve = Vec::with_capacity(params.len());
    for &t in &params {
        let v = ProbVector::binary(t);
        // boundary predictions give infinite losses for some pair losses
        let l1 = pair.eval(&e1, &v).unwrap_or(f64::INFINITY);
        let l2 = pair.eval(&e2, &v).unwrap_or(f64::INFINITY);
        curve.push([l1, l2]);
    }
    curve_mixability(&params, &curve, beta)
}

pub fn check_blf_mixability(pair: &PairLoss, beta: f64) -> Result<bool> {
    Ok(blf_mixability_report(pair, beta, 1e-3)?.verdict)
}

/// Midpoint concavity of `ṽ ↦ e^{−αℓ(y, v)}` for each fixed `ỹ` in `y_grid`.
pub fn check_pair_exp_concavity(
    pair: &PairLoss,
    alpha: f64,
    y_grid: &[f64],
    grid_step: f64,
) -> Result<GridReport> {
    let vs = interval_grid(1e-3, 1.0 - 1e-3, grid_step);
    let mut points = Vec::new();
    let mut worst = Vec::new();
    for &y in y_grid {
        let yy = ProbVector::binary(y);
        let f: Vec<f64> = vs
            .iter()
            .map(|&v| pair.eval(&yy, &ProbVector::binary(v)).map(|l| (-alpha * l).exp()))
            .collect::<Result<_>>()?;
        let mut w = f64::INFINITY;
        for m in 1..f.len() - 1 {
            for d in 1..=m.min(f.len() - 1 - m) {
                w = w.min(f[m] - 0.5 * (f[m - d] + f[m + d]));
            }
        }
        points.push(y);
        worst.push(w);
    }
    Ok(GridReport::from_slacks(points, worst.clone(), worst, MIDPOINT_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;
    use approx::assert_abs_diff_eq;

    fn r(x: f64) -> ReducedProb {
        ReducedProb::scalar(x).unwrap()
    }

    #[test]
    fn divergence_examples() {
        let log = BregmanGenerator::from_loss(&ProperLossSpec::binary(LossKind::Log)).unwrap();
        assert_abs_diff_eq!(bregman_divergence(&log, &r(0.3), &r(0.3)).unwrap(), 0.0, epsilon = 1e-15);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(bregman_divergence(&log, &r(0.5), &r(0.25)).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.14384, epsilon = 1e-5);

        let sq = BregmanGenerator::from_loss(&ProperLossSpec::binary(LossKind::SquareVector)).unwrap();
        for (s, s0) in [(0.1, 0.7), (0.5, 0.25), (0.9, 0.2)] {
            let d = bregman_divergence(&sq, &r(s), &r(s0)).unwrap();
            assert_abs_diff_eq!(d, 2.0 * (s - s0) * (s - s0), epsilon = 1e-12);
        }
    }

    #[test]
    fn numeric_gradient_matches_closed_form() {
        let l = ProperLossSpec::binary(LossKind::Log);
        let closed = BregmanGenerator::from_loss(&l).unwrap();
        let numeric = BregmanGenerator::new(move |s| {
            -l.bayes_risk(&ProbVector::binary(s[0])).unwrap()
        });
        for s in [0.1, 0.4, 0.8] {
            assert_abs_diff_eq!(closed.gradient(&[s])[0], numeric.gradient(&[s])[0], epsilon = 1e-7);
        }
    }

    #[test]
    fn boundary_base_point_is_rejected() {
        let g = BregmanGenerator::from_loss(&ProperLossSpec::binary(LossKind::Log)).unwrap();
        assert!(bregman_divergence(&g, &r(0.5), &r(0.0)).is_err());
        assert!(BregmanGenerator::from_loss(&ProperLossSpec::binary(LossKind::ZeroOne)).is_err());
    }

    #[test]
    fn kl_examples() {
        let h = ProbVector::uniform(2);
        assert_eq!(kl_loss(&h, &h).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_loss(&ProbVector::vertex(2, 0), &h).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let v = ProbVector::binary(0.25);
        assert_abs_diff_eq!(kl_loss(&h, &v).unwrap(), 0.143841036, epsilon = 1e-8);
        assert_eq!(kl_loss(&h, &ProbVector::vertex(2, 0)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn log_blf_is_kl() {
        let blf = blf_from_proper_loss(&ProperLossSpec::binary(LossKind::Log)).unwrap();
        for (y, v) in [(1.0, 0.3), (0.5, 0.25), (0.2, 0.9)] {
            let (y, v) = (ProbVector::binary(y), ProbVector::binary(v));
            assert_abs_diff_eq!(blf.eval(&y, &v).unwrap(), kl_loss(&y, &v).unwrap(), epsilon = 1e-12);
        }
        let e1 = ProbVector::vertex(2, 0);
        assert_abs_diff_eq!(blf.eval(&e1, &ProbVector::binary(0.3)).unwrap(), -(0.3f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn vertex_reconstruction() {
        for kind in [LossKind::Log, LossKind::SquareVector] {
            let l = ProperLossSpec::binary(kind);
            let blf = blf_from_proper_loss(&l).unwrap();
            for v in interval_grid(0.01, 0.99, 0.01) {
                let vv = ProbVector::binary(v);
                for i in 0..2 {
                    let got = blf.eval(&ProbVector::vertex(2, i), &vv).unwrap();
                    assert_abs_diff_eq!(got, l.partial(i, vv.as_slice()), epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn lemma14_holds_for_blfs_at_unit_c() {
        let grid = interval_grid(0.05, 0.95, 0.05);
        let kl = PairLoss::kl(2);
        assert!(check_lemma14_condition(&kl, 1.0, 1.0, &grid).unwrap().verdict);
        let sq = blf_from_proper_loss(&ProperLossSpec::binary(LossKind::SquareVector)).unwrap();
        assert!(check_lemma14_condition(&sq, 1.0, 1.0, &grid).unwrap().verdict);
        assert!(check_lemma14_condition(&kl, 1.0, 0.5, &grid).is_err());
    }

    #[test]
    fn kl_mixability_and_exp_concavity() {
        let kl = PairLoss::kl(2);
        assert!(check_blf_mixability(&kl, 1.0).unwrap());
        assert!(!check_blf_mixability(&kl, 1.2).unwrap());
        let ys = interval_grid(0.0, 1.0, 0.1);
        assert!(check_pair_exp_concavity(&kl, 1.0, &ys, 1e-2).unwrap().verdict);
        let sq = blf_from_proper_loss(&ProperLossSpec::binary(LossKind::SquareVector)).unwrap();
        assert!(check_blf_mixability(&sq, 1.0).unwrap());
    }
}
