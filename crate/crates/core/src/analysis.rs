//! Exp-concavity characterizations for binary composite losses and black-box
//! midpoint testers that serve as independent oracles.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::links::{identity_link, CompositeLoss, LinkFunction};
use crate::losses::{LossKind, ProperLossSpec};
use crate::numeric::integrate;
use crate::simplex::{interval_grid, ProbVector};

pub const GRID_STEP: f64 = 1e-3;
pub const GRID_MARGIN: f64 = 1e-3;
pub const ANALYTIC_TOL: f64 = 1e-8;
pub const MIDPOINT_TOL: f64 = 1e-9;
const QUAD_TOL: f64 = 1e-10;
const RECONSTRUCTION_TOL: f64 = 1e-6;

/// Per-point signed slack of a pair of inequalities over a grid.
#[derive(Debug, Clone)]
pub struct GridReport {
    /// `p̃` values for grid checks, sample indices for sampled checks.
    pub grid_points: Vec<f64>,
    pub slack_lower: Vec<f64>,
    pub slack_upper: Vec<f64>,
    pub tolerance: f64,
    pub verdict: bool,
    pub witness: Option<f64>,
    /// Scale applied to the loss when the check needs `w(½) = 1`.
    pub scale: Option<f64>,
    /// A true verdict only means the necessary condition holds.
    pub necessary_only: bool,
    pub diagnostics: Vec<String>,
}

impl GridReport {
    pub fn from_slacks(points: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>, tolerance: f64) -> Self {
        let mut witness = None;
        for i in 0..points.len() {
            let s = lower[i].min(upper[i]);
            // NaN is a failed evaluation and counts as a violation
            if !(s >= -tolerance) || lower[i].is_nan() || upper[i].is_nan() {
                witness = Some(points[i]);
                break;
            }
        }
        GridReport {
            grid_points: points,
            slack_lower: lower,
            slack_upper: upper,
            tolerance,
            verdict: witness.is_none(),
            witness,
            scale: None,
            necessary_only: false,
            diagnostics: Vec::new(),
        }
    }

    pub fn slack(&self) -> Vec<f64> {
        self.slack_lower
            .iter()
            .zip(&self.slack_upper)
            .map(|(a, b)| a.min(*b))
            .collect()
    }

    pub fn min_slack(&self) -> f64 {
        self.slack().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["p_tilde", "slack_lower", "slack_upper"])?;
        for i in 0..self.grid_points.len() {
            out.write_record([
                self.grid_points[i].to_string(),
                self.slack_lower[i].to_string(),
                self.slack_upper[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    fn label(self, scale: Option<f64>, necessary_only: bool) -> Self {
        GridReport {
            scale,
            necessary_only,
            ..self
        }
    }
}

/// A binary loss rescaled so that `w(½) = 1`.
#[derive(Debug, Clone)]
pub struct NormalizedLoss {
    pub base: ProperLossSpec,
    pub scale: f64,
}

impl NormalizedLoss {
    pub fn new(base: &ProperLossSpec) -> Result<Self> {
        let scale = 1.0 / base.weight(0.5)?;
        Ok(NormalizedLoss {
            base: base.clone(),
            scale,
        })
    }

    pub fn spec(&self) -> ProperLossSpec {
        self.base.scaled(self.scale).expect("positive scale")
    }

    pub fn weight(&self, p: f64) -> Result<f64> {
        Ok(self.scale * self.base.weight(p)?)
    }
}

pub fn analysis_grid() -> Vec<f64> {
    interval_grid(GRID_MARGIN, 1.0 - GRID_MARGIN, GRID_STEP)
}

fn require_binary(loss: &ProperLossSpec) -> Result<()> {
    if loss.n() != 2 || !loss.is_strictly_proper() {
        return Err(Error::arg(format!(
            "`{}` (n = {}) is not a binary strictly proper loss",
            loss.name(),
            loss.n()
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::arg(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// `−1/p̃ + αwp̃ ≤ w'/w − ψ''/ψ' ≤ 1/(1−p̃) − αw(1−p̃)` on the grid.
/// Necessary and sufficient for α-exp-concavity of the composite.
pub fn check_prop5(
    loss: &ProperLossSpec,
    link: &LinkFunction,
    alpha: f64,
    tol: f64,
) -> Result<GridReport> {
    require_binary(loss)?;
    check_alpha(alpha)?;
    let grid = analysis_grid();
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::new();
    for &p in &grid {
        let eval = || -> Result<(f64, f64)> {
            let w = loss.weight(p)?;
            let dw = loss.weight_derivative(p)?;
            let d1 = link.derivative(p);
            let d2 = link.second_derivative(p);
            let mid = dw / w - d2 / d1;
            let lo = -1.0 / p + alpha * w * p;
            let hi = 1.0 / (1.0 - p) - alpha * w * (1.0 - p);
            Ok((mid - lo, hi - mid))
        };
        match eval() {
            Ok((a, b)) => {
                lower.push(a);
                upper.push(b);
            }
            Err(e) => {
                diagnostics.push(format!("p̃ = {p}: {e}"));
                lower.push(f64::NAN);
                upper.push(f64::NAN);
            }
        }
    }
    let mut r = GridReport::from_slacks(grid, lower, upper, tol);
    r.diagnostics = diagnostics;
    Ok(r)
}

/// Sign-aware two-sided bound on the normalized weight. A false verdict
/// refutes α-exp-concavity; a true verdict is inconclusive.
///
/// With `D = 2ψ'(½) − α(ψ − ψ(½))` and `U = 2ψ'(½) + α(ψ − ψ(½))` the
/// conditions read `w p̃ D ≥ ψ'` and `w (1−p̃) U ≤ ψ'` for `p̃ ≥ ½`, reversed
/// below ½. Slacks are relative to `ψ'`.
pub fn check_prop6(loss: &ProperLossSpec, link: &LinkFunction, alpha: f64) -> Result<GridReport> {
    require_binary(loss)?;
    check_alpha(alpha)?;
    let norm = NormalizedLoss::new(loss)?;
    let psi_half = link.forward(0.5);
    let d_half = link.derivative(0.5);
    let grid = analysis_grid();
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for &p in &grid {
        let w = norm.weight(p)?;
        let d1 = link.derivative(p);
        let shift = alpha * (link.forward(p) - psi_half);
        let big_d = 2.0 * d_half - shift;
        let big_u = 2.0 * d_half + shift;
        let sign = if p >= 0.5 { 1.0 } else { -1.0 };
        lower.push(sign * (w * p * big_d - d1) / d1);
        upper.push(sign * (d1 - w * (1.0 - p) * big_u) / d1);
    }
    Ok(GridReport::from_slacks(grid, lower, upper, ANALYTIC_TOL).label(Some(norm.scale), true))
}

/// The identity-link specialization
/// `1/(p̃(2 − α(p̃−½))) ⋚ w ⋚ 1/((1−p̃)(2 + α(p̃−½)))`.
pub fn check_identity_necessary(loss: &ProperLossSpec, alpha: f64) -> Result<GridReport> {
    check_prop6(loss, &identity_link(), alpha)
}

/// `w ≤ 1/(αp̃²)` and `w ≤ 1/(α(1−p̃)²)`, as `1 − αwp̃² ≥ 0` and `1 − αw(1−p̃)² ≥ 0`.
pub fn check_canonical_condition(loss: &ProperLossSpec, alpha: f64) -> Result<GridReport> {
    require_binary(loss)?;
    check_alpha(alpha)?;
    let grid = analysis_grid();
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for &p in &grid {
        let w = loss.weight(p)?;
        lower.push(1.0 - alpha * w * p * p);
        upper.push(1.0 - alpha * w * (1.0 - p) * (1.0 - p));
    }
    Ok(GridReport::from_slacks(grid, lower, upper, ANALYTIC_TOL))
}

#[derive(Debug, Clone)]
pub struct Theorem7Report {
    /// `slack_lower`: the integral lower condition; `slack_upper`: `−α − a` (or `b`).
    pub inequalities: GridReport,
    pub max_reconstruction_error: f64,
    pub reconstruction_ok: bool,
    pub verdict: bool,
}

/// Sufficient conditions built from `a` on `(0,½]` and `b` on `[½,1)`,
/// plus the check that they reproduce the normalized weight.
pub fn check_theorem7(
    loss: &ProperLossSpec,
    a: &dyn Fn(f64) -> f64,
    b: &dyn Fn(f64) -> f64,
    alpha: f64,
) -> Result<Theorem7Report> {
    require_binary(loss)?;
    check_alpha(alpha)?;
    let norm = NormalizedLoss::new(loss)?;
    let left = interval_grid(GRID_MARGIN, 0.5, GRID_STEP);
    let right = interval_grid(0.5, 1.0 - GRID_MARGIN, GRID_STEP);

    let mut points = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut max_err = 0.0f64;

    // ∫_p^{½} a, accumulated from ½ downwards
    let mut acc = 0.0;
    let mut prev = 0.5;
    let mut left_rows = Vec::with_capacity(left.len());
    for &p in left.iter().rev() {
        acc += integrate(&|t| a(t), p, prev, QUAD_TOL)?;
        prev = p;
        let s = p * (1.0 - p);
        let lhs = alpha * (1.0 - p) / p - 2.0 / s + acc / s;
        let ap = a(p);
        let recon = 1.0 / (p * (2.0 - acc));
        let w = norm.weight(p)?;
        max_err = max_err.max(((recon - w) / w).abs());
        left_rows.push((p, (ap - lhs) / ap.abs().max(1.0), -alpha - ap));
    }
    for (p, lo, hi) in left_rows.into_iter().rev() {
        points.push(p);
        lower.push(lo);
        upper.push(hi);
    }

    let mut acc = 0.0;
    let mut prev = 0.5;
    for &p in right.iter().skip(1) {
        acc += integrate(&|t| b(t), prev, p, QUAD_TOL)?;
        prev = p;
        let s = p * (1.0 - p);
        let lhs = alpha * p / (1.0 - p) - 2.0 / s + acc / s;
        let bp = b(p);
        let recon = 1.0 / ((1.0 - p) * (2.0 - acc));
        let w = norm.weight(p)?;
        max_err = max_err.max(((recon - w) / w).abs());
        points.push(p);
        lower.push((bp - lhs) / bp.abs().max(1.0));
        upper.push(-alpha - bp);
    }

    let inequalities =
        GridReport::from_slacks(points, lower, upper, ANALYTIC_TOL).label(Some(norm.scale), false);
    let reconstruction_ok = max_err <= RECONSTRUCTION_TOL;
    Ok(Theorem7Report {
        verdict: inequalities.verdict && reconstruction_ok,
        inequalities,
        max_reconstruction_error: max_err,
        reconstruction_ok,
    })
}

pub type Envelope = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed-form lower envelopes `(a_min, b_min)` for the sufficient conditions.
pub fn beesack_envelope(alpha: f64) -> (Envelope, Envelope) {
    let a_min = move |p: f64| -alpha + alpha / (2.0 * p * p) - 2.0 / (p * p);
    let b_min = move |p: f64| {
        let q = 1.0 - p;
        alpha * p / q + (2.0 * alpha * p - alpha - 4.0) / (2.0 * q * q)
    };
    (Box::new(a_min), Box::new(b_min))
}

/// Evenly spaced prediction grid over the link range, kept `GRID_MARGIN` away
/// from the boundary of the reduced simplex.
fn composite_grid(c: &CompositeLoss, grid_step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let link = c.link();
    let (dlo, dhi) = link.domain();
    let v_lo = link.forward(GRID_MARGIN.max(dlo));
    let v_hi = link.forward((1.0 - GRID_MARGIN).min(dhi));
    let k = (1.0 / grid_step).round() as usize;
    let mut vs = Vec::with_capacity(k + 1);
    let mut ps = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let v = v_lo + (v_hi - v_lo) * i as f64 / k as f64;
        vs.push(v);
        ps.push(link.invert(v)?);
    }
    Ok((vs, ps))
}

/// Midpoint concavity of `v ↦ e^{−αℓ_y(v)}` over every grid pair whose
/// midpoint is itself a grid point.
pub fn numeric_exp_concavity(c: &CompositeLoss, alpha: f64, grid_step: f64) -> Result<GridReport> {
    check_alpha(alpha)?;
    let (_, ps) = composite_grid(c, grid_step)?;
    let f: Vec<[f64; 2]> = ps
        .iter()
        .map(|&p| {
            [
                (-alpha * c.base().partial_binary(0, p)).exp(),
                (-alpha * c.base().partial_binary(1, p)).exp(),
            ]
        })
        .collect();
    let (lower, upper) = midpoint_slacks(&f, |mid, a, b| mid - 0.5 * (a + b));
    Ok(GridReport::from_slacks(ps, lower, upper, MIDPOINT_TOL))
}

/// Midpoint convexity of `v ↦ ℓ_y(v)` itself.
pub fn numeric_convexity(c: &CompositeLoss, grid_step: f64) -> Result<GridReport> {
    let (_, ps) = composite_grid(c, grid_step)?;
    let f: Vec<[f64; 2]> = ps
        .iter()
        .map(|&p| [c.base().partial_binary(0, p), c.base().partial_binary(1, p)])
        .collect();
    let (lower, upper) = midpoint_slacks(&f, |mid, a, b| (0.5 * (a + b) - mid) / mid.abs().max(1.0));
    Ok(GridReport::from_slacks(ps, lower, upper, MIDPOINT_TOL))
}

/// Worst slack per midpoint index over pairs `(m−d, m+d)`.
fn midpoint_slacks(f: &[[f64; 2]], slack: impl Fn(f64, f64, f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    let mut lower = vec![f64::INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for m in 0..n {
        let reach = m.min(n - 1 - m);
        for d in 1..=reach {
            let (a, b) = (f[m - d], f[m + d]);
            lower[m] = lower[m].min(slack(f[m][0], a[0], b[0]));
            upper[m] = upper[m].min(slack(f[m][1], a[1], b[1]));
        }
    }
    // endpoints are never midpoints
    for s in [&mut lower, &mut upper] {
        for x in s.iter_mut() {
            if x.is_infinite() {
                *x = 0.0;
            }
        }
    }
    (lower, upper)
}

/// Uniform sample from the simplex.
pub fn sample_simplex<R: Rng>(rng: &mut R, n: usize) -> ProbVector {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    ProbVector::normalized(&e).expect("positive weights")
}

/// Midpoint concavity of `p ↦ e^{−αℓ_y(p)}` on random segments of the
/// simplex (identity link, any n).
pub fn numeric_exp_concavity_simplex(
    loss: &ProperLossSpec,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<GridReport> {
    check_alpha(alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = loss.n();
    let mut points = Vec::with_capacity(samples);
    let mut worst = Vec::with_capacity(samples);
    for s in 0..samples {
        let a = sample_simplex(&mut rng, n);
        let b = sample_simplex(&mut rng, n);
        let m = a.midpoint(&b);
        let la = loss.partial_loss(&a)?;
        let lb = loss.partial_loss(&b)?;
        let lm = loss.partial_loss(&m)?;
        let mut w = f64::INFINITY;
        for y in 0..n {
            let f = |l: f64| (-alpha * l).exp();
            w = w.min(f(lm[y]) - 0.5 * (f(la[y]) + f(lb[y])));
        }
        points.push(s as f64);
        worst.push(w);
    }
    Ok(GridReport::from_slacks(points, worst.clone(), worst, MIDPOINT_TOL))
}

/// Convexity of `E_β(S_ℓ)` for a binary loss: midpoints of exp-transformed
/// curve points must lie under the northeast boundary of the curve.
pub fn numeric_mixability(loss: &ProperLossSpec, beta: f64, grid_step: f64) -> Result<GridReport> {
    if loss.n() != 2 {
        return Err(Error::UnsupportedClassCount {
            name: loss.name(),
            n: loss.n(),
        });
    }
    check_alpha(beta)?;
    let k = (1.0 / grid_step).round() as usize;
    let ps: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let curve: Vec<[f64; 2]> = ps
        .iter()
        .map(|&p| [loss.partial_binary(0, p), loss.partial_binary(1, p)])
        .collect();
    curve_mixability(&ps, &curve, beta)
}

/// Mixability test for a parameterized binary loss curve `t ↦ (ℓ_1, ℓ_2)`.
pub fn curve_mixability(params: &[f64], losses: &[[f64; 2]], beta: f64) -> Result<GridReport> {
    let z: Vec<[f64; 2]> = losses
        .iter()
        .map(|l| [(-beta * l[0]).exp(), (-beta * l[1]).exp()])
        .collect();
    // boundary polyline sorted by the first coordinate
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&i, &j| z[i][0].total_cmp(&z[j][0]).then(z[j][1].total_cmp(&z[i][1])));
    let xs: Vec<f64> = order.iter().map(|&i| z[i][0]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| z[i][1]).collect();
    let mut suffix = ys.clone();
    for i in (0..suffix.len().saturating_sub(1)).rev() {
        suffix[i] = suffix[i].max(suffix[i + 1]);
    }
    let height = |x: f64| -> f64 {
        let last = xs.len() - 1;
        if x > xs[last] {
            return f64::NEG_INFINITY;
        }
        let j = xs.partition_point(|v| *v < x);
        let mut h = suffix[j];
        if j > 0 && xs[j] > xs[j - 1] {
            let t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
            h = h.max(ys[j - 1] + t * (ys[j] - ys[j - 1]));
        }
        h
    };
    let n = z.len();
    let mut worst = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            let mx = 0.5 * (z[i][0] + z[j][0]);
            let my = 0.5 * (z[i][1] + z[j][1]);
            let h = height(mx - MIDPOINT_TOL);
            let s = if h.is_finite() { h - my } else { xs[n - 1] - mx };
            worst[i] = worst[i].min(s);
            worst[j] = worst[j].min(s);
        }
    }
    for w in worst.iter_mut() {
        if w.is_infinite() {
            *w = 0.0;
        }
    }
    Ok(GridReport::from_slacks(params.to_vec(), worst.clone(), worst, MIDPOINT_TOL))
}

/// Kinds in the binary weight-function catalog.
pub fn weighted_catalog() -> Vec<ProperLossSpec> {
    [LossKind::Log, LossKind::SquareVector, LossKind::SquareScalar, LossKind::Boosting]
        .into_iter()
        .map(ProperLossSpec::binary)
        .collect()
}
