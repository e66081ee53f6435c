//! Link functions on the binary reduced simplex and composite losses.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::losses::{exp_transform, mixability_constant, LossKind, ProperLossSpec};
use crate::numeric::{bisect_increasing, integrate};
use crate::simplex::ProbVector;

/// Domain cut used when an integral link diverges at the boundary.
pub const DIVERGENT_MARGIN: f64 = 1e-6;
/// Bracket used by inversion.
pub const INVERT_MARGIN: f64 = 1e-12;
pub const INVERT_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkKind {
    Identity,
    Canonical,
    ExpConcavifying,
    Geometric { beta: f64 },
}

impl LinkKind {
    pub fn name(&self) -> &'static str {
        match self {
            LinkKind::Identity => "identity",
            LinkKind::Canonical => "canonical",
            LinkKind::ExpConcavifying => "psi_star",
            LinkKind::Geometric { .. } => "geometric",
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkKind::Geometric { beta } => write!(f, "geometric(beta={beta})"),
            k => f.write_str(k.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// A strictly monotone map from `p̃ ∈ (0,1)` to the prediction space.
#[derive(Debug, Clone)]
pub struct LinkFunction {
    kind: LinkKind,
    loss: Option<ProperLossSpec>,
    domain: (f64, f64),
    factor: f64,
    range: (f64, f64),
    direction: Direction,
}

pub fn identity_link() -> LinkFunction {
    LinkFunction {
        kind: LinkKind::Identity,
        loss: None,
        domain: (0.0, 1.0),
        factor: 1.0,
        range: (0.0, 1.0),
        direction: Direction::Increasing,
    }
}

fn require_weighted(loss: &ProperLossSpec) -> Result<()> {
    if loss.n() != 2 || !loss.is_strictly_proper() {
        return Err(Error::arg(format!(
            "`{}` (n = {}) is not a binary strictly proper loss",
            loss.name(),
            loss.n()
        )));
    }
    Ok(())
}

fn weight_or_nan(loss: &ProperLossSpec, t: f64) -> f64 {
    loss.weight(t).unwrap_or(f64::NAN)
}

/// Quadrature nodes can round onto an endpoint; nudge them back inside.
fn interior(t: f64) -> f64 {
    t.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `ψ̃(p̃) = ∫₀^p̃ w`, anchored at `δ` when the integral diverges.
pub fn canonical_link(loss: &ProperLossSpec) -> Result<LinkFunction> {
    require_weighted(loss)?;
    let w = |t: f64| weight_or_nan(loss, interior(t));
    // compare tails ∫_{1e-12}^{½} and ∫_{1e-9}^{½} on both sides
    let left = divergent_tail(&w, 1e-12, 1e-9, 0.5);
    let right = divergent_tail(&w, 1.0 - 1e-12, 1.0 - 1e-9, 0.5);
    let domain = if left || right {
        (DIVERGENT_MARGIN, 1.0 - DIVERGENT_MARGIN)
    } else {
        (0.0, 1.0)
    };
    build_integral_link(loss, LinkKind::Canonical, domain, 1.0)
}

fn divergent_tail<F: Fn(f64) -> f64>(w: &F, far: f64, near: f64, mid: f64) -> bool {
    match (integrate(w, far, mid, QUAD_TOL), integrate(w, near, mid, QUAD_TOL)) {
        (Ok(x), Ok(y)) => (x - y).abs() > 1e-6,
        _ => true,
    }
}

/// `ψ̃*(p̃) = (w_log(½)/w(½)) ∫₀^p̃ w / w_log`.
pub fn exp_concavifying_link(loss: &ProperLossSpec) -> Result<LinkFunction> {
    require_weighted(loss)?;
    let beta = mixability_constant(loss)?;
    if !(beta > 0.0) {
        return Err(Error::arg(format!("`{}` is not mixable", loss.name())));
    }
    let factor = 4.0 / loss.weight(0.5)?;
    for t in [1e-3, 0.25, 0.5, 0.75, 1.0 - 1e-3] {
        let v = loss.weight(t)? * t * (1.0 - t);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                at: t,
                msg: "integrand not finite".into(),
            });
        }
    }
    build_integral_link(loss, LinkKind::ExpConcavifying, (0.0, 1.0), factor)
}

fn build_integral_link(
    loss: &ProperLossSpec,
    kind: LinkKind,
    domain: (f64, f64),
    factor: f64,
) -> Result<LinkFunction> {
    let mut link = LinkFunction {
        kind,
        loss: Some(loss.clone()),
        domain,
        factor,
        range: (0.0, 0.0),
        direction: Direction::Increasing,
    };
    let hi = link.try_forward(domain.1)?;
    link.range = (0.0, hi);
    Ok(link)
}

/// `ψ(p̃) = e^{−βℓ₁(p̃)} − e^{−βℓ₂(p̃)}`; rejects `β` above the mixability constant.
pub fn geometric_link(loss: &ProperLossSpec, beta: f64) -> Result<LinkFunction> {
    require_weighted(loss)?;
    let b = mixability_constant(loss)?;
    if beta > b + 1e-9 {
        return Err(Error::arg(format!(
            "beta {beta} exceeds the mixability constant {b} of `{}`",
            loss.name()
        )));
    }
    geometric_link_unchecked(loss, beta)
}

/// Geometric link without the mixability check. Monotonicity is not guaranteed.
pub fn geometric_link_unchecked(loss: &ProperLossSpec, beta: f64) -> Result<LinkFunction> {
    require_weighted(loss)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    let mut link = LinkFunction {
        kind: LinkKind::Geometric { beta },
        loss: Some(loss.clone()),
        domain: (0.0, 1.0),
        factor: 1.0,
        range: (0.0, 0.0),
        direction: Direction::Increasing,
    };
    link.range = (link.forward(0.0), link.forward(1.0));
    Ok(link)
}

/// Multi-class geometric map `J E_β(ℓ(p))` into `R^{n−1}`.
pub fn geometric_map(loss: &ProperLossSpec, beta: f64, p: &ProbVector) -> Result<Vec<f64>> {
    let z = exp_transform(&loss.partial_loss(p)?, beta)?;
    let last = z[z.len() - 1];
    Ok(z[..z.len() - 1].iter().map(|x| x - last).collect())
}

/// Parses `identity`, `canonical`, `psi_star` or `geometric`.
pub fn link_by_name(name: &str, loss: &ProperLossSpec, beta: Option<f64>) -> Result<LinkFunction> {
    match name {
        "identity" => Ok(identity_link()),
        "canonical" => canonical_link(loss),
        "psi_star" | "psistar" | "exp_concavifying" => exp_concavifying_link(loss),
        "geometric" => {
            let beta = match beta {
                Some(b) => b,
                None => mixability_constant(loss)?,
            };
            geometric_link(loss, beta)
        }
        other => Err(Error::arg(format!("unknown link `{other}`"))),
    }
}

impl LinkFunction {
    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    fn base(&self) -> &ProperLossSpec {
        self.loss.as_ref().expect("link carries its loss")
    }

    fn try_forward(&self, p: f64) -> Result<f64> {
        let p = p.clamp(self.domain.0, self.domain.1);
        match self.kind {
            LinkKind::Identity => Ok(p),
            LinkKind::Canonical => {
                let loss = self.base();
                integrate(&|t| weight_or_nan(loss, interior(t)), self.domain.0, p, QUAD_TOL)
            }
            LinkKind::ExpConcavifying => {
                let loss = self.base();
                let v = integrate(
                    &|t| {
                        let t = interior(t);
                        weight_or_nan(loss, t) * t * (1.0 - t)
                    },
                    0.0,
                    p,
                    QUAD_TOL / self.factor,
                )?;
                Ok(self.factor * v)
            }
            LinkKind::Geometric { beta } => {
                let loss = self.base();
                let e1 = (-beta * loss.partial_binary(0, p)).exp();
                let e2 = (-beta * loss.partial_binary(1, p)).exp();
                Ok(e1 - e2)
            }
        }
    }

    pub fn forward(&self, p: f64) -> f64 {
        self.try_forward(p).unwrap_or(f64::NAN)
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::Canonical => weight_or_nan(self.base(), p),
            LinkKind::ExpConcavifying => self.factor * weight_or_nan(self.base(), p) * p * (1.0 - p),
            LinkKind::Geometric { beta } => {
                let (w, _, e1, e2) = self.geometric_parts(beta, p);
                beta * w * ((1.0 - p) * e1 + p * e2)
            }
        }
    }

    pub fn second_derivative(&self, p: f64) -> f64 {
        let loss = || self.base();
        match self.kind {
            LinkKind::Identity => 0.0,
            LinkKind::Canonical => loss().weight_derivative(p).unwrap_or(f64::NAN),
            LinkKind::ExpConcavifying => {
                let w = weight_or_nan(loss(), p);
                let dw = loss().weight_derivative(p).unwrap_or(f64::NAN);
                self.factor * (dw * p * (1.0 - p) + w * (1.0 - 2.0 * p))
            }
            LinkKind::Geometric { beta } => {
                let (w, dw, e1, e2) = self.geometric_parts(beta, p);
                let q = 1.0 - p;
                beta * e1 * (-w + q * dw + beta * q * q * w * w)
                    + beta * e2 * (w + p * dw - beta * p * p * w * w)
            }
        }
    }

    fn geometric_parts(&self, beta: f64, p: f64) -> (f64, f64, f64, f64) {
        let loss = self.base();
        let w = weight_or_nan(loss, p);
        let dw = loss.weight_derivative(p).unwrap_or(f64::NAN);
        let e1 = (-beta * loss.partial_binary(0, p)).exp();
        let e2 = (-beta * loss.partial_binary(1, p)).exp();
        (w, dw, e1, e2)
    }

    /// Bisection inverse on `[δ, 1−δ]` to tolerance `1e-12` in `p̃`.
    pub fn invert(&self, v: f64) -> Result<f64> {
        let (lo, hi) = self.range;
        if !(v >= lo - INVERT_TOL && v <= hi + INVERT_TOL) {
            let nearest = if v < lo { lo } else { hi };
            return Err(Error::OutOfRange { value: v, nearest });
        }
        if self.kind == LinkKind::Identity {
            return Ok(v.clamp(0.0, 1.0));
        }
        let a = self.domain.0.max(INVERT_MARGIN);
        let b = self.domain.1.min(1.0 - INVERT_MARGIN);
        let (x, y) = match self.direction {
            Direction::Increasing => bisect_increasing(|p| self.forward(p), v, a, b, INVERT_TOL),
            Direction::Decreasing => bisect_increasing(|p| -self.forward(p), -v, a, b, INVERT_TOL),
        };
        Ok(0.5 * (x + y))
    }
}

pub fn invert_link(link: &LinkFunction, v: f64) -> Result<f64> {
    link.invert(v)
}

/// `k(p̃) = w(p̃)/ψ̃'(p̃)` and its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureRatio {
    pub value: f64,
    pub derivative: f64,
}

/// A binary proper loss composed with the inverse of a link.
#[derive(Debug, Clone)]
pub struct CompositeLoss {
    base: ProperLossSpec,
    link: LinkFunction,
}

impl CompositeLoss {
    pub fn new(base: ProperLossSpec, link: LinkFunction) -> Result<Self> {
        if base.n() != 2 {
            return Err(Error::UnsupportedClassCount {
                name: base.name(),
                n: base.n(),
            });
        }
        Ok(CompositeLoss { base, link })
    }

    pub fn proper(base: ProperLossSpec) -> Result<Self> {
        CompositeLoss::new(base, identity_link())
    }

    pub fn base(&self) -> &ProperLossSpec {
        &self.base
    }

    pub fn link(&self) -> &LinkFunction {
        &self.link
    }

    pub fn kind(&self) -> LossKind {
        self.base.kind()
    }

    /// `ℓ_y^ψ(v) = ℓ_y(ψ⁻¹(v))`.
    pub fn partial(&self, y: usize, v: f64) -> Result<f64> {
        let p = self.link.invert(v)?;
        Ok(self.base.partial_binary(y, p))
    }

    pub fn bayes_risk(&self, p: f64) -> f64 {
        self.base.bayes_risk_binary(p)
    }

    pub fn curvature(&self, p: f64) -> Result<CurvatureRatio> {
        let w = self.base.weight(p)?;
        let dw = self.base.weight_derivative(p)?;
        let d1 = self.link.derivative(p);
        let d2 = self.link.second_derivative(p);
        Ok(CurvatureRatio {
            value: w / d1,
            derivative: (dw * d1 - w * d2) / (d1 * d1),
        })
    }

    /// First and second derivatives of `ℓ_y^ψ` in `v`, evaluated at `v = ψ(p̃)`.
    pub fn derivatives(&self, y: usize, p: f64) -> Result<(f64, f64)> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Evaluation {
                at: p,
                msg: "derivatives need p̃ in (0, 1)".into(),
            });
        }
        let d = self.link.derivative(p);
        if !(d != 0.0 && d.is_finite()) {
            return Err(Error::Evaluation {
                at: p,
                msg: format!("link derivative {d}"),
            });
        }
        let CurvatureRatio { value: k, derivative: dk } = self.curvature(p)?;
        Ok(match y {
            0 => (-(1.0 - p) * k, (-(1.0 - p) * dk + k) / d),
            1 => (p * k, (p * dk + k) / d),
            _ => return Err(Error::arg(format!("class {y} out of range for a binary loss"))),
        })
    }
}

pub fn composite_partial(c: &CompositeLoss, y: usize, v: f64) -> Result<f64> {
    c.partial(y, v)
}

pub fn composite_derivatives(c: &CompositeLoss, y: usize, p: f64) -> Result<(f64, f64)> {
    c.derivatives(y, p)
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "increasing" => Ok(Direction::Increasing),
            "decreasing" => Ok(Direction::Decreasing),
            _ => Err(Error::arg(format!("unknown direction `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bin(k: LossKind) -> ProperLossSpec {
        ProperLossSpec::binary(k)
    }

    #[test]
    fn identity_examples() {
        let id = identity_link();
        assert_eq!(id.forward(0.3), 0.3);
        assert_eq!(id.derivative(0.7), 1.0);
        assert_eq!(id.invert(0.42).unwrap(), 0.42);
        assert_eq!(id.invert(0.37).unwrap(), 0.37);
        assert!(matches!(id.invert(1.5), Err(Error::OutOfRange { nearest, .. }) if nearest == 1.0));
    }

    #[test]
    fn canonical_examples() {
        let sq = canonical_link(&bin(LossKind::SquareVector)).unwrap();
        assert_eq!(sq.domain(), (0.0, 1.0));
        for p in [0.1, 0.5, 0.9] {
            assert_relative_eq!(sq.forward(p), 4.0 * p, epsilon = 1e-10);
        }
        let log = canonical_link(&bin(LossKind::Log)).unwrap();
        assert_eq!(log.domain(), (DIVERGENT_MARGIN, 1.0 - DIVERGENT_MARGIN));
        assert_relative_eq!(log.derivative(0.5), 4.0);
        // anchored logit
        let logit = |p: f64| (p / (1.0 - p)).ln();
        assert_relative_eq!(
            log.forward(0.7),
            logit(0.7) - logit(DIVERGENT_MARGIN),
            epsilon = 1e-8
        );
        let b = canonical_link(&bin(LossKind::Boosting)).unwrap();
        assert_relative_eq!(b.derivative(0.5), 2.0);
        assert_eq!(b.domain().0, DIVERGENT_MARGIN);
    }

    #[test]
    fn psi_star_examples() {
        let log = exp_concavifying_link(&bin(LossKind::Log)).unwrap();
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert!((log.forward(p) - p).abs() < 1e-9);
        }
        let sq = exp_concavifying_link(&bin(LossKind::SquareVector)).unwrap();
        for p in [0.1, 0.5, 0.8] {
            let closed = 4.0 * (p * p / 2.0 - p * p * p / 3.0);
            assert_relative_eq!(sq.forward(p), closed, epsilon = 1e-9);
        }
        assert_relative_eq!(sq.derivative(0.5), 1.0, epsilon = 1e-12);
        let b = exp_concavifying_link(&bin(LossKind::Boosting)).unwrap();
        for p in [0.05f64, 0.3, 0.5, 0.95] {
            let closed = 0.5 * (2.0 * p - 1.0).asin() + std::f64::consts::FRAC_PI_4;
            assert_relative_eq!(b.forward(p), closed, epsilon = 1e-8);
        }
    }

    #[test]
    fn geometric_examples() {
        let log = geometric_link(&bin(LossKind::Log), 1.0).unwrap();
        for p in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert_relative_eq!(log.forward(p), 2.0 * p - 1.0, epsilon = 1e-15);
        }
        assert_eq!(log.range(), (-1.0, 1.0));
        let sq = geometric_link(&bin(LossKind::SquareVector), 1.0).unwrap();
        for p in [0.1f64, 0.6] {
            let closed = (-2.0 * (1.0 - p).powi(2)).exp() - (-2.0 * p * p).exp();
            assert_relative_eq!(sq.forward(p), closed, epsilon = 1e-15);
        }
        let b = geometric_link_unchecked(&bin(LossKind::Boosting), 2.0).unwrap();
        for p in [0.1f64, 0.6] {
            let closed = (-((1.0 - p) / p).sqrt()).exp() - (-(p / (1.0 - p)).sqrt()).exp();
            assert_relative_eq!(b.forward(p), closed, epsilon = 1e-15);
        }
        assert!(geometric_link(&bin(LossKind::Log), 1.5).is_err());
    }

    #[test]
    fn inversion_examples() {
        let log = geometric_link(&bin(LossKind::Log), 1.0).unwrap();
        assert!((log.invert(0.0).unwrap() - 0.5).abs() < 1e-12);
        let sq = exp_concavifying_link(&bin(LossKind::SquareVector)).unwrap();
        let v = 4.0 * (0.125 - 0.125 / 3.0);
        assert!((sq.invert(v).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn composite_examples() {
        let log = bin(LossKind::Log);
        let c = CompositeLoss::proper(log.clone()).unwrap();
        assert_relative_eq!(c.partial(0, 0.5).unwrap(), 2f64.ln());
        let g = CompositeLoss::new(log.clone(), geometric_link(&log, 1.0).unwrap()).unwrap();
        assert_relative_eq!(g.partial(0, 0.0).unwrap(), 2f64.ln(), epsilon = 1e-11);
        let sq = bin(LossKind::SquareVector);
        let ps = exp_concavifying_link(&sq).unwrap();
        let v = ps.forward(0.25);
        let c = CompositeLoss::new(sq, ps).unwrap();
        assert_relative_eq!(c.partial(1, v).unwrap(), 0.125, epsilon = 1e-9);
    }

    #[test]
    fn derivative_examples() {
        let c = CompositeLoss::proper(bin(LossKind::Log)).unwrap();
        let (d1, d2) = c.derivatives(0, 0.5).unwrap();
        assert_relative_eq!(d1, -2.0, epsilon = 1e-9);
        assert_relative_eq!(d2, 4.0, epsilon = 1e-6);
        let s = CompositeLoss::proper(bin(LossKind::SquareVector)).unwrap();
        assert_relative_eq!(s.derivatives(1, 0.25).unwrap().0, 1.0, epsilon = 1e-12);
        assert!(c.derivatives(0, 0.0).is_err());
    }

    #[test]
    fn canonical_first_derivative_is_residual() {
        for k in [LossKind::Log, LossKind::SquareVector, LossKind::Boosting] {
            let l = bin(k);
            let c = CompositeLoss::new(l.clone(), canonical_link(&l).unwrap()).unwrap();
            for p in [0.1, 0.4, 0.5, 0.85] {
                assert!((c.derivatives(0, p).unwrap().0 + (1.0 - p)).abs() < 1e-6);
                assert!((c.derivatives(1, p).unwrap().0 - p).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn link_derivatives_match_differences() {
        let h = 1e-6;
        for k in [LossKind::Log, LossKind::SquareVector, LossKind::SquareScalar, LossKind::Boosting] {
            let l = bin(k);
            let beta = mixability_constant(&l).unwrap();
            let links = [
                canonical_link(&l).unwrap(),
                exp_concavifying_link(&l).unwrap(),
                geometric_link(&l, beta).unwrap(),
            ];
            for link in &links {
                for p in [0.05, 0.3, 0.5, 0.7, 0.95] {
                    let fd = (link.forward(p + h) - link.forward(p - h)) / (2.0 * h);
                    assert_relative_eq!(fd, link.derivative(p), max_relative = 1e-5);
                    let fd2 = (link.derivative(p + h) - link.derivative(p - h)) / (2.0 * h);
                    assert_relative_eq!(
                        fd2,
                        link.second_derivative(p),
                        epsilon = 1e-6,
                        max_relative = 1e-5
                    );
                }
            }
        }
    }

    #[test]
    fn geometric_multiclass_map() {
        let l = ProperLossSpec::new(LossKind::Log, 3).unwrap();
        let p = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let v = geometric_map(&l, 1.0, &p).unwrap();
        assert_relative_eq!(v[0], -0.3, epsilon = 1e-15);
        assert_relative_eq!(v[1], -0.2, epsilon = 1e-15);
    }
}
