//! Catalog of proper losses, risk calculus, the β-exponential operator and
//! mixability constants.
//!
//! Binary losses are parameterized by `p̃ = p_1`, the probability of the
//! first class. Class indices are zero based.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::simplex::{interval_grid, ProbVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Log,
    SquareVector,
    SquareScalar,
    Boosting,
    Absolute,
    ZeroOne,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Log,
        LossKind::SquareVector,
        LossKind::SquareScalar,
        LossKind::Boosting,
        LossKind::Absolute,
        LossKind::ZeroOne,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Log => "log",
            LossKind::SquareVector => "square_vector",
            LossKind::SquareScalar => "square_scalar",
            LossKind::Boosting => "boosting",
            LossKind::Absolute => "absolute",
            LossKind::ZeroOne => "zero_one",
        }
    }

    fn binary_only(self) -> bool {
        matches!(self, LossKind::SquareScalar | LossKind::Boosting)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownLoss(s.to_string()))
    }
}

/// A catalog loss, possibly rescaled by a positive factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProperLossSpec {
    kind: LossKind,
    n: usize,
    scale: f64,
}

pub fn catalog_loss(name: &str, n: usize) -> Result<ProperLossSpec> {
    ProperLossSpec::new(name.parse()?, n)
}

impl ProperLossSpec {
    pub fn new(kind: LossKind, n: usize) -> Result<Self> {
        if n < 2 || (kind.binary_only() && n != 2) {
            return Err(Error::UnsupportedClassCount {
                name: kind.name(),
                n,
            });
        }
        Ok(ProperLossSpec { kind, n, scale: 1.0 })
    }

    pub fn binary(kind: LossKind) -> Self {
        ProperLossSpec { kind, n: 2, scale: 1.0 }
    }

    /// The same loss multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::arg(format!("scale must be positive, got {lambda}")));
        }
        Ok(ProperLossSpec {
            scale: self.scale * lambda,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_fair(&self) -> bool {
        true
    }

    /// Absolute loss is the one catalog member that is not proper.
    pub fn is_proper(&self) -> bool {
        self.kind != LossKind::Absolute
    }

    pub fn is_strictly_proper(&self) -> bool {
        !matches!(self.kind, LossKind::Absolute | LossKind::ZeroOne)
    }

    fn check_dim(&self, p: &ProbVector) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: p.n(),
            });
        }
        Ok(())
    }

    /// `ℓ_i(q)` for a prediction `q`.
    pub fn partial(&self, i: usize, q: &[f64]) -> f64 {
        let raw = match self.kind {
            LossKind::Log => -q[i].ln(),
            LossKind::SquareVector => {
                let ss: f64 = q.iter().map(|x| x * x).sum();
                (1.0 - 2.0 * q[i] + ss).max(0.0)
            }
            LossKind::SquareScalar => {
                let d = 1.0 - q[i];
                d * d
            }
            LossKind::Boosting => {
                let (a, b) = (q[i], q[1 - i]);
                if b == 0.0 {
                    0.0
                } else {
                    0.5 * (b / a).sqrt()
                }
            }
            LossKind::Absolute => 2.0 * (1.0 - q[i]),
            LossKind::ZeroOne => {
                let arg = q
                    .iter()
                    .enumerate()
                    .fold(0, |best, (j, x)| if *x > q[best] { j } else { best });
                if arg == i {
                    0.0
                } else {
                    1.0
                }
            }
        };
        self.scale * raw
    }

    pub fn partial_loss(&self, q: &ProbVector) -> Result<Vec<f64>> {
        self.check_dim(q)?;
        Ok((0..self.n).map(|i| self.partial(i, q.as_slice())).collect())
    }

    /// Binary partial loss at `p̃ = q_1`.
    pub fn partial_binary(&self, y: usize, p: f64) -> f64 {
        self.partial(y, &[p, 1.0 - p])
    }

    pub fn conditional_risk(&self, p: &ProbVector, q: &ProbVector) -> Result<f64> {
        self.check_dim(p)?;
        self.check_dim(q)?;
        let l = self.partial_loss(q)?;
        Ok(p.dot(&l))
    }

    pub fn bayes_risk(&self, p: &ProbVector) -> Result<f64> {
        self.check_dim(p)?;
        let p = p.as_slice();
        let raw = match self.kind {
            LossKind::Log => p
                .iter()
                .map(|x| if *x > 0.0 { -x * x.ln() } else { 0.0 })
                .sum(),
            LossKind::SquareVector => 1.0 - p.iter().map(|x| x * x).sum::<f64>(),
            LossKind::SquareScalar => p[0] * p[1],
            LossKind::Boosting => (p[0] * p[1]).sqrt(),
            LossKind::Absolute => 2.0 * (1.0 - p.iter().cloned().fold(0.0, f64::max)),
            LossKind::ZeroOne => 1.0 - p.iter().cloned().fold(0.0, f64::max),
        };
        Ok(self.scale * raw)
    }

    pub fn bayes_risk_binary(&self, p: f64) -> f64 {
        self.bayes_risk(&ProbVector::binary(p))
            .expect("binary loss")
    }

    fn check_weight_domain(&self, p: f64) -> Result<()> {
        if self.n != 2 {
            return Err(Error::UnsupportedClassCount {
                name: self.name(),
                n: self.n,
            });
        }
        if !self.is_strictly_proper() {
            return Err(Error::arg(format!(
                "`{}` has no weight function",
                self.name()
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Evaluation {
                at: p,
                msg: "weight requires p̃ in (0, 1)".into(),
            });
        }
        Ok(())
    }

    /// `w(p̃) = −L̲''(p̃)`.
    pub fn weight(&self, p: f64) -> Result<f64> {
        self.check_weight_domain(p)?;
        let s = p * (1.0 - p);
        let raw = match self.kind {
            LossKind::Log => 1.0 / s,
            LossKind::SquareVector => 4.0,
            LossKind::SquareScalar => 2.0,
            LossKind::Boosting => 0.25 * s.powf(-1.5),
            _ => unreachable!(),
        };
        Ok(self.scale * raw)
    }

    /// `w'(p̃)`.
    pub fn weight_derivative(&self, p: f64) -> Result<f64> {
        self.check_weight_domain(p)?;
        let s = p * (1.0 - p);
        let raw = match self.kind {
            LossKind::Log => -(1.0 - 2.0 * p) / (s * s),
            LossKind::SquareVector | LossKind::SquareScalar => 0.0,
            LossKind::Boosting => -0.375 * (1.0 - 2.0 * p) * s.powf(-2.5),
            _ => unreachable!(),
        };
        Ok(self.scale * raw)
    }
}

pub fn conditional_risk(loss: &ProperLossSpec, p: &ProbVector, q: &ProbVector) -> Result<f64> {
    loss.conditional_risk(p, q)
}

/// `E_β(x)_i = e^{−β x_i}`; infinite losses map to 0.
pub fn exp_transform(x: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    Ok(x.iter().map(|v| (-beta * v).exp()).collect())
}

pub fn exp_inverse(z: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    if let Some(v) = z.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::arg(format!("{v} outside (0, 1]")));
    }
    Ok(z.iter().map(|v| -v.ln() / beta).collect())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// Interior grid used for weight-function infima.
pub fn weight_grid() -> Vec<f64> {
    interval_grid(1e-3, 1.0 - 1e-3, 1e-3)
}

/// `inf w_log / w` on the interior grid.
pub fn mixability_grid_estimate(loss: &ProperLossSpec) -> Result<f64> {
    let log = ProperLossSpec::binary(LossKind::Log);
    let mut best = f64::INFINITY;
    for p in weight_grid() {
        let w = loss.weight(p)?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Evaluation {
                at: p,
                msg: format!("non-positive weight {w}"),
            });
        }
        best = best.min(log.weight(p)? / w);
    }
    Ok(best)
}

/// Mixability constant `β_ℓ = inf w_log / w_ℓ`.
///
/// Log and both square losses attain their infimum at `p̃ = ½`, so the
/// closed form is returned. Log and the vector square loss keep `β = 1` for
/// every class count. Boosting has `w_log / w = 4√(p̃(1−p̃))`, whose
/// infimum over (0,1) is 0 and is not attained; it gets the grid value.
pub fn mixability_constant(loss: &ProperLossSpec) -> Result<f64> {
    let exact = match loss.kind {
        LossKind::Log | LossKind::SquareVector => Some(1.0),
        LossKind::SquareScalar => Some(2.0),
        _ => None,
    };
    match exact {
        Some(b) => Ok(b / loss.scale),
        None => mixability_grid_estimate(loss),
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
    fn weights_at_half() {
        assert_relative_eq!(bin(LossKind::Log).weight(0.5).unwrap(), 4.0);
        assert_relative_eq!(bin(LossKind::Boosting).weight(0.5).unwrap(), 2.0);
        assert_relative_eq!(bin(LossKind::SquareVector).weight(0.5).unwrap(), 4.0);
        assert_relative_eq!(bin(LossKind::SquareScalar).weight(0.5).unwrap(), 2.0);
    }

    #[test]
    fn partial_losses() {
        let sq = bin(LossKind::SquareVector);
        let l = sq.partial_loss(&ProbVector::binary(0.5)).unwrap();
        assert_relative_eq!(l[0], 0.5);
        assert_relative_eq!(l[1], 0.5);
        let sc = bin(LossKind::SquareScalar);
        // ℓ_1(v) = v² with v the second coordinate
        assert_relative_eq!(sc.partial(0, &[0.7, 0.3]), 0.09, epsilon = 1e-15);
        assert_relative_eq!(sc.partial(1, &[0.7, 0.3]), 0.49, epsilon = 1e-15);
        let b = bin(LossKind::Boosting);
        assert_relative_eq!(b.partial_binary(0, 0.2), 0.5 * 2.0, epsilon = 1e-15);
        assert_eq!(bin(LossKind::Log).partial_binary(1, 1.0), f64::INFINITY);
    }

    #[test]
    fn conditional_risk_examples() {
        let log = bin(LossKind::Log);
        let u = ProbVector::uniform(2);
        assert_relative_eq!(log.conditional_risk(&u, &u).unwrap(), 2f64.ln());
        let sq = bin(LossKind::SquareVector);
        let e = ProbVector::vertex(2, 0);
        assert_eq!(sq.conditional_risk(&e, &e).unwrap(), 0.0);
        let p = ProbVector::new(vec![0.3, 0.7]).unwrap();
        assert_relative_eq!(sq.conditional_risk(&p, &u).unwrap(), 0.5);
        let three = ProbVector::uniform(3);
        assert!(matches!(
            sq.conditional_risk(&three, &u),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn weight_is_second_difference_of_bayes_risk() {
        let h = 1e-4;
        for k in [
            LossKind::Log,
            LossKind::SquareVector,
            LossKind::SquareScalar,
            LossKind::Boosting,
        ] {
            let l = bin(k);
            for p in [0.1, 0.3, 0.5, 0.77, 0.9] {
                let d2 = (l.bayes_risk_binary(p + h) - 2.0 * l.bayes_risk_binary(p)
                    + l.bayes_risk_binary(p - h))
                    / (h * h);
                assert_relative_eq!(-d2, l.weight(p).unwrap(), max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn weight_derivative_matches_difference() {
        let h = 1e-6;
        for k in [LossKind::Log, LossKind::Boosting, LossKind::SquareVector] {
            let l = bin(k);
            for p in [0.05, 0.3, 0.5, 0.8] {
                let fd = (l.weight(p + h).unwrap() - l.weight(p - h).unwrap()) / (2.0 * h);
                assert_relative_eq!(
                    fd,
                    l.weight_derivative(p).unwrap(),
                    epsilon = 1e-6,
                    max_relative = 1e-6
                );
            }
        }
    }

    #[test]
    fn exp_operator() {
        assert_eq!(exp_transform(&[0.0, 0.0], 1.0).unwrap(), vec![1.0, 1.0]);
        let z = exp_transform(&[2f64.ln(), 2f64.ln()], 1.0).unwrap();
        assert_relative_eq!(z[0], 0.5, epsilon = 1e-15);
        let x = [0.3, 1.7];
        let back = exp_inverse(&exp_transform(&x, 2.0).unwrap(), 2.0).unwrap();
        assert_relative_eq!(back[0], 0.3, epsilon = 1e-12);
        assert_relative_eq!(back[1], 1.7, epsilon = 1e-12);
        assert!(exp_transform(&x, 0.0).is_err());
        assert!(exp_inverse(&[0.0, 0.5], 1.0).is_err());
        assert!(exp_inverse(&[1.5], 1.0).is_err());
    }

    #[test]
    fn catalog_errors() {
        assert!(matches!(catalog_loss("hinge", 2), Err(Error::UnknownLoss(_))));
        assert!(matches!(
            catalog_loss("boosting", 3),
            Err(Error::UnsupportedClassCount { .. })
        ));
        assert!(catalog_loss("square_vector", 3).is_ok());
        assert!(bin(LossKind::ZeroOne).weight(0.5).is_err());
    }

    #[test]
    fn mixability_constants() {
        assert_eq!(mixability_constant(&bin(LossKind::Log)).unwrap(), 1.0);
        assert_eq!(mixability_constant(&bin(LossKind::SquareScalar)).unwrap(), 2.0);
        assert_eq!(mixability_constant(&bin(LossKind::SquareVector)).unwrap(), 1.0);
        for k in [LossKind::Log, LossKind::SquareScalar, LossKind::SquareVector] {
            let exact = mixability_constant(&bin(k)).unwrap();
            let grid = mixability_grid_estimate(&bin(k)).unwrap();
            assert!((exact - grid).abs() < 1e-3);
        }
        // boosting: 4√(p̃(1−p̃)) has infimum 0; on the grid it sits at the edge
        let b = mixability_constant(&bin(LossKind::Boosting)).unwrap();
        assert_relative_eq!(b, 4.0 * (1e-3f64 * 0.999).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn mixability_scales_inversely() {
        for k in [LossKind::Log, LossKind::SquareScalar, LossKind::Boosting] {
            let l = bin(k);
            let base = mixability_constant(&l).unwrap();
            for lam in [0.5, 2.0] {
                let s = mixability_constant(&l.scaled(lam).unwrap()).unwrap();
                assert_relative_eq!(s, base / lam, max_relative = 1e-6);
            }
        }
    }
}
