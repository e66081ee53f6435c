//! Prediction with expert advice: exponential weights, the Aggregating
//! Algorithm with substitution functions, the Weighted Average Algorithm and
//! regret accounting for binary outcomes.
//!
//! Outcomes are class indices `0` and `1`. For a bare proper loss the
//! prediction `v` is the probability of class `1` (the second class), so the
//! underlying reduced probability is `p̃ = 1 − v`. For a composite loss the
//! prediction is `v = ψ(p̃)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::analysis::{numeric_exp_concavity, GRID_STEP};
use crate::error::{Error, Result};
use crate::links::CompositeLoss;
use crate::losses::{mixability_constant, ProperLossSpec};
use crate::numeric::bisect_increasing;

const SUBST_TOL: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-9;
const ETA_SLACK: f64 = 1e-9;

/// The loss the learner and experts are scored with.
#[derive(Debug, Clone)]
pub enum GameLoss {
    Proper(ProperLossSpec),
    Composite(CompositeLoss),
}

impl GameLoss {
    pub fn base(&self) -> &ProperLossSpec {
        match self {
            GameLoss::Proper(l) => l,
            GameLoss::Composite(c) => c.base(),
        }
    }

    /// Reduced probability `p̃` behind a prediction.
    pub fn to_p(&self, v: f64) -> Result<f64> {
        match self {
            GameLoss::Proper(_) => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidProb(format!("prediction {v} outside [0, 1]")));
                }
                Ok(1.0 - v)
            }
            GameLoss::Composite(c) => c.link().invert(v),
        }
    }

    pub fn to_v(&self, p: f64) -> f64 {
        match self {
            GameLoss::Proper(_) => 1.0 - p,
            GameLoss::Composite(c) => c.link().forward(p),
        }
    }

    fn loss_at_p(&self, y: usize, p: f64) -> f64 {
        self.base().partial_binary(y, p)
    }

    pub fn loss(&self, y: usize, v: f64) -> Result<f64> {
        check_outcome(y)?;
        Ok(self.loss_at_p(y, self.to_p(v)?))
    }

    pub fn loss_vector(&self, v: f64) -> Result<[f64; 2]> {
        let p = self.to_p(v)?;
        Ok([self.loss_at_p(0, p), self.loss_at_p(1, p)])
    }

    fn composite(&self) -> Result<CompositeLoss> {
        match self {
            GameLoss::Proper(l) => CompositeLoss::proper(l.clone()),
            GameLoss::Composite(c) => Ok(c.clone()),
        }
    }
}

fn check_outcome(y: usize) -> Result<()> {
    if y > 1 {
        return Err(Error::arg(format!("outcome {y} is not a binary class index")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Aa,
    Waa,
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aa" => Ok(Algorithm::Aa),
            "waa" => Ok(Algorithm::Waa),
            _ => Err(Error::arg(format!("unknown algorithm `{s}` (expected aa or waa)"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Aa => "aa",
            Algorithm::Waa => "waa",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Substitution {
    BestLookahead,
    WorstLookahead,
    InverseLoss,
    WeightedAverage,
}

impl Substitution {
    pub const ALL: [Substitution; 4] = [
        Substitution::BestLookahead,
        Substitution::WorstLookahead,
        Substitution::InverseLoss,
        Substitution::WeightedAverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Substitution::BestLookahead => "best_lookahead",
            Substitution::WorstLookahead => "worst_lookahead",
            Substitution::InverseLoss => "inverse_loss",
            Substitution::WeightedAverage => "weighted_average",
        }
    }
}

impl FromStr for Substitution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "best_lookahead" | "best" => Ok(Substitution::BestLookahead),
            "worst_lookahead" | "worst" => Ok(Substitution::WorstLookahead),
            "inverse_loss" | "inverse" => Ok(Substitution::InverseLoss),
            "weighted_average" | "average" => Ok(Substitution::WeightedAverage),
            _ => Err(Error::arg(format!("unknown substitution `{s}`"))),
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct GameConfig {
    pub loss: GameLoss,
    pub algorithm: Algorithm,
    pub substitution: Substitution,
    pub eta: f64,
    pub c_beta: f64,
    pub seed: u64,
    /// Allow the weighted average without an exp-concavity certificate.
    pub override_exp_concavity: bool,
}

impl GameConfig {
    pub fn new(loss: GameLoss, algorithm: Algorithm, substitution: Substitution, eta: f64) -> Self {
        GameConfig {
            loss,
            algorithm,
            substitution,
            eta,
            c_beta: 1.0,
            seed: 0,
            override_exp_concavity: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.loss.base().n() != 2 {
            return Err(Error::UnsupportedClassCount {
                name: self.loss.base().name(),
                n: self.loss.base().n(),
            });
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::arg(format!("eta must be positive, got {}", self.eta)));
        }
        if self.c_beta != 1.0 {
            return Err(Error::arg(format!("c_beta must be 1, got {}", self.c_beta)));
        }
        let averaging = self.algorithm == Algorithm::Waa
            || self.substitution == Substitution::WeightedAverage;
        if self.algorithm == Algorithm::Aa {
            let beta = mixability_constant(self.loss.base())?;
            if self.eta > beta + ETA_SLACK {
                return Err(Error::arg(format!(
                    "eta {} exceeds the mixability constant {beta} of `{}`",
                    self.eta,
                    self.loss.base().name()
                )));
            }
        }
        if averaging && self.algorithm == Algorithm::Waa && !self.override_exp_concavity {
            let report = numeric_exp_concavity(&self.loss.composite()?, self.eta, GRID_STEP)?;
            if !report.verdict {
                return Err(Error::arg(format!(
                    "`{}` is not {}-exp-concave under this link; pass the override to run anyway",
                    self.loss.base().name(),
                    self.eta
                )));
            }
        }
        Ok(())
    }
}

/// Expert weights on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    pub weights: Vec<f64>,
}

impl WeightState {
    pub fn uniform(n: usize) -> Self {
        WeightState {
            weights: vec![1.0 / n as f64; n],
        }
    }
}

/// `w_i ← w_i e^{−η ℓ_i}`, renormalized.
pub fn update_weights(state: &WeightState, losses: &[f64], eta: f64) -> Result<WeightState> {
    if losses.len() != state.weights.len() {
        return Err(Error::Dimension {
            expected: state.weights.len(),
            got: losses.len(),
        });
    }
    // shift by the smallest loss among live experts to avoid underflow
    let shift = state
        .weights
        .iter()
        .zip(losses)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, l)| *l)
        .fold(f64::INFINITY, f64::min);
    if !shift.is_finite() {
        return Err(Error::ZeroMass);
    }
    let raw: Vec<f64> = state
        .weights
        .iter()
        .zip(losses)
        .map(|(w, l)| if *w == 0.0 { 0.0 } else { w * (-eta * (l - shift)).exp() })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(WeightState {
        weights: raw.into_iter().map(|w| w / total).collect(),
    })
}

/// `g_j = −(1/β) ln Σ_i w_i e^{−β ℓ_j(v^i)}`.
pub fn generalized_prediction(state: &WeightState, expert_losses: &[Vec<f64>], beta: f64) -> Result<Vec<f64>> {
    if expert_losses.len() != state.weights.len() {
        return Err(Error::Dimension {
            expected: state.weights.len(),
            got: expert_losses.len(),
        });
    }
    if !(beta > 0.0) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    let n = expert_losses.first().map_or(0, Vec::len);
    let mut g = Vec::with_capacity(n);
    for j in 0..n {
        let shift = state
            .weights
            .iter()
            .zip(expert_losses)
            .filter(|(w, _)| **w > 0.0)
            .map(|(_, l)| l[j])
            .fold(f64::INFINITY, f64::min);
        if !shift.is_finite() {
            g.push(f64::INFINITY);
            continue;
        }
        let s: f64 = state
            .weights
            .iter()
            .zip(expert_losses)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, l)| w * (-beta * (l[j] - shift)).exp())
            .sum();
        g.push(shift - s.ln() / beta);
    }
    Ok(g)
}

/// Solutions `a` of `ℓ_0(p̃) = g_0` and `b` of `ℓ_1(p̃) = g_1`, clamped to
/// `[0, 1]`. They bound the permitted interval when `g` is a super-prediction.
fn endpoints(loss: &GameLoss, g: &[f64]) -> (f64, f64) {
    let l0 = |p: f64| loss.loss_at_p(0, p);
    let l1 = |p: f64| loss.loss_at_p(1, p);
    // ℓ_0 decreases and ℓ_1 increases in p̃
    let a = if l0(0.0) <= g[0] {
        0.0
    } else if l0(1.0) > g[0] {
        1.0
    } else {
        bisect_increasing(|p| -l0(p), -g[0], 0.0, 1.0, SUBST_TOL).1
    };
    let b = if l1(1.0) <= g[1] {
        1.0
    } else if l1(0.0) > g[1] {
        0.0
    } else {
        bisect_increasing(l1, g[1], 0.0, 1.0, SUBST_TOL).0
    };
    (a, b)
}

/// Permitted interval `[a, b]` of `p̃` with `ℓ_0(p̃) ≤ g_0` and `ℓ_1(p̃) ≤ g_1`.
pub fn permitted_interval(loss: &GameLoss, g: &[f64]) -> Result<(f64, f64)> {
    let (a, b) = endpoints(loss, g);
    let l0 = |p: f64| loss.loss_at_p(0, p);
    let l1 = |p: f64| loss.loss_at_p(1, p);
    let ok = |p: f64| l0(p) <= g[0] + FEASIBILITY_TOL && l1(p) <= g[1] + FEASIBILITY_TOL;
    if a <= b {
        return Ok((a, b));
    }
    let m = 0.5 * (a + b);
    if ok(m) {
        return Ok((m, m));
    }
    Err(Error::NotSuperPrediction(g.to_vec()))
}

/// Maps a generalized prediction to a permitted prediction `v`.
pub fn substitute(
    loss: &GameLoss,
    substitution: Substitution,
    g: &[f64],
    outcome: Option<usize>,
    weights: Option<(&WeightState, &[f64])>,
) -> Result<f64> {
    if g.len() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: g.len(),
        });
    }
    if substitution == Substitution::WeightedAverage {
        let (state, preds) = weights
            .ok_or_else(|| Error::arg("weighted_average needs the weights and expert predictions"))?;
        return Ok(state.weights.iter().zip(preds).map(|(w, v)| w * v).sum());
    }
    let p = match substitution {
        Substitution::BestLookahead | Substitution::WorstLookahead => {
            let y = outcome.ok_or_else(|| Error::arg("look-ahead substitution needs the outcome"))?;
            check_outcome(y)?;
            let (a, b) = endpoints(loss, g);
            // the endpoint at which the realized loss equals g_y
            let worst = if y == 0 { a } else { b };
            let best = if y == 0 { b } else { a };
            if substitution == Substitution::WorstLookahead {
                worst
            } else {
                best
            }
        }
        Substitution::InverseLoss => {
            if g[0] == 0.0 && g[1] == 0.0 {
                return Err(Error::arg("inverse loss is undefined for g = 0"));
            }
            // ratio rule ℓ_1/ℓ_0 = g_1/g_0; increasing in p̃
            let h = |p: f64| {
                let (l0, l1) = (loss.loss_at_p(0, p), loss.loss_at_p(1, p));
                l1 * g[0] - l0 * g[1]
            };
            let (lo, hi) = bisect_increasing(h, 0.0, 0.0, 1.0, SUBST_TOL);
            0.5 * (lo + hi)
        }
        Substitution::WeightedAverage => unreachable!(),
    };
    Ok(loss.to_v(p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub prediction: f64,
    pub learner_loss: f64,
    pub expert_losses: Vec<f64>,
    pub state: WeightState,
}

fn expert_loss_vectors(loss: &GameLoss, preds: &[f64]) -> Result<Vec<Vec<f64>>> {
    preds.iter().map(|v| loss.loss_vector(*v).map(|l| l.to_vec())).collect()
}

pub fn aa_step(config: &GameConfig, state: &WeightState, preds: &[f64], outcome: usize) -> Result<StepResult> {
    check_outcome(outcome)?;
    let vectors = expert_loss_vectors(&config.loss, preds)?;
    let g = generalized_prediction(state, &vectors, config.eta)?;
    let prediction = substitute(
        &config.loss,
        config.substitution,
        &g,
        Some(outcome),
        Some((state, preds)),
    )?;
    finish_step(config, state, &vectors, prediction, outcome)
}

pub fn waa_step(config: &GameConfig, state: &WeightState, preds: &[f64], outcome: usize) -> Result<StepResult> {
    check_outcome(outcome)?;
    let vectors = expert_loss_vectors(&config.loss, preds)?;
    let prediction = state.weights.iter().zip(preds).map(|(w, v)| w * v).sum();
    finish_step(config, state, &vectors, prediction, outcome)
}

fn finish_step(
    config: &GameConfig,
    state: &WeightState,
    vectors: &[Vec<f64>],
    prediction: f64,
    outcome: usize,
) -> Result<StepResult> {
    let learner_loss = config.loss.loss(outcome, prediction)?;
    let expert_losses: Vec<f64> = vectors.iter().map(|l| l[outcome]).collect();
    let state = update_weights(state, &expert_losses, config.eta)?;
    Ok(StepResult {
        prediction,
        learner_loss,
        expert_losses,
        state,
    })
}

/// Source of expert predictions; `history` holds the outcomes before round `t`.
pub trait ExpertPool {
    fn n(&self) -> usize;
    fn predict(&self, t: usize, history: &[usize]) -> Vec<f64>;
}

/// Experts that repeat the same prediction every round.
#[derive(Debug, Clone)]
pub struct ConstantExperts(pub Vec<f64>);

impl ExpertPool for ConstantExperts {
    fn n(&self) -> usize {
        self.0.len()
    }
    fn predict(&self, _t: usize, _history: &[usize]) -> Vec<f64> {
        self.0.clone()
    }
}

/// Experts given by a precomputed per-round table.
#[derive(Debug, Clone)]
pub struct TableExperts {
    pub n: usize,
    pub rounds: Vec<Vec<f64>>,
}

impl ExpertPool for TableExperts {
    fn n(&self) -> usize {
        self.n
    }
    fn predict(&self, t: usize, _history: &[usize]) -> Vec<f64> {
        self.rounds[t].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub outcome: usize,
    pub prediction: f64,
    pub loss: f64,
    pub cum_loss: f64,
    pub expert_cum: Vec<f64>,
    pub best_expert_cum: f64,
    pub regret: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    pub records: Vec<RoundRecord>,
    pub bound: f64,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.regret)
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_loss)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "outcome", "prediction", "loss", "cum_loss", "best_expert_cum", "regret", "bound"])?;
        for r in &self.records {
            out.write_record([
                r.t.to_string(),
                r.outcome.to_string(),
                r.prediction.to_string(),
                r.loss.to_string(),
                r.cum_loss.to_string(),
                r.best_expert_cum.to_string(),
                r.regret.to_string(),
                r.bound.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `ln N / η`.
pub fn regret_bound(n: usize, eta: f64) -> Result<f64> {
    if n == 0 || !(eta > 0.0) {
        return Err(Error::arg(format!("need N >= 1 and eta > 0, got {n} and {eta}")));
    }
    Ok((n as f64).ln() / eta)
}

pub fn run_game(config: &GameConfig, pool: &dyn ExpertPool, outcomes: &[usize]) -> Result<RegretTrace> {
    config.validate()?;
    let n = pool.n();
    let bound = regret_bound(n, config.eta)?;
    let mut state = WeightState::uniform(n);
    let mut cum = 0.0;
    let mut expert_cum = vec![0.0; n];
    let mut records = Vec::with_capacity(outcomes.len());
    for (t, &y) in outcomes.iter().enumerate() {
        let round = || -> Result<StepResult> {
            let preds = pool.predict(t, &outcomes[..t]);
            if preds.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: preds.len(),
                });
            }
            match config.algorithm {
                Algorithm::Aa => aa_step(config, &state, &preds, y),
                Algorithm::Waa => waa_step(config, &state, &preds, y),
            }
        };
        let step = round().map_err(|e| Error::Round {
            round: t + 1,
            source: Box::new(e),
        })?;
        cum += step.learner_loss;
        for (c, l) in expert_cum.iter_mut().zip(&step.expert_losses) {
            *c += l;
        }
        let best = expert_cum.iter().copied().fold(f64::INFINITY, f64::min);
        records.push(RoundRecord {
            t: t + 1,
            outcome: y,
            prediction: step.prediction,
            loss: step.learner_loss,
            cum_loss: cum,
            expert_cum: expert_cum.clone(),
            best_expert_cum: best,
            regret: cum - best,
            bound,
        });
        state = step.state;
    }
    Ok(RegretTrace { records, bound })
}
