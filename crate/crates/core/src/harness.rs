//! Outcome generators, expert settings, CSV ingestion and the learning-rate /
//! expert-setting sweep.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{run_game, Algorithm, GameConfig, GameLoss, RegretTrace, Substitution, TableExperts};
use crate::error::{Error, Result};
use crate::losses::{LossKind, ProperLossSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeSpec {
    Bernoulli { p: f64, horizon: usize, seed: u64 },
    File(PathBuf),
}

/// Outcome `1` (the second class) is the success event.
pub fn generate_outcomes(spec: &OutcomeSpec) -> Result<Vec<usize>> {
    match spec {
        OutcomeSpec::Bernoulli { p, horizon, seed } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidProb(format!("success probability {p}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..*horizon).map(|_| usize::from(rng.gen::<f64>() < *p)).collect())
        }
        OutcomeSpec::File(path) => Ok(ingest_outcome_csv(path)?.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExpertSetting {
    /// Two constant experts predicting 0 and 1.
    Setting1,
    /// Setting 1 plus an expert that always predicts the outcome.
    Setting2,
    /// 101 constant experts `0.00, 0.01, ..., 1.00`.
    Setting3,
    File(PathBuf),
}

impl ExpertSetting {
    pub fn label(&self) -> String {
        match self {
            ExpertSetting::Setting1 => "1".into(),
            ExpertSetting::Setting2 => "2".into(),
            ExpertSetting::Setting3 => "3".into(),
            ExpertSetting::File(p) => p.display().to_string(),
        }
    }
}

impl FromStr for ExpertSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "setting1" => Ok(ExpertSetting::Setting1),
            "2" | "setting2" => Ok(ExpertSetting::Setting2),
            "3" | "setting3" => Ok(ExpertSetting::Setting3),
            path if path.ends_with(".csv") => Ok(ExpertSetting::File(path.into())),
            _ => Err(Error::arg(format!("unknown expert setting `{s}`"))),
        }
    }
}

pub fn build_experts(spec: &ExpertSetting, outcomes: &[usize]) -> Result<TableExperts> {
    let constant = |preds: Vec<f64>| TableExperts {
        n: preds.len(),
        rounds: vec![preds; outcomes.len()],
    };
    Ok(match spec {
        ExpertSetting::Setting1 => constant(vec![0.0, 1.0]),
        ExpertSetting::Setting2 => TableExperts {
            n: 3,
            rounds: outcomes.iter().map(|&y| vec![0.0, 1.0, y as f64]).collect(),
        },
        ExpertSetting::Setting3 => constant((0..=100).map(|k| k as f64 / 100.0).collect()),
        ExpertSetting::File(path) => {
            let (ys, pool) = ingest_outcome_csv(path)?;
            let pool = pool.ok_or_else(|| Error::arg(format!("{} has no expert columns", path.display())))?;
            if ys.len() < outcomes.len() {
                return Err(Error::arg(format!(
                    "{} covers {} rounds, need {}",
                    path.display(),
                    ys.len(),
                    outcomes.len()
                )));
            }
            pool
        }
    })
}

/// Parses `t,y[,e1,...,eN]` rows; `y ∈ {0, 1}`, expert predictions in `[0, 1]`.
pub fn parse_outcome_csv<R: Read>(reader: R) -> Result<(Vec<usize>, Option<TableExperts>)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "t" || &headers[1] != "y" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `t,y[,e1,...]`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let n = headers.len() - 2;
    let mut ys = Vec::new();
    let mut rounds = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::Parse { line, msg };
        if rec.len() != headers.len() {
            return Err(err(format!("expected {} fields, found {}", headers.len(), rec.len())));
        }
        rec[0].parse::<u64>().map_err(|_| err(format!("bad round index `{}`", &rec[0])))?;
        let y = match &rec[1] {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("outcome `{other}` is not 0 or 1"))),
        };
        let mut preds = Vec::with_capacity(n);
        for field in rec.iter().skip(2) {
            let v: f64 = field.parse().map_err(|_| err(format!("bad prediction `{field}`")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(err(format!("prediction {v} outside [0, 1]")));
            }
            preds.push(v);
        }
        ys.push(y);
        rounds.push(preds);
    }
    let pool = (n > 0).then_some(TableExperts { n, rounds });
    Ok((ys, pool))
}

pub fn ingest_outcome_csv(path: &Path) -> Result<(Vec<usize>, Option<TableExperts>)> {
    parse_outcome_csv(fs::File::open(path)?)
}

pub fn write_outcome_csv<W: Write>(w: W, outcomes: &[usize], experts: Option<&TableExperts>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = experts.map_or(0, |e| e.n);
    let mut header = vec!["t".to_string(), "y".to_string()];
    header.extend((1..=n).map(|i| format!("e{i}")));
    out.write_record(&header)?;
    for (t, y) in outcomes.iter().enumerate() {
        let mut row = vec![(t + 1).to_string(), y.to_string()];
        if let Some(e) = experts {
            row.extend(e.rounds[t].iter().map(f64::to_string));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// SplitMix64 finalizer, used to derive stable per-cell seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Outcome seed for success probability `p`. Cells sharing `p` see the same
/// sequence, so substitution functions are compared on identical games.
pub fn outcome_seed(master: u64, p: f64) -> u64 {
    mix(master ^ mix(p.to_bits()))
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub etas: Vec<f64>,
    pub ps: Vec<f64>,
    pub settings: Vec<ExpertSetting>,
    pub substitutions: Vec<Substitution>,
    pub horizon: usize,
    pub seed: u64,
    pub loss: ProperLossSpec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            etas: vec![0.1, 0.3, 0.5],
            ps: vec![0.5, 0.7, 0.9, 1.0],
            settings: vec![ExpertSetting::Setting1, ExpertSetting::Setting2, ExpertSetting::Setting3],
            substitutions: Substitution::ALL.to_vec(),
            horizon: 100,
            seed: 42,
            loss: ProperLossSpec::binary(LossKind::SquareScalar),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub eta: f64,
    pub p: f64,
    pub setting: String,
    pub substitution: Substitution,
    pub n_experts: usize,
    pub final_regret: f64,
    pub final_loss: f64,
    pub bound: f64,
    pub file: String,
    pub trace: RegretTrace,
}

impl fmt::Display for SweepCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "eta={} p={} setting={} subst={}",
            self.eta, self.p, self.setting, self.substitution
        )
    }
}

fn cell_file(eta: f64, p: f64, setting: &str, s: Substitution) -> String {
    let tag = setting.replace(['/', '\\', '.'], "_");
    format!("cells/aa_{}_eta{eta}_p{p}_s{tag}.csv", s.name())
}

/// Runs every (η, p, setting, substitution) cell with the Aggregating
/// Algorithm. The weighted-average cells coincide with the Weighted Average
/// Algorithm. When `out_dir` is given, one trace per cell and `manifest.csv`
/// are written there.
pub fn sweep(config: &SweepConfig, out_dir: Option<&Path>) -> Result<Vec<SweepCell>> {
    let mut jobs = Vec::new();
    for &eta in &config.etas {
        for &p in &config.ps {
            for setting in &config.settings {
                for &s in &config.substitutions {
                    jobs.push((eta, p, setting.clone(), s));
                }
            }
        }
    }
    let run = |(eta, p, setting, s): &(f64, f64, ExpertSetting, Substitution)| -> Result<SweepCell> {
        let outcomes = generate_outcomes(&OutcomeSpec::Bernoulli {
            p: *p,
            horizon: config.horizon,
            seed: outcome_seed(config.seed, *p),
        })?;
        let pool = build_experts(setting, &outcomes)?;
        let mut game = GameConfig::new(GameLoss::Proper(config.loss.clone()), Algorithm::Aa, *s, *eta);
        game.seed = config.seed;
        let trace = run_game(&game, &pool, &outcomes)?;
        let label = setting.label();
        Ok(SweepCell {
            eta: *eta,
            p: *p,
            file: cell_file(*eta, *p, &label, *s),
            setting: label,
            substitution: *s,
            n_experts: pool.n,
            final_regret: trace.final_regret(),
            final_loss: trace.final_loss(),
            bound: trace.bound,
            trace,
        })
    };

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let chunk = jobs.len().div_ceil(workers).max(1);
    let mut cells = Vec::with_capacity(jobs.len());
    std::thread::scope(|scope| -> Result<()> {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(run).collect::<Result<Vec<_>>>()))
            .collect();
        for h in handles {
            cells.extend(h.join().expect("sweep worker panicked")?);
        }
        Ok(())
    })?;

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir.join("cells"))?;
        for c in &cells {
            c.trace.write_csv(fs::File::create(dir.join(&c.file))?)?;
        }
        write_manifest(fs::File::create(dir.join("manifest.csv"))?, &cells)?;
    }
    Ok(cells)
}

pub fn write_manifest<W: Write>(w: W, cells: &[SweepCell]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["file", "eta", "p", "setting", "substitution", "n_experts", "final_regret", "final_loss", "bound"])?;
    for c in cells {
        out.write_record([
            c.file.clone(),
            c.eta.to_string(),
            c.p.to_string(),
            c.setting.clone(),
            c.substitution.name().to_string(),
            c.n_experts.to_string(),
            c.final_regret.to_string(),
            c.final_loss.to_string(),
            c.bound.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Flat `key = value` configuration; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got `{line}`"),
        })?;
        let k = k.trim().trim_start_matches("--").replace('-', "_");
        if k.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}
