use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixlink::analysis::{
    beesack_envelope, check_prop5, check_prop6, check_theorem7, numeric_exp_concavity, numeric_mixability,
    Envelope, GridReport, ANALYTIC_TOL, GRID_STEP,
};
use mixlink::bregman::{blf_from_proper_loss, check_blf_mixability, check_lemma14_condition, kl_loss, lemma14_grid};
use mixlink::engine::{run_game, Algorithm, GameConfig, GameLoss, Substitution};
use mixlink::geometry::{build_cloud, build_surrogate, in_s_epsilon, ray_escape_witness, surrogate_loss};
use mixlink::harness::{
    build_experts, generate_outcomes, parse_config, sweep, ExpertSetting, OutcomeSpec, SweepConfig,
};
use mixlink::links::{link_by_name, CompositeLoss, LinkFunction};
use mixlink::losses::{catalog_loss, mixability_constant, mixability_grid_estimate, ProperLossSpec};
use mixlink::simplex::ProbVector;
use mixlink::{Error, Result};

#[derive(Parser)]
#[command(name = "mixlink", version, about = "Mixability, exp-concavity and expert-advice experiments")]
struct Cli {
    /// Flat key=value file supplying options not given on the command line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate catalog losses.
    #[command(subcommand)]
    Losses(LossesCmd),
    /// Mixability and exp-concavity checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Link functions.
    #[command(subcommand)]
    Link(LinkCmd),
    /// Play one expert-advice game and write its regret trace.
    Run(RunArgs),
    /// Run the learning-rate / expert-setting sweep.
    Sweep(SweepArgs),
    /// Exp-prediction clouds, ray witnesses and the surrogate loss.
    #[command(subcommand)]
    Geometry(GeometryCmd),
    /// Bregman losses.
    #[command(subcommand)]
    Bregman(BregmanCmd),
}

#[derive(Args, Clone)]
struct LossArgs {
    #[arg(long)]
    loss: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

impl LossArgs {
    fn spec(&self) -> Result<ProperLossSpec> {
        catalog_loss(&self.loss, self.n)?.scaled(self.scale)
    }
}

#[derive(Args, Clone)]
struct LinkArgs {
    #[command(flatten)]
    loss: LossArgs,
    #[arg(long, default_value = "identity")]
    link: String,
    /// Exponent of the geometric link.
    #[arg(long)]
    beta: Option<f64>,
}

impl LinkArgs {
    fn build(&self) -> Result<(ProperLossSpec, LinkFunction)> {
        let loss = self.loss.spec()?;
        let link = link_by_name(&self.link, &loss, self.beta)?;
        Ok((loss, link))
    }
}

#[derive(Subcommand)]
enum LossesCmd {
    /// Partial losses, Bayes risk and weight at a distribution.
    Eval {
        #[command(flatten)]
        loss: LossArgs,
        /// Comma-separated distribution.
        #[arg(long)]
        p: String,
    },
}

#[derive(Subcommand)]
enum CheckCmd {
    Mixability {
        #[command(flatten)]
        loss: LossArgs,
        /// Also run the numeric convexity test at this β.
        #[arg(long)]
        beta: Option<f64>,
    },
    Expconcavity {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        alpha: f64,
        /// Write per-point slacks here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    Prop6 {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    Thm7 {
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long)]
        alpha: f64,
        /// A constant, or `envelope` for the closed-form lower envelope.
        #[arg(long, default_value = "envelope", allow_hyphen_values = true)]
        a: String,
        #[arg(long, default_value = "envelope", allow_hyphen_values = true)]
        b: String,
    },
}

#[derive(Subcommand)]
enum LinkCmd {
    Eval {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        p: f64,
    },
    Invert {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        v: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "square_scalar")]
    loss: String,
    /// Optional link; predictions are then made in the link's range.
    #[arg(long)]
    link: Option<String>,
    #[arg(long, default_value = "aa")]
    algo: String,
    #[arg(long, default_value = "inverse_loss")]
    subst: String,
    #[arg(long)]
    eta: f64,
    /// 1, 2, 3 or a CSV file with expert columns.
    #[arg(long, default_value = "1")]
    experts: String,
    /// `bernoulli:<p>:<T>` or a CSV file.
    #[arg(long, default_value = "bernoulli:0.5:100")]
    outcomes: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the weighted average without an exp-concavity certificate.
    #[arg(long)]
    override_exp_concavity: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
}

#[derive(Subcommand)]
enum GeometryCmd {
    Cloud {
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 60)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Surrogate {
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 60)]
        m: usize,
        #[arg(long)]
        p: String,
    },
    Witness {
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 60)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BregmanCmd {
    Kl {
        #[arg(long)]
        y: String,
        #[arg(long)]
        v: String,
    },
    Check {
        #[arg(long)]
        loss: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        c_beta: f64,
    },
}

fn parse_vector(s: &str) -> Result<ProbVector> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad number `{x}`"))))
        .collect::<Result<_>>()?;
    ProbVector::new(v)
}

fn report(name: &str, r: &GridReport, csv: Option<&Path>) -> Result<()> {
    println!(
        "{name}: verdict={} min_slack={:.3e} witness={}",
        r.verdict,
        r.min_slack(),
        r.witness.map_or("none".into(), |w| w.to_string())
    );
    if let Some(s) = r.scale {
        println!("  normalized with scale {s}");
    }
    if r.necessary_only && r.verdict {
        println!("  necessary condition only; inconclusive");
    }
    if let Some(path) = csv {
        r.write_csv(fs::File::create(path)?)?;
    }
    Ok(())
}

fn envelope_or_const(s: &str, env: Envelope) -> Result<Envelope> {
    if s == "envelope" {
        return Ok(env);
    }
    let c: f64 = s.parse().map_err(|_| Error::InvalidArgument(format!("expected a number or `envelope`, got `{s}`")))?;
    Ok(Box::new(move |_| c))
}

fn outcome_spec(s: &str, seed: u64) -> Result<OutcomeSpec> {
    if let Some(rest) = s.strip_prefix("bernoulli:") {
        let (p, t) = rest
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument("expected bernoulli:<p>:<T>".into()))?;
        let p = p.parse().map_err(|_| Error::InvalidArgument(format!("bad probability `{p}`")))?;
        let horizon = t.parse().map_err(|_| Error::InvalidArgument(format!("bad horizon `{t}`")))?;
        return Ok(OutcomeSpec::Bernoulli { p, horizon, seed });
    }
    Ok(OutcomeSpec::File(s.into()))
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Losses(LossesCmd::Eval { loss, p }) => {
            let spec = loss.spec()?;
            let p = parse_vector(&p)?;
            let partials = spec.partial_loss(&p)?;
            println!("partial_losses={partials:?}");
            println!("bayes_risk={}", spec.bayes_risk(&p)?);
            if spec.n() == 2 && spec.is_strictly_proper() && p[0] > 0.0 && p[0] < 1.0 {
                println!("weight={}", spec.weight(p[0])?);
            }
        }
        Command::Check(CheckCmd::Mixability { loss, beta }) => {
            let spec = loss.spec()?;
            println!("mixability_constant={}", mixability_constant(&spec)?);
            if spec.n() == 2 {
                println!("grid_estimate={}", mixability_grid_estimate(&spec)?);
            }
            if let Some(b) = beta {
                report("numeric_mixability", &numeric_mixability(&spec, b, GRID_STEP)?, None)?;
            }
        }
        Command::Check(CheckCmd::Expconcavity { link, alpha, csv }) => {
            let (loss, l) = link.build()?;
            let analytic = check_prop5(&loss, &l, alpha, ANALYTIC_TOL)?;
            report("prop5", &analytic, csv.as_deref())?;
            let c = CompositeLoss::new(loss, l)?;
            report("numeric", &numeric_exp_concavity(&c, alpha, GRID_STEP)?, None)?;
        }
        Command::Check(CheckCmd::Prop6 { link, alpha, csv }) => {
            let (loss, l) = link.build()?;
            report("prop6", &check_prop6(&loss, &l, alpha)?, csv.as_deref())?;
        }
        Command::Check(CheckCmd::Thm7 { loss, alpha, a, b }) => {
            let spec = loss.spec()?;
            let (ea, eb) = beesack_envelope(alpha);
            let fa = envelope_or_const(&a, ea)?;
            let fb = envelope_or_const(&b, eb)?;
            let r = check_theorem7(&spec, &*fa, &*fb, alpha)?;
            report("thm7 inequalities", &r.inequalities, None)?;
            println!(
                "reconstruction_error={:.3e} reconstruction_ok={} verdict={}",
                r.max_reconstruction_error, r.reconstruction_ok, r.verdict
            );
        }
        Command::Link(LinkCmd::Eval { link, p }) => {
            let (_, l) = link.build()?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProb(format!("p = {p} outside [0, 1]")));
            }
            println!("value={}", l.forward(p));
            println!("derivative={}", l.derivative(p));
            println!("second_derivative={}", l.second_derivative(p));
        }
        Command::Link(LinkCmd::Invert { link, v }) => {
            let (_, l) = link.build()?;
            println!("p={}", l.invert(v)?);
        }
        Command::Run(args) => {
            let base = catalog_loss(&args.loss, 2)?;
            let loss = match &args.link {
                Some(name) => GameLoss::Composite(CompositeLoss::new(base.clone(), link_by_name(name, &base, None)?)?),
                None => GameLoss::Proper(base),
            };
            let algo: Algorithm = args.algo.parse()?;
            let subst: Substitution = args.subst.parse()?;
            let mut config = GameConfig::new(loss, algo, subst, args.eta);
            config.seed = args.seed;
            config.override_exp_concavity = args.override_exp_concavity;
            config.validate()?;
            let outcomes = generate_outcomes(&outcome_spec(&args.outcomes, args.seed)?)?;
            let setting: ExpertSetting = args.experts.parse()?;
            let pool = build_experts(&setting, &outcomes)?;
            let trace = run_game(&config, &pool, &outcomes)?;
            trace.write_csv(sink(&args.out)?)?;
            eprintln!(
                "final_regret={} bound={} rounds={}",
                trace.final_regret(),
                trace.bound,
                trace.records.len()
            );
        }
        Command::Sweep(args) => {
            let config = SweepConfig {
                seed: args.seed,
                horizon: args.horizon,
                ..SweepConfig::default()
            };
            let cells = sweep(&config, Some(&args.out_dir))?;
            let over = cells.iter().filter(|c| c.final_regret > c.bound + 1e-6).count();
            println!(
                "cells={} over_bound={} manifest={}",
                cells.len(),
                over,
                args.out_dir.join("manifest.csv").display()
            );
        }
        Command::Geometry(GeometryCmd::Cloud { loss, beta, m, out }) => {
            build_cloud(&loss.spec()?, beta, m)?.write_csv(sink(&out)?)?;
        }
        Command::Geometry(GeometryCmd::Surrogate { loss, beta, epsilon, m, p }) => {
            let spec = loss.spec()?;
            let model = build_surrogate(&spec, beta, epsilon, m)?;
            let p = parse_vector(&p)?;
            println!("surrogate={:?}", surrogate_loss(&model, &p)?);
            println!("loss={:?}", spec.partial_loss(&p)?);
            println!("in_s_epsilon={}", in_s_epsilon(&spec, beta, epsilon, &p)?);
            println!("hyperplanes={}", model.hyperplanes.len());
        }
        Command::Geometry(GeometryCmd::Witness { loss, beta, m, seed, out }) => {
            let cloud = build_cloud(&loss.spec()?, beta, m)?;
            match ray_escape_witness(&cloud, seed) {
                Some(w) => w.write_csv(sink(&out)?)?,
                None => println!("no escaping ray found"),
            }
        }
        Command::Bregman(BregmanCmd::Kl { y, v }) => {
            println!("{}", kl_loss(&parse_vector(&y)?, &parse_vector(&v)?)?);
        }
        Command::Bregman(BregmanCmd::Check { loss, beta, c_beta }) => {
            let pair = blf_from_proper_loss(&catalog_loss(&loss, 2)?)?;
            report("lemma14", &check_lemma14_condition(&pair, beta, c_beta, &lemma14_grid())?, None)?;
            println!("blf_mixability={}", check_blf_mixability(&pair, beta)?);
        }
    }
    Ok(())
}

/// Appends `--key value` for config entries not already on the command line.
fn merge_config(mut argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let path = match argv[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => argv.get(pos + 1).cloned().ok_or("--config needs a path")?,
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let map = parse_config(&text).map_err(|e| format!("{path}: {e}"))?;
    for (k, v) in map {
        let flag = format!("--{}", k.replace('_', "-"));
        if argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        match v.as_str() {
            "true" => argv.push(flag),
            "false" => {}
            _ => {
                argv.push(flag);
                argv.push(v);
            }
        }
    }
    Ok(argv)
}

fn main() -> ExitCode {
    let argv = match merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
