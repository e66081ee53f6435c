use std::fs;
use std::process::{Command, Output};

fn mixlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixlink")).args(args).output().expect("spawn mixlink")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn losses_eval_prints_partials() {
    let o = mixlink(&["losses", "eval", "--loss", "log", "--p", "0.25,0.75"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("partial_losses=[1.386294361119"), "{s}");
    assert!(s.contains("bayes_risk="));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mixlink(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mixlink(&["run"]).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_two() {
    let o = mixlink(&["run", "--eta=-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = mixlink(&["losses", "eval", "--loss", "log", "--p", "0.6,0.6"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mixlink(&["losses", "eval", "--loss", "hinge", "--p", "0.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_outcome_file_exits_one() {
    let o = mixlink(&["run", "--eta", "0.5", "--outcomes", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_outcome_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "t,y\n1,1\n2,7\n").unwrap();
    let o = mixlink(&["run", "--eta", "0.5", "--outcomes", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn run_writes_trace_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = mixlink(&["run", "--eta", "0.5", "--experts", "3", "--outcomes", "bernoulli:0.7:50", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,outcome,prediction,loss,cum_loss,best_expert_cum,regret,bound"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 50);
    for r in rows {
        assert!(r[6] <= r[7] + 1e-9);
    }
}

#[test]
fn config_file_supplies_missing_options() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# game\neta = 0.5\nsubst = best_lookahead\noutcomes = bernoulli:1.0:10\n").unwrap();
    let via_config = mixlink(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(via_config.status.success(), "{}", String::from_utf8_lossy(&via_config.stderr));
    let direct = mixlink(&["run", "--eta", "0.5", "--subst", "best_lookahead", "--outcomes", "bernoulli:1.0:10"]);
    assert_eq!(stdout(&via_config), stdout(&direct));

    // the command line wins over the file
    let overridden = mixlink(&["run", "--config", cfg.to_str().unwrap(), "--eta", "0.1"]);
    let direct = mixlink(&["run", "--eta", "0.1", "--subst", "best_lookahead", "--outcomes", "bernoulli:1.0:10"]);
    assert_eq!(stdout(&overridden), stdout(&direct));
}

#[test]
fn sweep_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixlink(&["sweep", "--out-dir", dir.path().to_str().unwrap(), "--horizon", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 145);
    assert!(dir.path().join("cells/aa_inverse_loss_eta0.5_p0.7_s3.csv").exists());
}

#[test]
fn link_round_trip() {
    let o = mixlink(&["link", "eval", "--loss", "square_vector", "--link", "psi_star", "--p", "0.3"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let v = s.lines().find_map(|l| l.strip_prefix("value=")).unwrap();
    let o = mixlink(&["link", "invert", "--loss", "square_vector", "--link", "psi_star", "--v", v]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p: f64 = stdout(&o).trim().trim_start_matches("p=").parse().unwrap();
    assert!((p - 0.3).abs() < 1e-9);
}
