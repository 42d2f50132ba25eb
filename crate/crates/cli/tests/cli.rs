use std::path::PathBuf;
use std::process::{Command, Output};

use centerman_cli::pipeline::Solver;
use centerman_cli::{run, run_prepared, sample_manifold, ExperimentConfig, RunOptions, Stage, Status};
use centerman_core::rds::OmegaPoint;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(format!("{name}.json"))).unwrap()
}

fn centerman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_centerman")).args(args).output().unwrap()
}

fn with_config(text: &str, args: &[&str]) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, text).unwrap();
    let mut all = args.to_vec();
    all.extend(["--config", path.to_str().unwrap()]);
    centerman(&all)
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn shipped_configs_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 10);
}

#[test]
fn r4_grid_rows_respect_the_lipschitz_bound() {
    let cfg = config("r4-grid");
    let out = centerman(&["sample", "--config", configs_dir().join("r4-grid.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&String::from_utf8(out.stdout).unwrap());
    // ω is a real, E^c is a plane, d = 4, plus the error column.
    assert_eq!(header.len(), 1 + 2 + 4 + 1);
    assert_eq!(rows.len(), 121);
    assert!(rows.iter().all(|r| r.len() == header.len()));

    let (_, prepared) = run_prepared(&cfg, Stage::Rates, RunOptions::default()).unwrap();
    let solver = prepared.unwrap().solver;
    let model = solver.model();
    let n_const = solver.constants().n_const;
    let norm = model.norm();
    let omega = OmegaPoint::new(vec![rows[0][0]]);
    let lifted: Vec<_> = rows.iter().map(|r| model.lift_center(&omega, &r[1..3]).unwrap()).collect();
    let phis: Vec<_> = rows.iter().map(|r| nalgebra::DVector::from_row_slice(&r[3..7])).collect();
    let mut worst = 0.0f64;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let lhs = norm.distance(&phis[i], &phis[j]);
            let rhs = n_const * norm.distance(&lifted[i], &lifted[j]) + rows[i][7] + rows[j][7];
            assert!(lhs <= rhs, "rows {i}, {j}: {lhs:e} > {rhs:e}");
            worst = worst.max(lhs / rhs);
        }
    }
    assert!(worst > 0.0);
}

#[test]
fn zero_f_grid_is_flat() {
    let report = sample_manifold(&config("zero-f"), RunOptions::default()).unwrap();
    let samples = report.samples.unwrap();
    assert_eq!(samples.columns.len(), 1 + 1 + 3 + 1);
    for row in &samples.rows {
        assert!(row[2..5].iter().all(|&v| v == 0.0), "{row:?}");
    }
}

#[test]
fn zero_xi_row_has_zero_phi() {
    let mut cfg = config("r4-grid");
    cfg.grid.as_mut().unwrap().resolution = 3;
    let samples = sample_manifold(&cfg, RunOptions::default()).unwrap().samples.unwrap();
    let origin = samples.rows.iter().find(|r| r[1] == 0.0 && r[2] == 0.0).unwrap();
    assert!(origin[3..7].iter().all(|&v| v == 0.0), "{origin:?}");
}

#[test]
fn budget_fraction_zero_reports_zero_rates_and_defects() {
    let report = run(&config("zero-f"), Stage::Verify, RunOptions::default()).unwrap();
    assert_eq!(report.status, Status::Ok);
    let rates = report.rates.unwrap();
    assert_eq!((rates.sigma, rates.tau), (0.0, 0.0));
    for q in &report.queries {
        assert!(q.invariance.iter().all(|i| i.defect == 0.0));
        assert!(q.phi.as_ref().unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn solve_csv_has_one_row_per_query() {
    let path = configs_dir().join("r4-psi-disc.json");
    let out = centerman(&["solve", "--config", path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = parse_csv(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.len() == header.len()));
}

#[test]
fn check_stops_before_the_rates() {
    let report = run(&config("tempered-disc"), Stage::Check, RunOptions::default()).unwrap();
    assert_eq!(report.status, Status::Ok);
    assert!(report.hypotheses.as_ref().unwrap().passed);
    assert!(report.rates.is_none() && report.queries.is_empty());
}

#[test]
fn output_goes_to_the_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let cfg = configs_dir().join("zero-f.json");
    let out = centerman(&["rates", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["constants"]["sigma"], 0.0);
    assert_eq!(report["tool"]["name"], "centerman");
}

#[test]
fn seed_flag_reaches_the_config_echo() {
    let cfg = configs_dir().join("zero-f.json");
    let out = centerman(&["rates", "--config", cfg.to_str().unwrap(), "--seed", "99"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["rates"]["seed"], 99);
}

#[test]
fn timings_only_on_request() {
    let cfg = configs_dir().join("zero-f.json");
    let plain: serde_json::Value = serde_json::from_slice(&centerman(&["rates", "--config", cfg.to_str().unwrap()]).stdout).unwrap();
    assert!(plain.get("timings").is_none());
    let timed = centerman(&["rates", "--config", cfg.to_str().unwrap(), "--timings"]);
    let timed: serde_json::Value = serde_json::from_slice(&timed.stdout).unwrap();
    assert!(timed["timings"]["rates_ms"].as_f64().unwrap() >= 0.0);
}

const BASE: &str = r#""schema": "centerman/v1", "system": {"name": "tempered-disc", "params": {}}"#;

#[test]
fn config_errors_exit_with_three() {
    let cases = [
        ("{ not json".to_owned(), "check"),
        (r#"{"schema": "centerman/v2", "system": {"name": "tempered-disc", "params": {}}}"#.to_owned(), "check"),
        (r#"{"schema": "centerman/v1", "system": {"name": "no-such-model", "params": {}}}"#.to_owned(), "check"),
        (format!(r#"{{{BASE}, "time_domain": "continuous"}}"#), "check"),
        (format!(r#"{{{BASE}, "solver": {{"horizon": 2.5}}}}"#), "check"),
        (format!(r#"{{{BASE}, "nonlinearity": {{"budget_fraction": 2.0}}}}"#), "check"),
        (format!(r#"{{{BASE}, "queries": [{{"omega": [0.0], "xi": [1.0, 2.0]}}]}}"#), "check"),
        (format!(r#"{{{BASE}, "queries": [{{"omega": [0.0], "xi": [1.0], "times": [41]}}]}}"#), "check"),
        (format!(r#"{{{BASE}, "unknown_section": 1}}"#), "check"),
        (format!(r#"{{{BASE}}}"#), "sample"),
    ];
    for (text, cmd) in &cases {
        let out = with_config(text, &[cmd]);
        assert_eq!(out.status.code(), Some(3), "{text}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(centerman(&["check"]).status.code(), Some(3));
    assert_eq!(centerman(&["verify", "--bogus"]).status.code(), Some(3));
    assert_eq!(with_config(&format!("{{{BASE}}}"), &["check", "--format", "csv"]).status.code(), Some(3));
}

#[test]
fn nonconvergence_exits_with_two() {
    let text = format!(r#"{{{BASE}, "solver": {{"max_iter": 1}}, "queries": [{{"omega": [0.0], "xi": [1.0]}}]}}"#);
    let out = with_config(&text, &["solve"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
}

#[test]
fn polynomial_example_fails_its_ordering() {
    // The rate ordering of the polynomial example changes sign with |x|.
    let text = r#"{"schema": "centerman/v1", "system": {"name": "polynomial-disc", "params": {}}}"#;
    let out = with_config(text, &["check"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_subcommand_passes() {
    let out = centerman(&["oracle", "--seed", "40"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["tiny"].as_array().unwrap().len(), 20);
}

#[test]
fn parallel_and_serial_runs_agree() {
    let cfg = config("r4-psi-disc");
    let a = serde_json::to_string(&run(&cfg, Stage::Verify, RunOptions::default()).unwrap()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| serde_json::to_string(&run(&cfg, Stage::Verify, RunOptions::default()).unwrap()).unwrap());
    assert_eq!(a, b);
}

#[test]
fn continuous_configs_verify() {
    for name in ["tempered-cont", "r4-psi-cont"] {
        let report = run(&config(name), Stage::Verify, RunOptions::default()).unwrap();
        assert_eq!(report.status, Status::Ok, "{name}: {}", report.summary());
        assert!(report.queries.iter().all(|q| !q.theorem.is_empty()));
        assert!(matches!(
            run_prepared(&config(name), Stage::Rates, RunOptions::default()).unwrap().1.unwrap().solver,
            Solver::Continuous(_)
        ));
    }
}
