use std::path::{Path, PathBuf};
use std::process::ExitCode;

use centerman_cli::oracle::run_oracle;
use centerman_cli::output::{emit, to_csv, to_json};
use centerman_cli::pipeline::query_samples;
use centerman_cli::{run, sample_manifold, CliError, ExperimentConfig, Format, RunOptions, RunReport, Stage};
use clap::{Args, Parser, Subcommand};

/// Center manifolds of random dynamical systems with generalized trichotomies.
#[derive(Debug, Parser)]
#[command(name = "centerman", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment file (JSON, schema `centerman/v1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to `output.path` in the config, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for queries and grid points.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Add wall-clock timings to the report (breaks bit-identical output).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the structure and the corollary hypotheses.
    Check,
    /// Estimate sigma and tau and derive the contraction constants.
    Rates,
    /// Solve every query for phi.
    Solve,
    /// Solve and verify invariance, growth, contraction and the Lipschitz bound.
    Verify,
    /// Sample the manifold graph over the configured grid.
    Sample,
    /// Compare the solver against brute-force references.
    Oracle,
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let path = common.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.reseed(seed);
    }
    Ok(cfg)
}

fn out_path<'a>(common: &'a Common, cfg: Option<&'a ExperimentConfig>) -> Option<&'a Path> {
    common.out.as_deref().or_else(|| cfg.and_then(|c| c.output.path.as_deref()))
}

fn format(common: &Common, cfg: &ExperimentConfig) -> Format {
    common.format.unwrap_or(cfg.output.format)
}

fn finish_run(report: &RunReport, text: String, path: Option<&Path>) -> Result<i32, CliError> {
    emit(&text, path)?;
    if report.exit_code != 0 {
        eprintln!("centerman: {}", report.summary());
    }
    Ok(report.exit_code)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let common = &cli.common;
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    }
    let options = RunOptions { timings: common.timings };
    let stage = match cli.command {
        Command::Check => Stage::Check,
        Command::Rates => Stage::Rates,
        Command::Solve => Stage::Solve,
        Command::Verify => Stage::Verify,
        Command::Sample => {
            let cfg = load(common)?;
            let report = sample_manifold(&cfg, options)?;
            let text = match (format(common, &cfg), &report.samples) {
                (Format::Csv, Some(samples)) => to_csv(samples),
                _ => to_json(&report)?,
            };
            return finish_run(&report, text, out_path(common, Some(&cfg)));
        }
        Command::Oracle => {
            let cfg = common.config.as_ref().map(|_| load(common)).transpose()?;
            if common.format == Some(Format::Csv) {
                return Err(CliError::Config("`oracle` writes JSON only".into()));
            }
            let report = run_oracle(common.seed.unwrap_or(0), cfg.as_ref())?;
            emit(&to_json(&report)?, out_path(common, cfg.as_ref()))?;
            if !report.passed {
                eprintln!("centerman: oracle mismatch (max difference {:e})", report.max_difference);
            }
            return Ok(report.exit_code());
        }
    };
    let cfg = load(common)?;
    let text_format = format(common, &cfg);
    if text_format == Format::Csv && stage < Stage::Solve {
        return Err(CliError::Config("CSV output needs `solve`, `verify` or `sample`".into()));
    }
    let report = run(&cfg, stage, options)?;
    let text = match text_format {
        Format::Csv if report.exit_code == 0 => to_csv(&query_samples(&report).expect("model info present after a solve")),
        _ => to_json(&report)?,
    };
    finish_run(&report, text, out_path(common, Some(&cfg)))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CENTERMAN_LOG", "warn")).init();
    // clap would exit with 2, which is reserved for solver failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(centerman_cli::EXIT_CONFIG as u8);
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("centerman: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
