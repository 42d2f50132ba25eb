//! The `oracle` subcommand: brute-force comparisons on tiny instances and,
//! for continuous configs, the time-one cross-check.

use centerman_core::continuous::{compare_time_one, TimeOneComparison};
use centerman_core::oracle::{compare_tiny, OracleComparison};
use centerman_core::rds::TimeDomain;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::pipeline::{build_model, resolve_queries};
use crate::CliError;

pub const TINY_INSTANCES: u64 = 20;
pub const TINY_TOLERANCE: f64 = 1e-10;
const TINY_SOLVER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub tolerance: f64,
    pub max_difference: f64,
    pub tiny: Vec<OracleComparison>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub time_one: Vec<TimeOneComparison>,
    pub passed: bool,
}

impl OracleReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            4
        }
    }
}

/// Tiny instances for seeds `seed..seed + 20`; with a continuous config,
/// also every query against the time-one restriction.
pub fn run_oracle(seed: u64, config: Option<&ExperimentConfig>) -> Result<OracleReport, CliError> {
    let tiny: Vec<OracleComparison> = (seed..seed + TINY_INSTANCES)
        .map(|s| compare_tiny(s, TINY_SOLVER_TOL).map_err(|e| CliError::Config(format!("tiny instance {s}: {e}"))))
        .collect::<Result<_, _>>()?;
    let max_difference = tiny.iter().map(|c| c.difference).fold(0.0, f64::max);
    let mut time_one = Vec::new();
    if let Some(cfg) = config.filter(|c| c.domain() == TimeDomain::Continuous) {
        cfg.validate()?;
        let model = build_model(cfg).map_err(|e| CliError::Config(e.to_string()))?;
        let cont = cfg.solver.continuous()?;
        for q in resolve_queries(cfg, &model)? {
            let c = compare_time_one(&model, &q.omega, &q.xi, &cont, cont.horizon.round() as usize)
                .map_err(|e| CliError::Config(format!("time-one comparison at {}: {e}", q.omega)))?;
            time_one.push(c);
        }
    }
    let passed = max_difference <= TINY_TOLERANCE && time_one.iter().all(|c| c.passed);
    Ok(OracleReport { tolerance: TINY_TOLERANCE, max_difference, tiny, time_one, passed })
}
