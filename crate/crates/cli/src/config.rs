//! The experiment file: one JSON document with a versioned schema key.

use std::path::{Path, PathBuf};

use centerman_core::continuous::ContinuousConfig;
use centerman_core::rates::RatesConfig;
use centerman_core::rds::{Shape, TimeDomain};
use centerman_core::solver::SolverConfig;
use centerman_core::zoo::SystemSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA: &str = "centerman/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub system: SystemSpec,
    /// Optional restatement of the system's time domain; must agree with it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_domain: Option<TimeDomain>,
    #[serde(default)]
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub hypotheses: HypothesesSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub rates: RatesSpec,
    #[serde(default)]
    pub queries: Vec<QuerySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_queries: Option<RandomQueries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// `f(ω, x) = budget_fraction · budget(ω) · shape(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub shape: Shape,
    pub budget_fraction: f64,
    /// Permit fractions above 1, which break the Lipschitz budget.
    pub over_budget: bool,
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        NonlinearitySpec { shape: Shape::ComponentwiseSine, budget_fraction: 1.0, over_budget: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesesSpec {
    /// Evaluate the corollary attached to the system; when off, only the
    /// structure and `σ + τ < 1/2` gate the run.
    pub check_corollary: bool,
    pub samples: usize,
    pub horizon: f64,
    pub structure_samples: usize,
}

impl Default for HypothesesSpec {
    fn default() -> Self {
        HypothesesSpec { check_corollary: true, samples: 24, horizon: 30.0, structure_samples: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    /// `H` in discrete time (an integer), `T` in continuous time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub check_quadrature: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = ContinuousConfig::default();
        SolverSpec { horizon: None, step: c.step, tol: c.tol, max_iter: c.max_iter, check_quadrature: c.check_quadrature }
    }
}

impl SolverSpec {
    pub fn discrete(&self) -> Result<SolverConfig, CliError> {
        let horizon = self.horizon.unwrap_or(SolverConfig::default().horizon as f64);
        if !(horizon >= 1.0 && horizon.fract() == 0.0 && horizon <= 1e6) {
            return Err(CliError::Config(format!("solver.horizon must be a positive integer in discrete time (got {horizon})")));
        }
        let cfg = SolverConfig { horizon: horizon as usize, tol: self.tol, max_iter: self.max_iter };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn continuous(&self) -> Result<ContinuousConfig, CliError> {
        let cfg = ContinuousConfig {
            horizon: self.horizon.unwrap_or(ContinuousConfig::default().horizon),
            step: self.step,
            tol: self.tol,
            max_iter: self.max_iter,
            check_quadrature: self.check_quadrature,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSpec {
    /// Defaults to 60 in discrete time and to the solver horizon otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Quadrature step in continuous time; defaults to the solver step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Sampled base points are `θ^t ω₀` with `|t|` up to this value.
    pub sample_time: f64,
}

impl Default for RatesSpec {
    fn default() -> Self {
        RatesSpec { horizon: None, step: None, samples: 20, seed: 3, sample_time: 5.0 }
    }
}

impl RatesSpec {
    pub fn config(&self, domain: TimeDomain, solver: &SolverSpec) -> Result<RatesConfig, CliError> {
        let (horizon, step) = match domain {
            TimeDomain::Discrete => (self.horizon.unwrap_or(60.0), 1.0),
            TimeDomain::Continuous => (
                self.horizon.unwrap_or(solver.horizon.unwrap_or(ContinuousConfig::default().horizon)),
                self.step.unwrap_or(solver.step),
            ),
        };
        if !(horizon.is_finite() && horizon >= 1.0) {
            return Err(CliError::Config(format!("rates.horizon must be at least 1 (got {horizon})")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(CliError::Config(format!("rates.step must be positive (got {step})")));
        }
        Ok(RatesConfig { horizon, step })
    }
}

/// One query point. `xi` holds coordinates in the center basis at `omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub omega: Vec<f64>,
    pub xi: Vec<f64>,
    /// Times `n` (discrete) or `t` (continuous) at which to verify.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Second center point for the growth and Lipschitz checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<Vec<f64>>,
}

/// Seeded random queries appended after the explicit ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomQueries {
    pub count: usize,
    pub seed: u64,
    /// Each base coordinate is drawn from `[−omega_range, omega_range]`.
    pub omega_range: f64,
    pub xi_range: f64,
    /// One verification time per query, drawn from `[−max_time, max_time]`.
    pub max_time: f64,
}

impl Default for RandomQueries {
    fn default() -> Self {
        RandomQueries { count: 10, seed: 11, omega_range: 3.0, xi_range: 2.0, max_time: 5.0 }
    }
}

/// A tensor grid over a box of center coordinates at one base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub omega: Vec<f64>,
    #[serde(rename = "box")]
    pub xi_box: Vec<[f64; 2]>,
    pub resolution: usize,
}

impl GridSpec {
    /// Grid points in lexicographic order, last coordinate fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axis = |[lo, hi]: [f64; 2]| -> Vec<f64> {
            match self.resolution {
                1 => vec![0.5 * (lo + hi)],
                r => (0..r).map(|i| lo + (hi - lo) * i as f64 / (r - 1) as f64).collect(),
            }
        };
        let mut points = vec![Vec::new()];
        for &b in &self.xi_box {
            let values = axis(b);
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn positive(name: &str, value: f64) -> Result<(), CliError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive (got {value})")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn domain(&self) -> TimeDomain {
        self.system.time_domain()
    }

    /// Checks that do not need the model; dimensions are checked once it
    /// is built.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("unsupported schema `{}` (expected `{SCHEMA}`)", self.schema)));
        }
        let domain = self.domain();
        if let Some(td) = self.time_domain {
            if td != domain {
                return Err(CliError::Config(format!("time_domain {td:?} disagrees with system, which runs in {domain:?} time")));
            }
        }
        let nl = &self.nonlinearity;
        if !(nl.budget_fraction.is_finite() && nl.budget_fraction >= 0.0) {
            return Err(CliError::Config(format!("nonlinearity.budget_fraction must be nonnegative (got {})", nl.budget_fraction)));
        }
        if nl.budget_fraction > 1.0 && !nl.over_budget {
            return Err(CliError::Config(format!(
                "nonlinearity.budget_fraction {} exceeds 1; set over_budget to allow it",
                nl.budget_fraction
            )));
        }
        let h = &self.hypotheses;
        if h.samples == 0 || h.structure_samples == 0 {
            return Err(CliError::Config("hypotheses.samples and structure_samples must be positive".into()));
        }
        if !(h.horizon >= 10.0) {
            return Err(CliError::Config(format!("hypotheses.horizon must be at least 10 (got {})", h.horizon)));
        }
        match domain {
            TimeDomain::Discrete => drop(self.solver.discrete()?),
            TimeDomain::Continuous => drop(self.solver.continuous()?),
        }
        self.rates.config(domain, &self.solver)?;
        if self.rates.samples == 0 {
            return Err(CliError::Config("rates.samples must be positive".into()));
        }
        positive("rates.sample_time", self.rates.sample_time)?;
        for (i, q) in self.queries.iter().enumerate() {
            for &t in &q.times {
                if !t.is_finite() || (domain == TimeDomain::Discrete && t.fract() != 0.0) {
                    return Err(CliError::Config(format!("queries[{i}]: time {t} is not valid in {domain:?} time")));
                }
            }
            if q.omega.iter().chain(&q.xi).chain(q.pair.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(CliError::Config(format!("queries[{i}]: coordinates must be finite")));
            }
        }
        if let Some(r) = &self.random_queries {
            positive("random_queries.omega_range", r.omega_range)?;
            positive("random_queries.xi_range", r.xi_range)?;
            if !(r.max_time.is_finite() && r.max_time >= 0.0) {
                return Err(CliError::Config("random_queries.max_time must be nonnegative".into()));
            }
        }
        if let Some(g) = &self.grid {
            if g.resolution == 0 {
                return Err(CliError::Config("grid.resolution must be positive".into()));
            }
            if g.xi_box.iter().any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                return Err(CliError::Config("grid.box entries must be finite [lo, hi] with lo <= hi".into()));
            }
        }
        Ok(())
    }

    /// Reseeds every random draw from one seed.
    pub fn reseed(&mut self, seed: u64) {
        self.rates.seed = seed;
        if let Some(r) = &mut self.random_queries {
            r.seed = seed;
        }
    }
}
