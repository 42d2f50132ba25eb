//! check → rates → constants → solve → verify, stopping at the first stage
//! that fails.

use std::time::Instant;

use centerman_core::continuous::{verify_theorem_continuous, ContinuousGraphSolution, ContinuousTheoremReport};
use centerman_core::rates::{check_corollary, estimate_rates, solve_mn, ContractionConstants, HypothesisReport, RateEstimate};
use centerman_core::rds::{validate_structure, Model, OmegaPoint, SampleSet, TimeDomain, ValidationReport};
use centerman_core::solver::{
    contraction_diagnostic, verify_growth_bound, verify_invariance, verify_phi_lipschitz, ContractionReport, GraphSolution,
    GrowthReport, InvarianceReport, LipschitzReport, SolveReport,
};
use centerman_core::zoo::{with_admissible_f, with_budget_multiple};
use centerman_core::Error;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// How far a run goes; each stage includes the ones before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Check,
    Rates,
    Solve,
    Verify,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Include wall-clock timings; they make the report nondeterministic.
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    HypothesisFailure,
    SolverFailure,
    VerificationFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::HypothesisFailure => 1,
            Status::SolverFailure => 2,
            Status::VerificationFailure => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub inequality: String,
    /// `rhs − lhs` at the worst sample, when one was measured.
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub time_domain: TimeDomain,
    pub dim: usize,
    pub center_dim: usize,
    pub omega_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub check_ms: f64,
    pub rates_ms: f64,
    pub solve_ms: f64,
    pub verify_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryReport {
    pub omega: OmegaPoint,
    pub xi_coords: Vec<f64>,
    pub xi: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub invariance: Vec<InvarianceReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub growth: Vec<GrowthReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub theorem: Vec<ContinuousTheoremReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionReport>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Grid or query rows: base coordinates, center coordinates, `φ` and its
/// error bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Samples {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub stage: Stage,
    pub status: Status,
    pub exit_code: i32,
    pub model: Option<ModelInfo>,
    pub gate: GateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<RateEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ContractionConstants>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<QueryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Samples>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    pub config: ExperimentConfig,
}

impl RunReport {
    fn new(stage: Stage, config: ExperimentConfig) -> Self {
        RunReport {
            tool: ToolInfo { name: "centerman", version: env!("CARGO_PKG_VERSION") },
            stage,
            status: Status::Ok,
            exit_code: 0,
            model: None,
            gate: GateReport { passed: true, violations: Vec::new(), warnings: Vec::new() },
            structure: None,
            hypotheses: None,
            rates: None,
            constants: None,
            queries: Vec::new(),
            lipschitz: None,
            samples: None,
            timings: None,
            config,
        }
    }

    fn set_status(&mut self, status: Status) {
        // The first failure wins.
        if self.status == Status::Ok {
            self.status = status;
            self.exit_code = status.exit_code();
        }
    }

    fn violate(&mut self, v: Violation) {
        self.gate.passed = false;
        self.gate.violations.push(v);
        self.set_status(Status::HypothesisFailure);
    }

    /// One line naming what went wrong, for stderr.
    pub fn summary(&self) -> String {
        match self.status {
            Status::Ok => "ok".into(),
            Status::HypothesisFailure => {
                let names: Vec<String> = self
                    .gate
                    .violations
                    .iter()
                    .map(|v| match v.margin {
                        Some(m) => format!("{} (margin {m:e})", v.inequality),
                        None => v.inequality.clone(),
                    })
                    .collect();
                format!("hypothesis failure: {}", names.join("; "))
            }
            Status::SolverFailure => {
                let first = self.queries.iter().find_map(|q| q.error.as_deref()).unwrap_or("unknown");
                format!("solver failure: {first}")
            }
            Status::VerificationFailure => {
                let bad = self.queries.iter().filter(|q| !q.passed).count();
                let lip = self.lipschitz.as_ref().is_some_and(|l| !l.passed);
                format!("verification failure: {bad} queries failed{}", if lip { "; Lipschitz bound failed" } else { "" })
            }
        }
    }
}

/// `(φ_ω(ξ), its error bound, the solve report)`.
pub type PhiSolve = (DVector<f64>, f64, SolveReport);

/// A query with `ξ` lifted into the fiber.
#[derive(Debug, Clone)]
pub struct Query {
    pub omega: OmegaPoint,
    pub coords: Vec<f64>,
    pub xi: DVector<f64>,
    pub times: Vec<f64>,
    pub pair: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub enum Solver {
    Discrete(GraphSolution),
    Continuous(ContinuousGraphSolution),
}

impl Solver {
    pub fn model(&self) -> &Model {
        match self {
            Solver::Discrete(s) => &s.model,
            Solver::Continuous(s) => &s.model,
        }
    }

    pub fn constants(&self) -> &ContractionConstants {
        match self {
            Solver::Discrete(s) => &s.constants,
            Solver::Continuous(s) => &s.constants,
        }
    }

    pub fn phi(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<PhiSolve, Error> {
        Ok(match self {
            Solver::Discrete(s) => {
                let p = s.solve(omega, xi)?;
                let e = p.phi_error();
                (p.phi, e, p.report)
            }
            Solver::Continuous(s) => {
                let p = s.solve(omega, xi)?;
                let e = p.phi_error();
                (p.phi, e, p.report)
            }
        })
    }
}

/// Builds the configured system with its nonlinearity attached.
pub fn build_model(config: &ExperimentConfig) -> Result<Model, Error> {
    let model = config.system.build()?;
    let nl = &config.nonlinearity;
    if nl.budget_fraction <= 1.0 {
        with_admissible_f(model, nl.shape, nl.budget_fraction)
    } else {
        with_budget_multiple(model, nl.shape, nl.budget_fraction)
    }
}

fn dims_match(what: &str, expected: usize, actual: usize) -> Result<(), CliError> {
    if expected == actual {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} has {actual} coordinates, expected {expected}")))
    }
}

fn solver_horizon(config: &ExperimentConfig) -> Result<f64, CliError> {
    Ok(match config.domain() {
        TimeDomain::Discrete => config.solver.discrete()?.horizon as f64,
        TimeDomain::Continuous => config.solver.continuous()?.horizon,
    })
}

/// Explicit queries followed by the seeded random ones, lifted into the
/// center fibers of `model`.
pub fn resolve_queries(config: &ExperimentConfig, model: &Model) -> Result<Vec<Query>, CliError> {
    let k = model.cocycle.center_dim();
    let wdim = model.driving.coord_dim();
    let horizon = solver_horizon(config)?;
    let lift = |omega: &OmegaPoint, coords: &[f64]| {
        model.lift_center(omega, coords).map_err(|e| CliError::Config(e.to_string()))
    };
    let mut out = Vec::new();
    for (i, q) in config.queries.iter().enumerate() {
        dims_match(&format!("queries[{i}].omega"), wdim, q.omega.len())?;
        dims_match(&format!("queries[{i}].xi"), k, q.xi.len())?;
        if let Some(p) = &q.pair {
            dims_match(&format!("queries[{i}].pair"), k, p.len())?;
        }
        if let Some(t) = q.times.iter().find(|t| t.abs() > horizon) {
            return Err(CliError::Config(format!("queries[{i}]: |time| {} exceeds the solver horizon {horizon}", t.abs())));
        }
        let omega = OmegaPoint::new(q.omega.clone());
        let xi = lift(&omega, &q.xi)?;
        let pair = q.pair.as_deref().map(|p| lift(&omega, p)).transpose()?;
        out.push(Query { omega, coords: q.xi.clone(), xi, times: q.times.clone(), pair });
    }
    if let Some(r) = &config.random_queries {
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        let max_time = r.max_time.min(horizon);
        for _ in 0..r.count {
            let omega = OmegaPoint::new((0..wdim).map(|_| rng.random_range(-r.omega_range..=r.omega_range)).collect::<Vec<_>>());
            let coords: Vec<f64> = (0..k).map(|_| rng.random_range(-r.xi_range..=r.xi_range)).collect();
            let pair: Vec<f64> = (0..k).map(|_| rng.random_range(-r.xi_range..=r.xi_range)).collect();
            let t = rng.random_range(-max_time..=max_time);
            let t = match config.domain() {
                TimeDomain::Discrete => t.round(),
                // Snap to the solver grid so the verification needs no interpolation.
                TimeDomain::Continuous => (t / config.solver.step).round() * config.solver.step,
            };
            let xi = lift(&omega, &coords)?;
            let pair = Some(lift(&omega, &pair)?);
            out.push(Query { omega, coords, xi, times: vec![t], pair });
        }
    }
    Ok(out)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Everything a run needs once the gate has passed.
pub struct Prepared {
    pub solver: Solver,
    pub queries: Vec<Query>,
}

/// Runs the pipeline up to `stage`.
pub fn run(config: &ExperimentConfig, stage: Stage, options: RunOptions) -> Result<RunReport, CliError> {
    Ok(run_prepared(config, stage, options)?.0)
}

/// Like [`run`], also handing back the solver when the gate passed.
pub fn run_prepared(
    config: &ExperimentConfig,
    stage: Stage,
    options: RunOptions,
) -> Result<(RunReport, Option<Prepared>), CliError> {
    config.validate()?;
    let mut report = RunReport::new(stage, config.clone());
    let mut timings = Timings { check_ms: 0.0, rates_ms: 0.0, solve_ms: 0.0, verify_ms: 0.0 };
    let finish = |mut report: RunReport, timings: Timings, prepared: Option<Prepared>| {
        if options.timings {
            report.timings = Some(timings);
        }
        Ok((report, prepared))
    };

    let start = Instant::now();
    let model = match build_model(config) {
        Ok(m) => m,
        Err(Error::Precondition { inequality, margin }) => {
            report.violate(Violation { inequality, margin: Some(margin), detail: None });
            return finish(report, timings, None);
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    report.model = Some(ModelInfo {
        name: model.name.clone(),
        time_domain: model.time_domain(),
        dim: model.dim(),
        center_dim: model.cocycle.center_dim(),
        omega_dim: model.driving.coord_dim(),
    });
    let queries = resolve_queries(config, &model)?;
    gate_structure(config, &model, &mut report)?;
    timings.check_ms = elapsed_ms(start);
    if !report.gate.passed || stage == Stage::Check {
        return finish(report, timings, None);
    }

    let start = Instant::now();
    let constants = gate_rates(config, &model, &queries, &mut report)?;
    timings.rates_ms = elapsed_ms(start);
    let Some(constants) = constants else {
        return finish(report, timings, None);
    };
    let solver = match config.domain() {
        TimeDomain::Discrete => GraphSolution::new(model, constants, config.solver.discrete()?).map(Solver::Discrete),
        TimeDomain::Continuous => {
            ContinuousGraphSolution::new(model, constants, config.solver.continuous()?).map(Solver::Continuous)
        }
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let prepared = Prepared { solver, queries };
    if stage == Stage::Rates {
        return finish(report, timings, Some(prepared));
    }

    let start = Instant::now();
    report.queries = prepared.queries.par_iter().map(|q| solve_query(&prepared.solver, q)).collect();
    timings.solve_ms = elapsed_ms(start);
    if report.queries.iter().any(|q| q.error.is_some()) {
        report.set_status(Status::SolverFailure);
    }
    if stage == Stage::Solve || report.status != Status::Ok {
        return finish(report, timings, Some(prepared));
    }

    let start = Instant::now();
    let verified: Vec<Result<QueryReport, Error>> = prepared
        .queries
        .par_iter()
        .zip(std::mem::take(&mut report.queries).into_par_iter())
        .map(|(q, r)| verify_query(&prepared.solver, q, r))
        .collect();
    for v in verified {
        match v {
            Ok(r) => report.queries.push(r),
            Err(e) => return Err(CliError::Config(format!("verification could not run: {e}"))),
        }
    }
    report.lipschitz = lipschitz(&prepared.solver, &prepared.queries).map_err(|e| CliError::Config(e.to_string()))?;
    timings.verify_ms = elapsed_ms(start);
    if report.queries.iter().any(|q| !q.passed) || report.lipschitz.as_ref().is_some_and(|l| !l.passed) {
        report.set_status(Status::VerificationFailure);
    }
    finish(report, timings, Some(prepared))
}

fn gate_structure(config: &ExperimentConfig, model: &Model, report: &mut RunReport) -> Result<(), CliError> {
    let h = &config.hypotheses;
    let seed = config.rates.seed;
    let samples = SampleSet::generate(model.driving.as_ref(), h.structure_samples, config.rates.sample_time, seed);
    let structure = validate_structure(model, &samples);
    for c in structure.checks.iter().filter(|c| !c.passed) {
        report.violate(Violation {
            inequality: format!("structure: {} <= {:e}", c.name, c.tolerance),
            margin: Some(c.tolerance - c.worst),
            detail: c.worst_at.clone(),
        });
    }
    report.structure = Some(structure);
    if !h.check_corollary {
        report.gate.warnings.push("corollary check disabled; only sigma + tau < 1/2 gates the run".into());
        return Ok(());
    }
    let Some(data) = model.hypotheses.as_ref() else {
        return Err(CliError::Config(format!("model `{}` carries no corollary data", model.name)));
    };
    let omegas = SampleSet::generate(model.driving.as_ref(), h.samples, config.rates.sample_time, seed.wrapping_add(1)).omegas;
    match check_corollary(model, data.tag, &omegas, h.horizon) {
        Ok(hyp) => {
            for m in hyp.violated() {
                report.violate(Violation { inequality: m.name.clone(), margin: Some(m.value), detail: None });
            }
            report.hypotheses = Some(hyp);
        }
        Err(e @ Error::Divergence { .. }) => report.violate(Violation {
            inequality: format!("{} hypotheses evaluable", data.tag.as_str()),
            margin: None,
            detail: Some(e.to_string()),
        }),
        Err(e) => return Err(CliError::Config(e.to_string())),
    }
    Ok(())
}

fn gate_rates(
    config: &ExperimentConfig,
    model: &Model,
    queries: &[Query],
    report: &mut RunReport,
) -> Result<Option<ContractionConstants>, CliError> {
    const SMALLNESS: &str = "sigma + tau < 1/2";
    let cfg = config.rates.config(config.domain(), &config.solver)?;
    let mut omegas =
        SampleSet::generate(model.driving.as_ref(), config.rates.samples, config.rates.sample_time, config.rates.seed).omegas;
    omegas.extend(queries.iter().map(|q| q.omega.clone()));
    let est = match estimate_rates(model, &omegas, &cfg) {
        Ok(est) => est,
        Err(e @ Error::Divergence { .. }) => {
            report.violate(Violation { inequality: SMALLNESS.into(), margin: None, detail: Some(e.to_string()) });
            return Ok(None);
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    if !est.certified {
        report.gate.warnings.push("tau tails are heuristic; sigma + tau is not certified".into());
    }
    let (mut sigma, mut tau) = (est.sigma + est.sigma_tail, est.tau + est.tau_tail);
    if !est.certified && sigma + tau >= 0.5 && est.sigma + est.tau < 0.5 {
        // Only the heuristic tails push the sum over; that is a warning, not a failure.
        report.gate.warnings.push(format!(
            "sigma + tau is {:e} below 1/2 without the heuristic tails and {:e} with them",
            0.5 - est.sigma - est.tau,
            0.5 - sigma - tau
        ));
        (sigma, tau) = (est.sigma, est.tau);
    }
    report.rates = Some(est);
    match solve_mn(sigma, tau) {
        Ok(c) => {
            report.constants = Some(c);
            Ok(Some(c))
        }
        Err(Error::SmallnessViolated(total)) => {
            report.violate(Violation {
                inequality: SMALLNESS.into(),
                margin: Some(0.5 - total),
                detail: Some("sigma and tau include their truncation tails".into()),
            });
            Ok(None)
        }
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}

fn empty_query(q: &Query) -> QueryReport {
    QueryReport {
        omega: q.omega.clone(),
        xi_coords: q.coords.clone(),
        xi: q.xi.iter().copied().collect(),
        phi: None,
        phi_error: None,
        solve: None,
        invariance: Vec::new(),
        growth: Vec::new(),
        theorem: Vec::new(),
        contraction: None,
        passed: false,
        error: None,
    }
}

fn solve_query(solver: &Solver, q: &Query) -> QueryReport {
    let mut r = empty_query(q);
    match solver.phi(&q.omega, &q.xi) {
        Ok((phi, err, rep)) => {
            r.phi = Some(phi.iter().copied().collect());
            r.phi_error = Some(err);
            r.solve = Some(rep);
            r.passed = true;
        }
        Err(e) => r.error = Some(e.to_string()),
    }
    r
}

fn verify_query(solver: &Solver, q: &Query, mut r: QueryReport) -> Result<QueryReport, Error> {
    match solver {
        Solver::Discrete(s) => {
            let p = s.solve(&q.omega, &q.xi)?;
            for &t in &q.times {
                let n = t as i64;
                r.invariance.push(verify_invariance(s, &p, n, 0.0)?);
                if let Some(xi2) = &q.pair {
                    r.growth.push(verify_growth_bound(s, &q.omega, &q.xi, xi2, n)?);
                }
            }
            r.contraction = Some(contraction_diagnostic(s, &q.omega, &q.xi)?);
        }
        Solver::Continuous(s) => {
            let p = s.solve(&q.omega, &q.xi)?;
            let xi2 = q.pair.as_ref().unwrap_or(&q.xi);
            for &t in &q.times {
                r.theorem.push(verify_theorem_continuous(s, &p, xi2, t)?);
            }
            r.contraction = Some(s.contraction_diagnostic(&q.omega, &q.xi)?);
        }
    }
    r.passed = r.invariance.iter().all(|i| i.passed)
        && r.growth.iter().all(|g| g.passed())
        && r.theorem.iter().all(|t| t.passed)
        && r.contraction.as_ref().is_none_or(|c| c.passed);
    Ok(r)
}

/// `‖φ(ξ) − φ(ξ')‖ <= N ‖ξ − ξ'‖` over every query that has a pair.
fn lipschitz(solver: &Solver, queries: &[Query]) -> Result<Option<LipschitzReport>, Error> {
    let pairs: Vec<(OmegaPoint, DVector<f64>, DVector<f64>)> = queries
        .iter()
        .filter_map(|q| q.pair.as_ref().map(|p| (q.omega.clone(), q.xi.clone(), p.clone())))
        .collect();
    if pairs.is_empty() {
        return Ok(None);
    }
    match solver {
        Solver::Discrete(s) => verify_phi_lipschitz(s, &pairs).map(Some),
        Solver::Continuous(_) => {
            let norm = solver.model().norm();
            let n_const = solver.constants().n_const;
            let (mut worst_ratio, mut worst_excess, mut counted) = (0.0f64, f64::NEG_INFINITY, 0);
            for (omega, a, b) in &pairs {
                let dist = norm.distance(a, b);
                if dist == 0.0 {
                    continue;
                }
                let (pa, ea, _) = solver.phi(omega, a)?;
                let (pb, eb, _) = solver.phi(omega, b)?;
                let ratio = norm.distance(&pa, &pb) / dist;
                worst_ratio = worst_ratio.max(ratio);
                worst_excess = worst_excess.max(ratio - n_const - (ea + eb) / dist);
                counted += 1;
            }
            if counted == 0 {
                worst_excess = 0.0;
            }
            Ok(Some(LipschitzReport {
                samples: counted,
                worst_ratio,
                n_const,
                worst_excess,
                passed: worst_excess <= 0.0,
            }))
        }
    }
}

fn columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

/// Solves on the configured grid after the gate. Rows hold
/// `(ω, ξ-coordinates, φ, error bound)`.
pub fn sample_manifold(config: &ExperimentConfig, options: RunOptions) -> Result<RunReport, CliError> {
    let grid = config.grid.as_ref().ok_or_else(|| CliError::Config("`sample` needs a grid section".into()))?;
    let (mut report, prepared) = run_prepared(config, Stage::Rates, options)?;
    let Some(prepared) = prepared else {
        return Ok(report);
    };
    let model = prepared.solver.model();
    let k = model.cocycle.center_dim();
    let wdim = model.driving.coord_dim();
    dims_match("grid.omega", wdim, grid.omega.len())?;
    dims_match("grid.box", k, grid.xi_box.len())?;
    let omega = OmegaPoint::new(grid.omega.clone());
    let points = grid.points();
    let lifted: Vec<DVector<f64>> = points
        .iter()
        .map(|c| model.lift_center(&omega, c).map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    let start = Instant::now();
    let solved: Vec<Result<PhiSolve, Error>> =
        lifted.par_iter().map(|xi| prepared.solver.phi(&omega, xi)).collect();
    let mut rows = Vec::with_capacity(points.len());
    for (coords, s) in points.iter().zip(solved) {
        match s {
            Ok((phi, err, _)) => {
                let mut row = grid.omega.clone();
                row.extend_from_slice(coords);
                row.extend(phi.iter());
                row.push(err);
                rows.push(row);
            }
            Err(e) => {
                let mut q = empty_query(&Query {
                    omega: omega.clone(),
                    coords: coords.clone(),
                    xi: model.lift_center(&omega, coords).expect("lifted above"),
                    times: Vec::new(),
                    pair: None,
                });
                q.error = Some(e.to_string());
                report.queries.push(q);
                report.set_status(Status::SolverFailure);
                return Ok(report);
            }
        }
    }
    if let Some(t) = report.timings.as_mut() {
        t.solve_ms = elapsed_ms(start);
    }
    let mut names: Vec<String> = columns("omega", wdim).collect();
    names.extend(columns("xi", k));
    names.extend(columns("phi", model.dim()));
    names.push("error_bound".into());
    report.samples = Some(Samples { columns: names, rows });
    Ok(report)
}

/// Query rows in the same layout as [`sample_manifold`].
pub fn query_samples(report: &RunReport) -> Option<Samples> {
    let model = report.model.as_ref()?;
    let mut names: Vec<String> = columns("omega", model.omega_dim).collect();
    names.extend(columns("xi", model.center_dim));
    names.extend(columns("phi", model.dim));
    names.push("error_bound".into());
    let rows = report
        .queries
        .iter()
        .filter_map(|q| {
            let mut row = q.omega.coords().to_vec();
            row.extend_from_slice(&q.xi_coords);
            row.extend(q.phi.as_ref()?);
            row.push(q.phi_error?);
            Some(row)
        })
        .collect();
    Some(Samples { columns: names, rows })
}
