//! Continuous-time path: the variation-of-constants equation for `Ψ` solved
//! by Picard iteration, and the Lyapunov-Perron fixed point with integrals
//! replaced by fixed-step trapezoid sums on a symmetric grid.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{estimate_rates, sigma_tau_continuous, solve_mn, ContractionConstants, ExponentialRates, RatesConfig};
use crate::rds::{
    DrivingSystem, LinearCocycle, LinearPerturbation, Model, Nonlinearity, OmegaPoint, Shift, Subbundle, TimeDomain,
    DYNAMICAL_TOL,
};
use crate::solver::{
    observed_ratio, xi_scale, ContractionReport, GraphSolution, GrowthReport, SolveReport, SolverConfig, TrajectorySegment, ROUNDING_FLOOR,
};
use crate::zoo::{DiagonalCocycle, SubbundleDims, TemperedBounds};
use crate::VectorNorm;

/// Safety factor on the Richardson estimate `(4/3)|x_h − x_{h/2}|`.
const RICHARDSON_SAFETY: f64 = 2.0;
/// Relative distance to the nearest grid node tolerated without a warning.
const GRID_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    #[default]
    Trapezoid,
}

/// Composite fixed-step quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub step: f64,
    pub rule: QuadratureRule,
}

impl QuadratureScheme {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidInput(format!("quadrature step must be positive (got {step})")));
        }
        Ok(QuadratureScheme { step, rule: QuadratureRule::Trapezoid })
    }

    /// Equally spaced nodes from `a` to `b` with spacing at most `step`.
    pub fn grid(&self, a: f64, b: f64) -> Vec<f64> {
        let n = (((b - a).abs() / self.step) - GRID_SNAP).ceil().max(1.0) as usize;
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let nodes = self.grid(a, b);
        let h = (b - a) / (nodes.len() - 1) as f64;
        match self.rule {
            QuadratureRule::Trapezoid => {
                let inner: f64 = nodes[1..nodes.len() - 1].iter().map(|&r| f(r)).sum();
                h * (0.5 * f(a) + inner + 0.5 * f(b))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolterraConfig {
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for VolterraConfig {
    fn default() -> Self {
        VolterraConfig { step: 0.05, tol: 1e-14, max_iter: 200 }
    }
}

impl VolterraConfig {
    pub fn validate(&self) -> Result<()> {
        QuadratureScheme::new(self.step)?;
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("Volterra tol must be positive (got {})", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("Volterra max_iter must be positive".into()));
        }
        Ok(())
    }

    fn halved(&self) -> Self {
        VolterraConfig { step: self.step / 2.0, ..*self }
    }
}

fn require_continuous(model: &Model) -> Result<()> {
    if model.time_domain() != TimeDomain::Continuous {
        return Err(Error::InvalidInput(format!("`{}` is not a continuous-time model", model.name)));
    }
    Ok(())
}

/// Number of steps of size `step` to reach `|t|`, snapping to the nearest
/// node with a warning when `t` is off the grid.
fn steps_to(t: f64, step: f64) -> usize {
    let n = (t.abs() / step).round();
    if (n * step - t.abs()).abs() > GRID_SNAP * t.abs().max(1.0) {
        log::warn!("t = {t} is not a multiple of the step {step}; using the nearest node {}", n * step * t.signum());
    }
    n as usize
}

/// Full cocycle matrix `Φ^t_ω` for either sign of `t`.
fn full_map(model: &Model, t: f64, omega: &OmegaPoint) -> Result<DMatrix<f64>> {
    if t >= 0.0 {
        Ok(model.cocycle.forward(t, omega))
    } else {
        model.full_backward(t, omega)
    }
}

/// `Ψ^t_ω x` from `u(t) = Φ^t_ω x + ∫_0^t Φ^{t−r}_{θ^rω} f_{θ^rω}(u(r)) dr`.
pub fn psi_continuous(model: &Model, t: f64, omega: &OmegaPoint, x: &DVector<f64>, cfg: &VolterraConfig) -> Result<DVector<f64>> {
    require_continuous(model)?;
    cfg.validate()?;
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), actual: x.len() });
    }
    let n = steps_to(t, cfg.step);
    if n == 0 {
        return Ok(x.clone());
    }
    let h = cfg.step * t.signum();
    let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let points: Vec<OmegaPoint> = nodes.iter().map(|&r| model.flow(r, omega)).collect();
    let linear: Vec<DVector<f64>> = nodes
        .iter()
        .map(|&r| full_map(model, r, omega).map(|m| m * x))
        .collect::<Result<_>>()?;
    let steps: Vec<DMatrix<f64>> = points[..n].iter().map(|w| full_map(model, h, w)).collect::<Result<_>>()?;
    let half = 0.5 * h.abs();
    let sign = t.signum();
    let norm = model.norm();

    let mut u = linear.clone();
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let f: Vec<DVector<f64>> = points.iter().zip(&u).map(|(w, ui)| model.eval_f(w, ui)).collect();
        let mut next = Vec::with_capacity(n + 1);
        let mut acc = DVector::zeros(x.len());
        next.push(linear[0].clone());
        for i in 0..n {
            acc = &steps[i] * (&acc + &f[i] * half) + &f[i + 1] * half;
            next.push(&linear[i + 1] + &acc * sign);
        }
        change = u.iter().zip(&next).map(|(a, b)| norm.distance(a, b)).fold(0.0, f64::max);
        let scale = 1.0 + next.iter().map(|v| norm.of(v)).fold(0.0, f64::max);
        u = next;
        if !change.is_finite() {
            break;
        }
        if change <= cfg.tol * scale {
            return Ok(u.pop().expect("nonempty path"));
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iter, residual: change })
}

/// `Ψ^t_ω x` at the configured step together with the safeguarded
/// Richardson estimate of its quadrature error.
pub fn psi_with_estimate(model: &Model, t: f64, omega: &OmegaPoint, x: &DVector<f64>, cfg: &VolterraConfig) -> Result<(DVector<f64>, f64)> {
    let coarse = psi_continuous(model, t, omega, x, cfg)?;
    let fine = psi_continuous(model, t, omega, x, &cfg.halved())?;
    let est = RICHARDSON_SAFETY * 4.0 / 3.0 * model.norm().distance(&coarse, &fine);
    Ok((coarse, est))
}

/// Lipschitz bound `A e^{A L |t|}` for `Ψ^t_ω`, with `A` the largest
/// `‖Φ^{r_i − r_k}_{θ^{r_k}ω}‖` and `L` the largest `Lip(f)` over the grid
/// between `0` and `t`.
pub fn continuous_amplification(model: &Model, t: f64, omega: &OmegaPoint, step: f64) -> Result<f64> {
    let n = steps_to(t, step);
    let h = step * t.signum();
    let norm = model.norm();
    let mut a = 1.0f64;
    let mut l = 0.0f64;
    for k in 0..=n {
        let w = model.flow(k as f64 * h, omega);
        l = l.max(model.lip(&w));
        for i in k + 1..=n {
            a = a.max(norm.operator(&full_map(model, (i - k) as f64 * h, &w)?));
        }
    }
    Ok(a * (a * l * t.abs()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuousConfig {
    /// Half-width `T` of the time window `[−T, T]`.
    pub horizon: f64,
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Re-solve at half the step and fold the Richardson estimate into the
    /// error bound.
    pub check_quadrature: bool,
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        ContinuousConfig { horizon: 20.0, step: 0.05, tol: 1e-13, max_iter: 500, check_quadrature: true }
    }
}

impl ContinuousConfig {
    pub fn validate(&self) -> Result<()> {
        QuadratureScheme::new(self.step)?;
        if !(self.horizon.is_finite() && self.horizon >= self.step) {
            return Err(Error::InvalidInput(format!("time horizon must be at least one step (got {})", self.horizon)));
        }
        SolverConfig { horizon: 1, tol: self.tol, max_iter: self.max_iter }.validate()
    }

    fn nodes(&self) -> usize {
        steps_to(self.horizon, self.step)
    }

    pub fn volterra(&self) -> VolterraConfig {
        VolterraConfig { step: self.step, tol: self.tol.min(1e-13), max_iter: 200 }
    }
}

/// Fixed point at one `(ω, ξ)` on the grid `r_j = j·step`, `|j| <= J`.
#[derive(Debug, Clone)]
pub struct ContinuousGraphPoint {
    pub omega: OmegaPoint,
    pub xi: DVector<f64>,
    pub phi: DVector<f64>,
    pub step: f64,
    pub segment: TrajectorySegment,
    pub report: SolveReport,
    pub center_weights: Vec<f64>,
}

impl ContinuousGraphPoint {
    fn node(&self, t: f64) -> Option<usize> {
        let j = (t / self.step).round();
        if (j * self.step - t).abs() > GRID_SNAP * t.abs().max(1.0) {
            log::warn!("t = {t} is off the solver grid; using the nearest node {}", j * self.step);
        }
        self.segment.index(j as i64)
    }

    /// `h_{t,ω}(ξ)` at the grid node nearest to `t`.
    pub fn h_at(&self, t: f64) -> Option<&DVector<f64>> {
        self.node(t).map(|i| &self.segment.center[i])
    }

    pub fn phi_error(&self) -> f64 {
        self.center_weights[self.segment.horizon] * self.report.error_bound
    }

    pub fn h_error(&self, t: f64) -> Option<f64> {
        self.node(t).map(|i| self.center_weights[i] * self.report.error_bound)
    }
}

struct GridOrbit {
    nodes: i64,
    half: f64,
    points: Vec<OmegaPoint>,
    pc: Vec<DMatrix<f64>>,
    ps: Vec<DMatrix<f64>>,
    pu: Vec<DMatrix<f64>>,
    /// `Φ^{c,h}_{θ^{r_j}ω}`, `j ∈ [0, J−1]`, at index `j`.
    center_fwd: Vec<DMatrix<f64>>,
    /// `Φ^{c,−h}_{θ^{r_j}ω}`, `j ∈ [−J+1, 0]`, at index `−j`.
    center_bwd: Vec<DMatrix<f64>>,
    /// `Φ^{s,h}_{θ^{r_j}ω}`, `j ∈ [−J, J−1]`, at index `j + J`.
    stable_fwd: Vec<DMatrix<f64>>,
    /// `Φ^{u,−h}_{θ^{r_j}ω}`, `j ∈ [−J+1, J]`, at index `j + J`.
    unstable_bwd: Vec<DMatrix<f64>>,
    alpha_c: Vec<f64>,
}

impl GridOrbit {
    fn build(model: &Model, omega: &OmegaPoint, nodes: usize, step: f64) -> Result<Self> {
        let n = nodes as i64;
        let points: Vec<OmegaPoint> = (-n..=n).map(|j| model.flow(j as f64 * step, omega)).collect();
        let at = |j: i64| &points[(j + n) as usize];
        let proj = |sub| (-n..=n).map(|j| model.projector(sub, at(j))).collect();
        let center_fwd = (0..n).map(|j| model.block(Subbundle::Center, step, at(j))).collect::<Result<_>>()?;
        let center_bwd = (0..n).map(|i| model.block(Subbundle::Center, -step, at(-i))).collect::<Result<_>>()?;
        let stable_fwd = (-n..n).map(|j| model.block(Subbundle::Stable, step, at(j))).collect::<Result<_>>()?;
        let mut unstable_bwd = vec![DMatrix::zeros(0, 0)];
        for j in -n + 1..=n {
            unstable_bwd.push(model.block(Subbundle::Unstable, -step, at(j))?);
        }
        let alpha_c = (-n..=n).map(|j| model.alpha(Subbundle::Center, j as f64 * step, omega)).collect();
        let (pc, ps, pu) = (proj(Subbundle::Center), proj(Subbundle::Stable), proj(Subbundle::Unstable));
        Ok(GridOrbit {
            nodes: n,
            half: 0.5 * step,
            points,
            pc,
            ps,
            pu,
            center_fwd,
            center_bwd,
            stable_fwd,
            unstable_bwd,
            alpha_c,
        })
    }

    fn sweep(&self, model: &Model, xi: &DVector<f64>, seg: &TrajectorySegment) -> TrajectorySegment {
        let n = self.nodes;
        let k = self.half;
        let idx = |j: i64| (j + n) as usize;
        let f: Vec<DVector<f64>> = (-n..=n)
            .map(|j| model.eval_f(&self.points[idx(j)], &(&seg.center[idx(j)] + &seg.hyper[idx(j)])))
            .collect();
        let mut next = TrajectorySegment::zeros(seg.horizon, xi.len());

        next.center[idx(0)] = xi.clone();
        for j in 0..n {
            next.center[idx(j + 1)] = &self.center_fwd[j as usize] * (&next.center[idx(j)] + &f[idx(j)] * k)
                + &self.pc[idx(j + 1)] * &f[idx(j + 1)] * k;
        }
        for j in (-n + 1..=0).rev() {
            next.center[idx(j - 1)] = &self.center_bwd[(-j) as usize] * (&next.center[idx(j)] - &f[idx(j)] * k)
                - &self.pc[idx(j - 1)] * &f[idx(j - 1)] * k;
        }

        let mut s = DVector::zeros(xi.len());
        for j in -n..n {
            s = &self.stable_fwd[idx(j)] * (&s + &f[idx(j)] * k) + &self.ps[idx(j + 1)] * &f[idx(j + 1)] * k;
            next.hyper[idx(j + 1)] = s.clone();
        }
        let mut u = DVector::zeros(xi.len());
        for j in (-n + 1..=n).rev() {
            u = &self.unstable_bwd[idx(j)] * (&u - &f[idx(j)] * k) - &self.pu[idx(j - 1)] * &f[idx(j - 1)] * k;
            next.hyper[idx(j - 1)] += &u;
        }
        next
    }

    fn distance(&self, norm: VectorNorm, a: &TrajectorySegment, b: &TrajectorySegment) -> f64 {
        let mut dc = 0.0f64;
        let mut dw = 0.0f64;
        for (i, weight) in self.alpha_c.iter().enumerate() {
            dc = dc.max(norm.distance(&a.center[i], &b.center[i]) / weight);
            dw = dw.max(norm.distance(&a.hyper[i], &b.hyper[i]) / weight);
        }
        dc + dw
    }

    fn linear_segment(&self, xi: &DVector<f64>) -> TrajectorySegment {
        let n = self.nodes;
        let idx = |j: i64| (j + n) as usize;
        let mut seg = TrajectorySegment::zeros(n as usize, xi.len());
        seg.center[idx(0)] = xi.clone();
        for j in 0..n {
            seg.center[idx(j + 1)] = &self.center_fwd[j as usize] * &seg.center[idx(j)];
        }
        for j in (-n + 1..=0).rev() {
            seg.center[idx(j - 1)] = &self.center_bwd[(-j) as usize] * &seg.center[idx(j)];
        }
        seg
    }
}

/// Continuous-time counterpart of [`GraphSolution`].
#[derive(Debug, Clone)]
pub struct ContinuousGraphSolution {
    pub model: Model,
    pub constants: ContractionConstants,
    pub config: ContinuousConfig,
}

struct GridIteration {
    orbit: GridOrbit,
    segment: TrajectorySegment,
    deltas: Vec<f64>,
}

impl ContinuousGraphSolution {
    pub fn new(model: Model, constants: ContractionConstants, config: ContinuousConfig) -> Result<Self> {
        require_continuous(&model)?;
        config.validate()?;
        if !(constants.q < 1.0) {
            return Err(Error::SmallnessViolated(constants.sigma + constants.tau));
        }
        Ok(ContinuousGraphSolution { model, constants, config })
    }

    fn iterate(&self, omega: &OmegaPoint, xi: &DVector<f64>, step: f64) -> Result<GridIteration> {
        let d = self.model.dim();
        if xi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: xi.len() });
        }
        let norm = self.model.norm();
        let off = norm.of(&(self.model.project(Subbundle::Center, omega, xi) - xi));
        if off > DYNAMICAL_TOL * (1.0 + norm.of(xi)) {
            return Err(Error::NotInCenterFiber(off));
        }
        let nodes = steps_to(self.config.horizon, step);
        let orbit = GridOrbit::build(&self.model, omega, nodes, step)?;
        let mut segment = orbit.linear_segment(xi);
        let mut deltas = Vec::new();
        for _ in 0..self.config.max_iter {
            let next = orbit.sweep(&self.model, xi, &segment);
            let delta = orbit.distance(norm, &next, &segment);
            segment = next;
            deltas.push(delta);
            if delta <= self.config.tol {
                break;
            }
        }
        Ok(GridIteration { orbit, segment, deltas })
    }

    pub fn solve(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<ContinuousGraphPoint> {
        let step = self.config.step;
        let it = self.iterate(omega, xi, step)?;
        let scale = xi_scale(&self.model, xi);
        let q_observed = observed_ratio(&it.deltas, scale);
        let last_delta = *it.deltas.last().expect("at least one sweep");
        if last_delta > self.config.tol {
            return Err(Error::NonConvergence { iterations: it.deltas.len(), residual: last_delta });
        }
        if let Some(q) = q_observed.filter(|q| *q >= 1.0) {
            return Err(Error::NotContracting(q));
        }
        let quadrature_estimate = if self.config.check_quadrature {
            let fine = self.iterate(omega, xi, step / 2.0)?;
            let norm = self.model.norm();
            let mut worst = 0.0f64;
            for (i, weight) in it.orbit.alpha_c.iter().enumerate() {
                let dc = norm.distance(&it.segment.center[i], &fine.segment.center[2 * i]);
                let dw = norm.distance(&it.segment.hyper[i], &fine.segment.hyper[2 * i]);
                worst = worst.max((dc + dw) / weight);
            }
            let est = RICHARDSON_SAFETY * 4.0 / 3.0 * worst;
            if est > self.config.tol {
                log::info!("halving the step changes the solution at {omega} by {worst:e} (tol {:e})", self.config.tol);
            }
            Some(est)
        } else {
            None
        };
        let q_bound = self.constants.q.max(q_observed.unwrap_or(0.0));
        let truncation_tail = self.truncation_tail(omega, xi) / (1.0 - q_bound);
        let error_bound = q_bound / (1.0 - q_bound) * last_delta
            + truncation_tail
            + quadrature_estimate.unwrap_or(0.0)
            + ROUNDING_FLOOR * scale;
        let report = SolveReport {
            iterations: it.deltas.len(),
            last_delta,
            q_observed,
            q_bound,
            error_bound,
            truncation_tail,
            quadrature_estimate,
            converged: true,
        };
        let phi = it.segment.hyper[it.segment.horizon].clone();
        Ok(ContinuousGraphPoint {
            omega: omega.clone(),
            xi: xi.clone(),
            phi,
            step,
            segment: it.segment,
            report,
            center_weights: it.orbit.alpha_c,
        })
    }

    pub fn phi_at(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve(omega, xi)?.phi)
    }

    pub fn h_at(&self, t: f64, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.solve(omega, xi)?;
        p.h_at(t).cloned().ok_or_else(|| {
            Error::InvalidInput(format!("|t| = {} exceeds the time horizon {}", t.abs(), self.config.horizon))
        })
    }

    /// All successive changes at `(ω, ξ)`, without any convergence verdict.
    pub fn deltas(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<Vec<f64>> {
        Ok(self.iterate(omega, xi, self.config.step)?.deltas)
    }

    /// Observed contraction of the grid iteration against `(σ+τ)·max{1+N, M}`.
    pub fn contraction_diagnostic(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<ContractionReport> {
        let deltas = self.deltas(omega, xi)?;
        Ok(ContractionReport::from_deltas(&deltas, xi_scale(&self.model, xi), self.constants.q))
    }

    fn truncation_tail(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> f64 {
        let xi_norm = self.model.norm().of(xi);
        if xi_norm == 0.0 {
            return 0.0;
        }
        let horizon = self.config.nodes() as f64 * self.config.step;
        let tails = match &self.model.tail {
            Some(env) => {
                let (m, p) = env.tau_tails(omega, horizon);
                m + p
            }
            None => match sigma_tau_continuous(&self.model, omega, horizon, self.config.step) {
                Ok(r) => r.tau_tail,
                Err(e) => {
                    log::warn!("no tail bound at {omega}: {e}");
                    f64::INFINITY
                }
            },
        };
        let c = &self.constants;
        c.m_const * (1.0 + c.n_const) * xi_norm * tails
    }
}

pub fn solve_graph_point_continuous(
    model: &Model,
    constants: &ContractionConstants,
    omega: &OmegaPoint,
    xi: &DVector<f64>,
    config: &ContinuousConfig,
) -> Result<ContinuousGraphPoint> {
    ContinuousGraphSolution::new(model.clone(), *constants, *config)?.solve(omega, xi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousTheoremReport {
    pub t: f64,
    pub defect: f64,
    pub invariance_bound: f64,
    pub center_mismatch: f64,
    pub center_bound: f64,
    pub growth: GrowthReport,
    pub passed: bool,
}

/// Invariance of the graph under `Ψ^t` and the growth estimate along it,
/// using [`psi_continuous`] for the flow.
pub fn verify_theorem_continuous(
    solution: &ContinuousGraphSolution,
    point: &ContinuousGraphPoint,
    xi2: &DVector<f64>,
    t: f64,
) -> Result<ContinuousTheoremReport> {
    let model = &solution.model;
    let cfg = solution.config.volterra();
    if t.abs() > solution.config.horizon {
        return Err(Error::InvalidInput(format!("|t| = {} exceeds the time horizon {}", t.abs(), solution.config.horizon)));
    }
    let norm = model.norm();
    let omega = &point.omega;
    let amp = continuous_amplification(model, t, omega, cfg.step)?;
    let t_node = steps_to(t, cfg.step) as f64 * cfg.step * t.signum();

    let (y, y_err) = psi_with_estimate(model, t_node, omega, &(&point.xi + &point.phi), &cfg)?;
    let target = model.drive(t_node, omega)?;
    let p_c = model.projector(Subbundle::Center, &target);
    let y_c = &p_c * &y;
    let y_h = &y - &y_c;
    let image = solution.solve(&target, &y_c)?;
    let p_h = DMatrix::identity(p_c.nrows(), p_c.ncols()) - &p_c;
    let perturbation = amp * point.phi_error() + y_err;
    let rounding = ROUNDING_FLOOR * (1.0 + norm.of(&y));
    let defect = norm.distance(&y_h, &image.phi);
    let invariance_bound =
        (norm.operator(&p_h) + solution.constants.n_const * norm.operator(&p_c)) * perturbation + image.phi_error() + rounding;
    let center_mismatch = point.h_at(t_node).map_or(f64::INFINITY, |h| norm.distance(&y_c, h));
    let center_bound = norm.operator(&p_c) * perturbation + point.h_error(t_node).unwrap_or(0.0) + rounding;

    let other = solution.solve(omega, xi2)?;
    let (y2, y2_err) = psi_with_estimate(model, t_node, omega, &(&other.xi + &other.phi), &cfg)?;
    let lhs = norm.distance(&y, &y2);
    let slack = amp * (point.phi_error() + other.phi_error()) + y_err + y2_err + rounding;
    let rhs = solution.constants.growth_factor().map(|g| {
        g * model.alpha(Subbundle::Center, t_node, omega) * norm.distance(&point.xi, xi2)
    });
    let growth = GrowthReport { n: t_node.round() as i64, lhs, rhs, slack, margin: rhs.map(|r| r + slack - lhs), suppressed: rhs.is_none() };
    let passed = defect <= invariance_bound && center_mismatch <= center_bound && growth.passed();
    Ok(ContinuousTheoremReport { t: t_node, defect, invariance_bound, center_mismatch, center_bound, growth, passed })
}

/// The continuous driving flow sampled at integer times.
#[derive(Debug)]
struct IntegerTimes(Arc<dyn DrivingSystem>);

impl DrivingSystem for IntegerTimes {
    fn time_domain(&self) -> TimeDomain {
        TimeDomain::Discrete
    }

    fn coord_dim(&self) -> usize {
        self.0.coord_dim()
    }

    fn flow(&self, t: f64, omega: &OmegaPoint) -> OmegaPoint {
        self.0.flow(t, omega)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> OmegaPoint {
        self.0.sample(rng)
    }

    fn distance(&self, a: &OmegaPoint, b: &OmegaPoint) -> f64 {
        self.0.distance(a, b)
    }
}

#[derive(Debug)]
struct SameCocycle(Arc<dyn LinearCocycle>);

impl LinearCocycle for SameCocycle {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn norm(&self) -> VectorNorm {
        self.0.norm()
    }

    fn forward(&self, t: f64, omega: &OmegaPoint) -> DMatrix<f64> {
        self.0.forward(t, omega)
    }

    fn projector(&self, sub: Subbundle, omega: &OmegaPoint) -> DMatrix<f64> {
        self.0.projector(sub, omega)
    }

    fn backward(&self, sub: Subbundle, t: f64, omega: &OmegaPoint) -> Option<DMatrix<f64>> {
        self.0.backward(sub, t, omega)
    }

    fn center_basis(&self, omega: &OmegaPoint) -> DMatrix<f64> {
        self.0.center_basis(omega)
    }

    fn center_dim(&self) -> usize {
        self.0.center_dim()
    }
}

/// `f̃_ω = Ψ^1_ω − Φ^1_ω`, the nonlinearity of the time-one map.
struct TimeOneMap {
    model: Model,
    cfg: VolterraConfig,
}

impl fmt::Debug for TimeOneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeOneMap").field("model", &self.model.name).field("step", &self.cfg.step).finish()
    }
}

impl Nonlinearity for TimeOneMap {
    fn eval(&self, omega: &OmegaPoint, x: &DVector<f64>) -> DVector<f64> {
        match psi_continuous(&self.model, 1.0, omega, x, &self.cfg) {
            Ok(y) => y - self.model.cocycle.forward(1.0, omega) * x,
            Err(e) => {
                log::error!("time-one map failed at {omega}: {e}");
                DVector::from_element(x.len(), f64::NAN)
            }
        }
    }

    /// `A(e^{AL} − 1)` from Gronwall's inequality on `[0, 1]`.
    fn lip(&self, omega: &OmegaPoint) -> f64 {
        let step = self.cfg.step;
        let n = steps_to(1.0, step);
        let norm = self.model.norm();
        let mut a = 1.0f64;
        let mut l = 0.0f64;
        for k in 0..=n {
            let w = self.model.flow(k as f64 * step, omega);
            l = l.max(self.model.lip(&w));
            for i in k + 1..=n {
                a = a.max(norm.operator(&self.model.cocycle.forward((i - k) as f64 * step, &w)));
            }
        }
        if l == 0.0 {
            return 0.0;
        }
        a * (a * l).exp_m1()
    }
}

/// The discrete system `n ↦ Ψ^n` obtained by sampling a continuous model at
/// integer times. Its linear part and bounds are those of the original.
pub fn time_one_restriction(model: &Model, cfg: &VolterraConfig) -> Result<Model> {
    require_continuous(model)?;
    cfg.validate()?;
    Ok(Model::new(
        format!("{}-time-one", model.name),
        Arc::new(IntegerTimes(model.driving.clone())),
        Arc::new(SameCocycle(model.cocycle.clone())),
        model.bounds.clone(),
    )
    .with_nonlinearity(Arc::new(TimeOneMap { model: model.clone(), cfg: *cfg })))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeOneComparison {
    pub phi_continuous: Vec<f64>,
    pub phi_discrete: Vec<f64>,
    pub difference: f64,
    pub continuous_error: f64,
    pub discrete_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Slack added to the combined error bounds of the two solvers.
pub const CROSS_SOLVER_SLACK: f64 = 1e-10;

/// Compares `φ_ω(ξ)` from the continuous solver with the discrete solver run
/// on the time-one restriction. The discrete side carries the quadrature
/// error of its nonlinearity, estimated by halving the Volterra step.
pub fn compare_time_one(
    model: &Model,
    omega: &OmegaPoint,
    xi: &DVector<f64>,
    config: &ContinuousConfig,
    discrete_horizon: usize,
) -> Result<TimeOneComparison> {
    let rates_cfg = RatesConfig { horizon: config.horizon, step: config.step };
    let est = estimate_rates(model, std::slice::from_ref(omega), &rates_cfg)?;
    let constants = solve_mn(est.sigma + est.sigma_tail, est.tau + est.tau_tail)?;
    let cont = ContinuousGraphSolution::new(model.clone(), constants, *config)?.solve(omega, xi)?;

    let disc_cfg = SolverConfig { horizon: discrete_horizon, tol: config.tol, max_iter: config.max_iter };
    let discrete_phi = |vcfg: VolterraConfig| -> Result<(DVector<f64>, f64)> {
        let restricted = time_one_restriction(model, &vcfg)?;
        let est = estimate_rates(&restricted, std::slice::from_ref(omega), &RatesConfig { horizon: discrete_horizon as f64, step: 1.0 })?;
        let constants = solve_mn(est.sigma + est.sigma_tail, est.tau + est.tau_tail)?;
        let p = GraphSolution::new(restricted, constants, disc_cfg)?.solve(omega, xi)?;
        Ok((p.phi.clone(), p.phi_error()))
    };
    let vcfg = config.volterra();
    let (phi_d, err_d) = discrete_phi(vcfg)?;
    let (phi_d2, _) = discrete_phi(vcfg.halved())?;
    let norm = model.norm();
    let discrete_error = err_d + RICHARDSON_SAFETY * 4.0 / 3.0 * norm.distance(&phi_d, &phi_d2);
    let continuous_error = cont.phi_error();
    let difference = norm.distance(&cont.phi, &phi_d);
    let tolerance = continuous_error + discrete_error + CROSS_SOLVER_SLACK;
    Ok(TimeOneComparison {
        phi_continuous: cont.phi.iter().copied().collect(),
        phi_discrete: phi_d.iter().copied().collect(),
        difference,
        continuous_error,
        discrete_error,
        tolerance,
        passed: difference <= tolerance,
    })
}

/// `Φ^t = e^{at}` on `R` with `f(x) = bx`; `Ψ^t x = e^{(a+b)t} x`.
pub fn scalar_linear_model(a: f64, b: f64) -> Model {
    let rates = ExponentialRates { c_upper: a, c_lower: a, s: -1.0, u: 1.0 };
    Model::new(
        "scalar-linear",
        Arc::new(Shift::continuous()),
        Arc::new(DiagonalCocycle { exponents: vec![a], dims: SubbundleDims { center: 1, stable: 0, unstable: 0 } }),
        Arc::new(TemperedBounds { rates, k: 1.0 }),
    )
    .with_nonlinearity(Arc::new(LinearPerturbation { matrix: DMatrix::from_element(1, 1, b), norm: VectorNorm::Max }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceOrder {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e_h / e_{h/2})` for each consecutive pair.
    pub orders: Vec<f64>,
}

/// Observed order of [`psi_continuous`] against `e^{(a+b)t} x` on the
/// scalar linear test, halving the step `levels − 1` times.
pub fn volterra_order(a: f64, b: f64, t: f64, x: f64, step: f64, levels: usize) -> Result<ConvergenceOrder> {
    let model = scalar_linear_model(a, b);
    let exact = ((a + b) * t).exp() * x;
    let x = DVector::from_element(1, x);
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    let mut h = step;
    for _ in 0..levels {
        let cfg = VolterraConfig { step: h, tol: 1e-15, max_iter: 500 };
        let u = psi_continuous(&model, t, &OmegaPoint::scalar(0.0), &x, &cfg)?;
        steps.push(h);
        errors.push((u[0] - exact).abs());
        h /= 2.0;
    }
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceOrder { steps, errors, orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::Shape;
    use crate::zoo::{make_tempered_exp, with_admissible_f, TemperedExpParams};

    #[test]
    fn trapezoid_is_second_order() {
        let f = |r: f64| (2.0 * r).sin();
        let exact = (1.0 - 6.0f64.cos()) / 2.0;
        let e1 = (QuadratureScheme::new(0.1).unwrap().integrate(f, 0.0, 3.0) - exact).abs();
        let e2 = (QuadratureScheme::new(0.05).unwrap().integrate(f, 0.0, 3.0) - exact).abs();
        assert!((e1 / e2).log2() > 1.95);
    }

    #[test]
    fn psi_at_zero_and_without_f() {
        let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Continuous).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let omega = OmegaPoint::scalar(0.2);
        let cfg = VolterraConfig::default();
        assert_eq!(psi_continuous(&m, 0.0, &omega, &x, &cfg).unwrap(), x);
        for t in [-1.5, 2.0] {
            let y = psi_continuous(&m, t, &omega, &x, &cfg).unwrap();
            let expected = full_map(&m, t, &omega).unwrap() * &x;
            assert!((y - expected).amax() <= 1e-12);
        }
    }

    #[test]
    fn volterra_scalar_order() {
        let o = volterra_order(-0.3, 0.1, 2.0, 1.0, 0.1, 4).unwrap();
        assert!(o.orders.iter().all(|&p| p >= 1.8), "{o:?}");
        let o = volterra_order(-0.3, 0.1, -2.0, 1.0, 0.1, 3).unwrap();
        assert!(o.orders.iter().all(|&p| p >= 1.8), "{o:?}");
    }

    #[test]
    fn zero_f_gives_linear_center_flow() {
        let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Continuous).unwrap();
        let cfg = ContinuousConfig { horizon: 5.0, ..Default::default() };
        let sol = ContinuousGraphSolution::new(m.clone(), solve_mn(0.0, 0.0).unwrap(), cfg).unwrap();
        let omega = OmegaPoint::scalar(0.0);
        let xi = m.lift_center(&omega, &[2.0]).unwrap();
        let p = sol.solve(&omega, &xi).unwrap();
        assert!(p.phi.amax() <= 1e-14);
        let h = p.h_at(1.5).unwrap();
        let expected = m.apply_block(Subbundle::Center, 1.5, &omega, &xi).unwrap();
        assert!((h - expected).amax() <= 1e-12);
    }

    #[test]
    fn two_parameter_property() {
        let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Continuous).unwrap();
        let m = with_admissible_f(m, Shape::ComponentwiseSine, 1.0).unwrap();
        let omega = OmegaPoint::scalar(-0.4);
        let x = DVector::from_vec(vec![0.4, 0.2, -0.3]);
        let cfg = VolterraConfig::default();
        let (direct, e1) = psi_with_estimate(&m, 1.0, &omega, &x, &cfg).unwrap();
        let first = psi_continuous(&m, 0.5, &omega, &x, &cfg).unwrap();
        let composed = psi_continuous(&m, 0.5, &m.flow(0.5, &omega), &first, &cfg).unwrap();
        assert!((direct - composed).amax() <= e1 + 1e-12);
    }
}
