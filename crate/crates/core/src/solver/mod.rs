//! Discrete-time Lyapunov-Perron solver. For a fixed base point `ω` and a
//! center vector `ξ`, the fixed point is computed on one finite orbit
//! segment `j ∈ [−H, H]`: the center part `c_j = h_{j,ω}(ξ)` and the
//! hyperbolic part `w_j = φ_{θ^jω}(c_j)`.

mod psi;
mod verify;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use psi::{lipschitz_amplification, psi_simulate};
pub use verify::{
    contraction_diagnostic, verify_growth_bound, verify_invariance, verify_phi_lipschitz,
    ContractionReport, GrowthReport, InvarianceReport, LipschitzReport, CONTRACTION_LOOSENING,
};

use crate::error::{Error, Result};
use crate::rates::{tau_discrete, ContractionConstants};
use crate::rds::{Model, OmegaPoint, Subbundle, TimeDomain, DYNAMICAL_TOL};

/// Deltas below this multiple of `ε·(1 + ‖ξ‖)` are rounding noise and are
/// not used to estimate the contraction ratio.
pub(crate) const NOISE_FACTOR: f64 = 1e3;
/// Allowance for rounding in the recursions, relative to `1 + ‖ξ‖`.
pub(crate) const ROUNDING_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub horizon: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { horizon: 40, tol: 1e-13, max_iter: 500 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("solver horizon must be positive".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("solver tol must be positive (got {})", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("solver max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Center and hyperbolic parts along `θ^jω`, `j ∈ [−H, H]`, stored at index
/// `j + H`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub horizon: usize,
    pub center: Vec<DVector<f64>>,
    pub hyper: Vec<DVector<f64>>,
}

impl TrajectorySegment {
    pub(crate) fn zeros(horizon: usize, dim: usize) -> Self {
        let len = 2 * horizon + 1;
        TrajectorySegment {
            horizon,
            center: vec![DVector::zeros(dim); len],
            hyper: vec![DVector::zeros(dim); len],
        }
    }

    pub(crate) fn index(&self, j: i64) -> Option<usize> {
        let h = self.horizon as i64;
        (-h..=h).contains(&j).then(|| (j + h) as usize)
    }

    pub fn c(&self, j: i64) -> Option<&DVector<f64>> {
        self.index(j).map(|i| &self.center[i])
    }

    pub fn w(&self, j: i64) -> Option<&DVector<f64>> {
        self.index(j).map(|i| &self.hyper[i])
    }

    /// Worst violation of `P^c c_j = c_j` and `P^c w_j = 0` along the orbit.
    pub fn containment_defect(&self, model: &Model, omega: &OmegaPoint) -> f64 {
        let norm = model.norm();
        let h = self.horizon as i64;
        (-h..=h)
            .map(|j| {
                let p = model.projector(Subbundle::Center, &model.flow(j as f64, omega));
                let i = (j + h) as usize;
                let dc = norm.of(&(&p * &self.center[i] - &self.center[i]));
                let dw = norm.of(&(&p * &self.hyper[i]));
                dc.max(dw)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Last change in the metric weighted by `1/α^c_{j,ω}`.
    pub last_delta: f64,
    /// Largest of the last few ratios of successive changes; `None` when
    /// fewer than three ratios rise above rounding noise.
    pub q_observed: Option<f64>,
    /// Contraction factor used in the bound.
    pub q_bound: f64,
    /// Bound on the weighted distance to the exact fixed point, including
    /// the truncation tail.
    pub error_bound: f64,
    pub truncation_tail: f64,
    /// Step-halving estimate of the quadrature error (continuous time only),
    /// already included in `error_bound`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_estimate: Option<f64>,
    pub converged: bool,
}

/// The fixed point at one `(ω, ξ)`.
#[derive(Debug, Clone)]
pub struct GraphPoint {
    pub omega: OmegaPoint,
    pub xi: DVector<f64>,
    pub phi: DVector<f64>,
    pub segment: TrajectorySegment,
    pub report: SolveReport,
    /// `α^c_{j,ω}` at index `j + H`.
    pub center_weights: Vec<f64>,
}

impl GraphPoint {
    pub fn horizon(&self) -> usize {
        self.segment.horizon
    }

    /// `h_{n,ω}(ξ)` for `|n| <= H`.
    pub fn h_at(&self, n: i64) -> Option<&DVector<f64>> {
        self.segment.c(n)
    }

    /// Error bound for `φ_ω(ξ)` in the norm of the model.
    pub fn phi_error(&self) -> f64 {
        self.center_weights[self.segment.horizon] * self.report.error_bound
    }

    /// Error bound for `h_{n,ω}(ξ)`.
    pub fn h_error(&self, n: i64) -> Option<f64> {
        self.segment.index(n).map(|i| self.center_weights[i] * self.report.error_bound)
    }
}

/// Linear data along the orbit, precomputed once per solve.
struct Orbit {
    horizon: i64,
    /// `θ^jω` for `j ∈ [−H, H+1]` at index `j + H`.
    points: Vec<OmegaPoint>,
    pc: Vec<DMatrix<f64>>,
    ps: Vec<DMatrix<f64>>,
    /// `Φ^{c,1}_{θ^jω}` for `j ∈ [0, H−1]` at index `j`.
    center_fwd: Vec<DMatrix<f64>>,
    /// `Φ^{c,−1}_{θ^jω}` for `j ∈ [−H+1, 0]` at index `−j`.
    center_bwd: Vec<DMatrix<f64>>,
    /// `Φ^{s,1}_{θ^jω}` for `j ∈ [−H, H−1]` at index `j + H`.
    stable_fwd: Vec<DMatrix<f64>>,
    /// `Φ^{u,−1}_{θ^{j+1}ω}` for `j ∈ [−H, H]` at index `j + H`.
    unstable_bwd: Vec<DMatrix<f64>>,
    alpha_c: Vec<f64>,
}

impl Orbit {
    fn build(model: &Model, omega: &OmegaPoint, horizon: usize) -> Result<Self> {
        let h = horizon as i64;
        let points: Vec<OmegaPoint> = (-h..=h + 1).map(|j| model.flow(j as f64, omega)).collect();
        let at = |j: i64| &points[(j + h) as usize];
        let pc = (-h..=h + 1).map(|j| model.projector(Subbundle::Center, at(j))).collect();
        let ps = (-h..=h + 1).map(|j| model.projector(Subbundle::Stable, at(j))).collect();
        let center_fwd = (0..h)
            .map(|j| model.block(Subbundle::Center, 1.0, at(j)))
            .collect::<Result<_>>()?;
        let center_bwd = (0..h)
            .map(|i| model.block(Subbundle::Center, -1.0, at(-i)))
            .collect::<Result<_>>()?;
        let stable_fwd = (-h..h)
            .map(|j| model.block(Subbundle::Stable, 1.0, at(j)))
            .collect::<Result<_>>()?;
        let unstable_bwd = (-h..=h)
            .map(|j| model.block(Subbundle::Unstable, -1.0, at(j + 1)))
            .collect::<Result<_>>()?;
        let alpha_c = (-h..=h).map(|j| model.alpha(Subbundle::Center, j as f64, omega)).collect();
        Ok(Orbit { horizon: h, points, pc, ps, center_fwd, center_bwd, stable_fwd, unstable_bwd, alpha_c })
    }

    /// One application of the truncated Lyapunov-Perron map.
    fn sweep(&self, model: &Model, xi: &DVector<f64>, seg: &TrajectorySegment) -> TrajectorySegment {
        let h = self.horizon;
        let idx = |j: i64| (j + h) as usize;
        let f: Vec<DVector<f64>> = (-h..=h)
            .map(|j| model.eval_f(&self.points[idx(j)], &(&seg.center[idx(j)] + &seg.hyper[idx(j)])))
            .collect();
        let mut next = TrajectorySegment::zeros(seg.horizon, xi.len());

        next.center[idx(0)] = xi.clone();
        for j in 0..h {
            next.center[idx(j + 1)] = &self.center_fwd[j as usize] * &next.center[idx(j)] + &self.pc[idx(j + 1)] * &f[idx(j)];
        }
        for j in (-h + 1..=0).rev() {
            next.center[idx(j - 1)] = &self.center_bwd[(-j) as usize] * (&next.center[idx(j)] - &f[idx(j - 1)]);
        }

        let mut s = DVector::zeros(xi.len());
        next.hyper[idx(-h)] = s.clone();
        for j in -h..h {
            s = &self.stable_fwd[idx(j)] * &s + &self.ps[idx(j + 1)] * &f[idx(j)];
            next.hyper[idx(j + 1)] = s.clone();
        }
        let mut u = DVector::zeros(xi.len());
        for j in (-h..=h).rev() {
            u = &self.unstable_bwd[idx(j)] * (&u - &f[idx(j)]);
            next.hyper[idx(j)] += &u;
        }
        next
    }

    /// Weighted distance `sup |Δc_j|/α^c_j + sup |Δw_j|/α^c_j`.
    fn distance(&self, model: &Model, a: &TrajectorySegment, b: &TrajectorySegment) -> f64 {
        let norm = model.norm();
        let mut dc = 0.0f64;
        let mut dw = 0.0f64;
        for (i, weight) in self.alpha_c.iter().enumerate() {
            dc = dc.max(norm.distance(&a.center[i], &b.center[i]) / weight);
            dw = dw.max(norm.distance(&a.hyper[i], &b.hyper[i]) / weight);
        }
        dc + dw
    }
}

/// Raw iteration output before the convergence verdict.
struct Iteration {
    orbit: Orbit,
    segment: TrajectorySegment,
    deltas: Vec<f64>,
}

/// Evaluates `φ` and `h` by per-point fixed-point solves. Read-only after
/// construction, so concurrent queries are safe.
#[derive(Debug, Clone)]
pub struct GraphSolution {
    pub model: Model,
    pub constants: ContractionConstants,
    pub config: SolverConfig,
}

impl GraphSolution {
    pub fn new(model: Model, constants: ContractionConstants, config: SolverConfig) -> Result<Self> {
        if model.time_domain() != TimeDomain::Discrete {
            return Err(Error::InvalidInput("the discrete solver needs a discrete-time model".into()));
        }
        config.validate()?;
        if !(constants.q < 1.0) {
            return Err(Error::SmallnessViolated(constants.sigma + constants.tau));
        }
        Ok(GraphSolution { model, constants, config })
    }

    pub fn solve(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<GraphPoint> {
        let it = self.iterate(omega, xi)?;
        let q_observed = observed_ratio(&it.deltas, xi_scale(&self.model, xi));
        let last_delta = *it.deltas.last().expect("at least one sweep");
        if last_delta > self.config.tol {
            return Err(Error::NonConvergence { iterations: it.deltas.len(), residual: last_delta });
        }
        if let Some(q) = q_observed.filter(|q| *q >= 1.0) {
            return Err(Error::NotContracting(q));
        }
        let q_bound = self.constants.q.max(q_observed.unwrap_or(0.0));
        let truncation_tail = self.truncation_tail(omega, xi) / (1.0 - q_bound);
        let error_bound =
            q_bound / (1.0 - q_bound) * last_delta + truncation_tail + ROUNDING_FLOOR * xi_scale(&self.model, xi);
        let report = SolveReport {
            iterations: it.deltas.len(),
            last_delta,
            q_observed,
            q_bound,
            error_bound,
            truncation_tail,
            quadrature_estimate: None,
            converged: true,
        };
        let phi = it.segment.hyper[self.config.horizon].clone();
        Ok(GraphPoint {
            omega: omega.clone(),
            xi: xi.clone(),
            phi,
            segment: it.segment,
            report,
            center_weights: it.orbit.alpha_c,
        })
    }

    pub fn phi_at(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve(omega, xi)?.phi)
    }

    pub fn h_at(&self, n: i64, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<DVector<f64>> {
        let point = self.solve(omega, xi)?;
        point.h_at(n).cloned().ok_or_else(|| {
            Error::InvalidInput(format!("|n| = {} exceeds the solver horizon {}", n.abs(), self.config.horizon))
        })
    }

    /// Change produced by one more sweep applied to a solved point.
    pub fn residual(&self, point: &GraphPoint) -> Result<f64> {
        let orbit = Orbit::build(&self.model, &point.omega, point.horizon())?;
        let next = orbit.sweep(&self.model, &point.xi, &point.segment);
        Ok(orbit.distance(&self.model, &next, &point.segment))
    }

    /// All successive changes of the iteration at `(ω, ξ)`, without any
    /// convergence verdict.
    pub fn deltas(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<Vec<f64>> {
        Ok(self.iterate(omega, xi)?.deltas)
    }

    fn check_xi(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<()> {
        let d = self.model.dim();
        if xi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: xi.len() });
        }
        let norm = self.model.norm();
        let off = norm.of(&(self.model.project(Subbundle::Center, omega, xi) - xi));
        if off > DYNAMICAL_TOL * (1.0 + norm.of(xi)) {
            return Err(Error::NotInCenterFiber(off));
        }
        Ok(())
    }

    fn iterate(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<Iteration> {
        self.check_xi(omega, xi)?;
        let orbit = Orbit::build(&self.model, omega, self.config.horizon)?;
        let mut segment = linear_segment(&orbit, xi, self.config.horizon);
        let mut deltas = Vec::new();
        for _ in 0..self.config.max_iter {
            let next = orbit.sweep(&self.model, xi, &segment);
            let delta = orbit.distance(&self.model, &next, &segment);
            segment = next;
            deltas.push(delta);
            if delta <= self.config.tol {
                break;
            }
        }
        Ok(Iteration { orbit, segment, deltas })
    }

    /// `M(1+N)‖ξ‖` times the `τ` tails beyond the horizon.
    fn truncation_tail(&self, omega: &OmegaPoint, xi: &DVector<f64>) -> f64 {
        let xi_norm = self.model.norm().of(xi);
        if xi_norm == 0.0 {
            return 0.0;
        }
        let h = self.config.horizon;
        let tails = match &self.model.tail {
            Some(env) => {
                let (m, p) = env.tau_tails(omega, h as f64);
                m + p
            }
            None => match tau_discrete(&self.model, omega, h) {
                Ok(t) => t.tail_minus + t.tail_plus,
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

/// Discrete solve at one point.
pub fn solve_graph_point(
    model: &Model,
    constants: &ContractionConstants,
    omega: &OmegaPoint,
    xi: &DVector<f64>,
    config: &SolverConfig,
) -> Result<GraphPoint> {
    GraphSolution::new(model.clone(), *constants, *config)?.solve(omega, xi)
}

/// `c_j = Φ^{c,j}_ω ξ`, `w_j = 0`.
fn linear_segment(orbit: &Orbit, xi: &DVector<f64>, horizon: usize) -> TrajectorySegment {
    let h = horizon as i64;
    let mut seg = TrajectorySegment::zeros(horizon, xi.len());
    seg.center[horizon] = xi.clone();
    for j in 0..h {
        seg.center[(j + h + 1) as usize] = &orbit.center_fwd[j as usize] * &seg.center[(j + h) as usize];
    }
    for j in (-h + 1..=0).rev() {
        seg.center[(j + h - 1) as usize] = &orbit.center_bwd[(-j) as usize] * &seg.center[(j + h) as usize];
    }
    seg
}

pub(crate) fn xi_scale(model: &Model, xi: &DVector<f64>) -> f64 {
    1.0 + model.norm().of(xi)
}

/// Largest of the last three ratios `δ_{k+1}/δ_k` with both deltas above
/// the noise floor.
pub(crate) fn observed_ratio(deltas: &[f64], scale: f64) -> Option<f64> {
    let floor = NOISE_FACTOR * f64::EPSILON * scale;
    let ratios: Vec<f64> = deltas
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.len() < 3 {
        return None;
    }
    ratios[ratios.len() - 3..].iter().copied().reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::solve_mn;
    use crate::rds::Shape;
    use crate::zoo::{make_tempered_exp, with_admissible_f, TemperedExpParams};

    fn linear_model() -> Model {
        make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Discrete).unwrap()
    }

    fn center_xi(model: &Model, omega: &OmegaPoint, coords: &[f64]) -> DVector<f64> {
        model.lift_center(omega, coords).unwrap()
    }

    #[test]
    fn zero_nonlinearity_is_linear_flow() {
        let model = linear_model();
        let sol = GraphSolution::new(model.clone(), solve_mn(0.0, 0.0).unwrap(), SolverConfig::default()).unwrap();
        let omega = OmegaPoint::scalar(0.3);
        let xi = center_xi(&model, &omega, &[1.5]);
        let p = sol.solve(&omega, &xi).unwrap();
        assert_eq!(p.report.iterations, 1);
        assert_eq!(p.report.q_observed, None);
        assert!(p.phi.amax() <= 1e-14);
        for n in [-7i64, 0, 9] {
            let expected = model.apply_block(Subbundle::Center, n as f64, &omega, &xi).unwrap();
            assert!((p.h_at(n).unwrap() - expected).amax() <= 1e-12);
        }
    }

    #[test]
    fn zero_xi_gives_zero_solution() {
        let model = with_admissible_f(linear_model(), Shape::SmoothSaturation, 1.0).unwrap();
        let sol = GraphSolution::new(model.clone(), solve_mn(0.05, 0.05).unwrap(), SolverConfig::default()).unwrap();
        let omega = OmegaPoint::scalar(-1.0);
        let p = sol.solve(&omega, &DVector::zeros(model.dim())).unwrap();
        assert_eq!(p.phi.amax(), 0.0);
        assert!(p.segment.center.iter().all(|c| c.amax() == 0.0));
    }

    #[test]
    fn rejects_off_fiber_xi() {
        let model = linear_model();
        let sol = GraphSolution::new(model.clone(), solve_mn(0.0, 0.0).unwrap(), SolverConfig::default()).unwrap();
        let x = DVector::from_element(model.dim(), 1.0);
        assert!(matches!(sol.solve(&OmegaPoint::scalar(0.0), &x), Err(Error::NotInCenterFiber(_))));
    }

    #[test]
    fn ratio_needs_three_measurable_steps() {
        assert_eq!(observed_ratio(&[1.0, 0.1], 1.0), None);
        assert_eq!(observed_ratio(&[1.0, 0.5, 0.1, 0.05, 0.0], 1.0), Some(0.5));
    }
}
