use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::psi::{lipschitz_amplification, psi_simulate};
use super::{observed_ratio, xi_scale, GraphPoint, GraphSolution, ROUNDING_FLOOR};
use crate::error::{Error, Result};
use crate::rds::{OmegaPoint, Subbundle};

/// Allowance added to the theoretical contraction factor when judging the
/// observed ratio of successive changes.
pub const CONTRACTION_LOOSENING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub n: i64,
    /// `‖y^h − φ_{θ^nω}(y^c)‖` for `y = Ψ^n_ω(ξ + φ_ω(ξ))`.
    pub defect: f64,
    pub bound: f64,
    /// `‖y^c − h_{n,ω}(ξ)‖`.
    pub center_mismatch: f64,
    pub center_bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub n: i64,
    pub lhs: f64,
    /// `(N/τ) α^c_{n,ω} ‖ξ − ξ'‖`; absent when `τ = 0`.
    pub rhs: Option<f64>,
    pub slack: f64,
    /// `rhs + slack − lhs`.
    pub margin: Option<f64>,
    pub suppressed: bool,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.margin.is_none_or(|m| m >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub samples: usize,
    pub worst_ratio: f64,
    pub n_const: f64,
    /// Largest `ratio − N − slack` over the samples; nonpositive on success.
    pub worst_excess: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub iterations: usize,
    pub q_observed: Option<f64>,
    pub q_theory: f64,
    pub bound: f64,
    /// Too few measurable iterations to estimate a ratio.
    pub degenerate: bool,
    pub passed: bool,
}

fn hyperbolic_projector(p_c: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(p_c.nrows(), p_c.ncols()) - p_c
}

/// Maps the graph point forward (or backward) by `Ψ^n` and measures its
/// distance to the graph over `θ^nω`, computed by a fresh solve.
pub fn verify_invariance(solution: &GraphSolution, point: &GraphPoint, n: i64, tol: f64) -> Result<InvarianceReport> {
    let model = &solution.model;
    let h = point.horizon() as i64;
    if n.abs() > h {
        return Err(Error::InvalidInput(format!("|n| = {} exceeds the solver horizon {h}", n.abs())));
    }
    let norm = model.norm();
    let x = &point.xi + &point.phi;
    let y = psi_simulate(model, n, &point.omega, &x)?;
    let target = model.drive(n as f64, &point.omega)?;
    let p_c = model.projector(Subbundle::Center, &target);
    let y_c = &p_c * &y;
    let y_h = &y - &y_c;
    let image = solution.solve(&target, &y_c)?;

    let amplified = lipschitz_amplification(model, n, &point.omega)? * point.phi_error();
    let rounding = ROUNDING_FLOOR * (1.0 + norm.of(&y));
    let spread = norm.operator(&hyperbolic_projector(&p_c)) + solution.constants.n_const * norm.operator(&p_c);
    let defect = norm.distance(&y_h, &image.phi);
    let bound = tol + spread * amplified + image.phi_error() + rounding;

    let h_n = point.h_at(n).expect("n checked against the horizon");
    let center_mismatch = norm.distance(&y_c, h_n);
    let center_bound = tol + norm.operator(&p_c) * amplified + point.h_error(n).unwrap_or(0.0) + rounding;
    Ok(InvarianceReport {
        n,
        defect,
        bound,
        center_mismatch,
        center_bound,
        passed: defect <= bound && center_mismatch <= center_bound,
    })
}

/// `‖Ψ^n(ξ, φ(ξ)) − Ψ^n(ξ', φ(ξ'))‖ <= (N/τ) α^c_{n,ω} ‖ξ − ξ'‖`.
pub fn verify_growth_bound(
    solution: &GraphSolution,
    omega: &OmegaPoint,
    xi: &DVector<f64>,
    xi2: &DVector<f64>,
    n: i64,
) -> Result<GrowthReport> {
    let model = &solution.model;
    let norm = model.norm();
    let a = solution.solve(omega, xi)?;
    let b = solution.solve(omega, xi2)?;
    let ya = psi_simulate(model, n, omega, &(&a.xi + &a.phi))?;
    let yb = psi_simulate(model, n, omega, &(&b.xi + &b.phi))?;
    let lhs = norm.distance(&ya, &yb);
    let slack = lipschitz_amplification(model, n, omega)? * (a.phi_error() + b.phi_error())
        + ROUNDING_FLOOR * (xi_scale(model, xi) + xi_scale(model, xi2));
    let rhs = solution.constants.growth_factor().map(|g| {
        g * model.alpha(Subbundle::Center, n as f64, omega) * norm.distance(xi, xi2)
    });
    Ok(GrowthReport {
        n,
        lhs,
        rhs,
        slack,
        margin: rhs.map(|r| r + slack - lhs),
        suppressed: rhs.is_none(),
    })
}

/// Worst `‖φ_ω(ξ) − φ_ω(ξ')‖ / ‖ξ − ξ'‖` against `N` plus the solver slack.
pub fn verify_phi_lipschitz(
    solution: &GraphSolution,
    samples: &[(OmegaPoint, DVector<f64>, DVector<f64>)],
) -> Result<LipschitzReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("verify_phi_lipschitz needs at least one sample".into()));
    }
    let norm = solution.model.norm();
    let n_const = solution.constants.n_const;
    let mut worst_ratio = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut counted = 0;
    for (omega, xi, xi2) in samples {
        let dist = norm.distance(xi, xi2);
        if dist == 0.0 {
            continue;
        }
        let a = solution.solve(omega, xi)?;
        let b = solution.solve(omega, xi2)?;
        let ratio = norm.distance(&a.phi, &b.phi) / dist;
        let slack = (a.phi_error() + b.phi_error()) / dist;
        worst_ratio = worst_ratio.max(ratio);
        worst_excess = worst_excess.max(ratio - n_const - slack);
        counted += 1;
    }
    if counted == 0 {
        worst_excess = 0.0;
    }
    Ok(LipschitzReport { samples: counted, worst_ratio, n_const, worst_excess, passed: worst_excess <= 0.0 })
}

/// Observed contraction of the iteration against `(σ+τ)·max{1+N, M}`.
pub fn contraction_diagnostic(solution: &GraphSolution, omega: &OmegaPoint, xi: &DVector<f64>) -> Result<ContractionReport> {
    let deltas = solution.deltas(omega, xi)?;
    Ok(ContractionReport::from_deltas(&deltas, xi_scale(&solution.model, xi), solution.constants.q))
}

impl ContractionReport {
    /// Judges a sequence of successive changes; `scale` is `1 + ‖ξ‖`.
    pub fn from_deltas(deltas: &[f64], scale: f64, q_theory: f64) -> Self {
        let q_observed = observed_ratio(deltas, scale);
        let bound = q_theory + CONTRACTION_LOOSENING;
        ContractionReport {
            iterations: deltas.len(),
            q_observed,
            q_theory,
            bound,
            degenerate: q_observed.is_none(),
            passed: q_observed.is_none_or(|q| q <= bound),
        }
    }
}
