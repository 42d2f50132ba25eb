//! Brute-force references. The truncated Lyapunov-Perron map is evaluated
//! with its defining sums term by term, and iterated plainly until the
//! iterate stops changing. This shares no recursion with the solver.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rates::{estimate_rates, solve_mn, RatesConfig};
use crate::rds::{
    LinearCocycle, Model, OmegaPoint, ScaledShape, Shape, Shift, Subbundle, TimeDomain, TrichotomyBounds,
};
use crate::solver::{GraphSolution, SolverConfig};

/// Plain iterations allowed before the oracle gives up on stagnation.
pub const ORACLE_MAX_ITER: usize = 100_000;

/// `S diag(e^{λ_c t}, e^{λ_s t}, e^{λ_u t}) S^{-1}` on `R^3`, constant in `ω`.
#[derive(Debug, Clone)]
pub struct ConjugatedCocycle {
    pub s: DMatrix<f64>,
    pub s_inv: DMatrix<f64>,
    /// `[λ_c, λ_s, λ_u]`.
    pub exponents: [f64; 3],
}

impl ConjugatedCocycle {
    pub fn new(s: DMatrix<f64>, exponents: [f64; 3]) -> Result<Self> {
        if s.shape() != (3, 3) {
            return Err(Error::DimensionMismatch { expected: 3, actual: s.nrows() });
        }
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("conjugating matrix is singular".into()))?;
        Ok(ConjugatedCocycle { s, s_inv, exponents })
    }

    fn slot(sub: Subbundle) -> usize {
        match sub {
            Subbundle::Center => 0,
            Subbundle::Stable => 1,
            Subbundle::Unstable => 2,
        }
    }

    fn conjugate(&self, diag: [f64; 3]) -> DMatrix<f64> {
        &self.s * DMatrix::from_diagonal(&DVector::from_row_slice(&diag)) * &self.s_inv
    }

    /// `‖S‖ ‖S^{-1}‖` in the max norm.
    pub fn condition(&self) -> f64 {
        let norm = self.norm();
        norm.operator(&self.s) * norm.operator(&self.s_inv)
    }
}

impl LinearCocycle for ConjugatedCocycle {
    fn dim(&self) -> usize {
        3
    }

    fn forward(&self, t: f64, _omega: &OmegaPoint) -> DMatrix<f64> {
        self.conjugate(self.exponents.map(|l| (l * t).exp()))
    }

    fn projector(&self, sub: Subbundle, _omega: &OmegaPoint) -> DMatrix<f64> {
        let mut d = [0.0; 3];
        d[Self::slot(sub)] = 1.0;
        self.conjugate(d)
    }

    fn backward(&self, _sub: Subbundle, t: f64, omega: &OmegaPoint) -> Option<DMatrix<f64>> {
        Some(self.forward(t, omega))
    }

    fn center_basis(&self, _omega: &OmegaPoint) -> DMatrix<f64> {
        self.s.columns(0, 1).into_owned()
    }

    fn center_dim(&self) -> usize {
        1
    }
}

/// `α = ‖S‖‖S^{-1}‖ e^{λ t}`, exact up to the conditioning factor.
#[derive(Debug, Clone)]
pub struct ConjugatedBounds {
    pub kappa: f64,
    pub exponents: [f64; 3],
}

impl TrichotomyBounds for ConjugatedBounds {
    fn alpha(&self, sub: Subbundle, t: f64, _omega: &OmegaPoint) -> f64 {
        self.kappa * (self.exponents[ConjugatedCocycle::slot(sub)] * t).exp()
    }
}

/// A random three-dimensional instance with one direction per subbundle
/// and `Lip(f_{θ^kω})` supported on `|k| <= 1`.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub seed: u64,
    pub model: Model,
    pub omega: OmegaPoint,
    pub xi: DVector<f64>,
    pub horizon: usize,
    pub lip: f64,
}

pub fn tiny_instance(seed: u64) -> Result<TinyInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exponents = [
        rng.random_range(-0.1..0.1),
        rng.random_range(-1.5..-0.8),
        rng.random_range(0.8..1.5),
    ];
    let s = DMatrix::from_fn(3, 3, |i, j| {
        let off: f64 = rng.random_range(-0.2..0.2);
        if i == j { 1.0 + off } else { off }
    });
    let cocycle = ConjugatedCocycle::new(s, exponents)?;
    let kappa = cocycle.condition();
    let lip: f64 = rng.random_range(0.005..0.02);
    let shape = if rng.random_bool(0.5) { Shape::ComponentwiseSine } else { Shape::SmoothSaturation };
    let x0: f64 = rng.random_range(-0.5..0.5);
    let horizon = rng.random_range(2..=4);
    let scale: f64 = rng.random_range(-2.0..2.0);

    let omega = OmegaPoint::scalar(x0);
    let xi = cocycle.center_basis(&omega).column(0) * scale;
    let model = Model::new(
        format!("tiny-{seed}"),
        Arc::new(Shift::discrete()),
        Arc::new(cocycle),
        Arc::new(ConjugatedBounds { kappa, exponents }),
    )
    .with_nonlinearity(Arc::new(ScaledShape::new(shape, move |w| if w.x().abs() <= 1.5 { lip } else { 0.0 })));
    Ok(TinyInstance { seed, model, omega, xi, horizon, lip })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub center: Vec<DVector<f64>>,
    pub hyper: Vec<DVector<f64>>,
    pub iterations: usize,
    /// Max-norm change of the final iteration; zero at exact stagnation.
    pub last_change: f64,
}

impl OracleSolution {
    pub fn phi(&self) -> &DVector<f64> {
        &self.hyper[self.hyper.len() / 2]
    }
}

/// Iterates the truncated map with term-by-term sums until the iterate
/// repeats exactly or `max_iter` is reached.
pub fn brute_force(model: &Model, omega: &OmegaPoint, xi: &DVector<f64>, horizon: usize, max_iter: usize) -> Result<OracleSolution> {
    if model.time_domain() != TimeDomain::Discrete {
        return Err(Error::InvalidInput("the oracle needs a discrete-time model".into()));
    }
    let h = horizon as i64;
    let d = model.dim();
    let len = 2 * horizon + 1;
    let at = |j: i64| model.flow(j as f64, omega);
    // blocks[sub][j + H][k + H] = Φ^{sub, j−k−1}_{θ^{k+1}ω}
    let mut blocks = Vec::new();
    for sub in Subbundle::ALL {
        let mut rows = Vec::with_capacity(len);
        for j in -h..=h {
            let mut row = Vec::with_capacity(len);
            for k in -h..=h {
                row.push(model.block(sub, (j - k - 1) as f64, &at(k + 1))?);
            }
            rows.push(row);
        }
        blocks.push(rows);
    }
    let linear: Vec<DVector<f64>> = (-h..=h)
        .map(|j| model.apply_block(Subbundle::Center, j as f64, omega, xi))
        .collect::<Result<_>>()?;
    let idx = |j: i64| (j + h) as usize;

    let mut center = linear.clone();
    let mut hyper = vec![DVector::zeros(d); len];
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let f: Vec<DVector<f64>> = (-h..=h).map(|j| model.eval_f(&at(j), &(&center[idx(j)] + &hyper[idx(j)]))).collect();
        let term = |sub: usize, j: i64, k: i64| &blocks[sub][idx(j)][idx(k)] * &f[idx(k)];
        let mut next_c = linear.clone();
        let mut next_w = vec![DVector::zeros(d); len];
        for j in -h..=h {
            if j >= 1 {
                for k in 0..j {
                    next_c[idx(j)] += term(0, j, k);
                }
            } else if j <= -1 {
                for k in j..=-1 {
                    next_c[idx(j)] -= term(0, j, k);
                }
            }
            for k in -h..j {
                next_w[idx(j)] += term(1, j, k);
            }
            for k in j..=h {
                next_w[idx(j)] -= term(2, j, k);
            }
        }
        last_change = center
            .iter()
            .zip(&next_c)
            .chain(hyper.iter().zip(&next_w))
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        center = next_c;
        hyper = next_w;
        if last_change == 0.0 {
            break;
        }
    }
    Ok(OracleSolution { center, hyper, iterations, last_change })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub seed: u64,
    pub horizon: usize,
    pub sigma: f64,
    pub tau: f64,
    /// Max-norm difference over the whole trajectory segment.
    pub difference: f64,
    pub solver_iterations: usize,
    pub oracle_iterations: usize,
}

/// Solves the tiny instance of `seed` with the solver and with the oracle.
pub fn compare_tiny(seed: u64, tol: f64) -> Result<OracleComparison> {
    let inst = tiny_instance(seed)?;
    let est = estimate_rates(&inst.model, std::slice::from_ref(&inst.omega), &RatesConfig { horizon: 10.0, step: 1.0 })?;
    let constants = solve_mn(est.sigma, est.tau)?;
    let config = SolverConfig { horizon: inst.horizon, tol, max_iter: 500 };
    let point = GraphSolution::new(inst.model.clone(), constants, config)?.solve(&inst.omega, &inst.xi)?;
    let oracle = brute_force(&inst.model, &inst.omega, &inst.xi, inst.horizon, ORACLE_MAX_ITER)?;
    let difference = point
        .segment
        .center
        .iter()
        .zip(&oracle.center)
        .chain(point.segment.hyper.iter().zip(&oracle.hyper))
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    Ok(OracleComparison {
        seed,
        horizon: inst.horizon,
        sigma: est.sigma,
        tau: est.tau,
        difference,
        solver_iterations: point.report.iterations,
        oracle_iterations: oracle.iterations,
    })
}
