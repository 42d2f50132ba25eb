use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::rds::{Model, OmegaPoint, TimeDomain};

const BACKWARD_TOL: f64 = 1e-15;
const BACKWARD_MAX_ITER: usize = 500;
/// Damping factors below this give up on the backward step.
const MIN_DAMPING: f64 = 1.0 / 64.0;

/// `Ψ^n_ω x` for the discrete system `x ↦ Φ^1_ω x + f_ω(x)`. Negative `n`
/// inverts one step at a time by damped fixed-point iteration.
pub fn psi_simulate(model: &Model, n: i64, omega: &OmegaPoint, x: &DVector<f64>) -> Result<DVector<f64>> {
    if model.time_domain() != TimeDomain::Discrete {
        return Err(Error::InvalidInput("psi_simulate needs a discrete-time model".into()));
    }
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), actual: x.len() });
    }
    let mut y = x.clone();
    if n >= 0 {
        for k in 0..n {
            let w = model.flow(k as f64, omega);
            y = model.cocycle.forward(1.0, &w) * &y + model.eval_f(&w, &y);
        }
    } else {
        for k in (n..0).rev() {
            y = backward_step(model, &model.flow(k as f64, omega), &y)?;
        }
    }
    Ok(y)
}

/// Solves `target = Φ^1_w x + f_w(x)` for `x`.
fn backward_step(model: &Model, w: &OmegaPoint, target: &DVector<f64>) -> Result<DVector<f64>> {
    let inverse = model.full_backward(-1.0, &model.flow(1.0, w))?;
    let norm = model.norm();
    let start = &inverse * target;
    let mut beta = 1.0;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    while beta >= MIN_DAMPING {
        let mut x = start.clone();
        for _ in 0..BACKWARD_MAX_ITER {
            iterations += 1;
            let update = &inverse * (target - model.eval_f(w, &x));
            let next = &x * (1.0 - beta) + update * beta;
            last_change = norm.distance(&next, &x);
            x = next;
            if !last_change.is_finite() {
                break;
            }
            if last_change <= BACKWARD_TOL * (1.0 + norm.of(&x)) {
                return Ok(x);
            }
        }
        beta /= 2.0;
    }
    Err(Error::NonConvergence { iterations, residual: last_change })
}

/// Upper bound on the Lipschitz constant of `Ψ^n_ω`: products of
/// `‖Φ^1‖ + Lip(f)` forward and of `‖Φ^{-1}‖/(1 − ‖Φ^{-1}‖Lip(f))` backward.
pub fn lipschitz_amplification(model: &Model, n: i64, omega: &OmegaPoint) -> Result<f64> {
    let norm = model.norm();
    let mut a = 1.0;
    if n >= 0 {
        for k in 0..n {
            let w = model.flow(k as f64, omega);
            a *= norm.operator(&model.cocycle.forward(1.0, &w)) + model.lip(&w);
        }
    } else {
        for k in (n..0).rev() {
            let w = model.flow(k as f64, omega);
            let inv = norm.operator(&model.full_backward(-1.0, &model.flow(1.0, &w))?);
            let contraction = inv * model.lip(&w);
            if contraction >= 1.0 {
                return Ok(f64::INFINITY);
            }
            a *= inv / (1.0 - contraction);
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::{Shape, Subbundle};
    use crate::zoo::{make_r4_psi, make_tempered_exp, with_admissible_f, R4Params, TemperedExpParams};
    use proptest::prelude::*;

    fn model() -> Model {
        let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Discrete).unwrap();
        with_admissible_f(m, Shape::ComponentwiseSine, 1.0).unwrap()
    }

    #[test]
    fn zero_steps_is_identity() {
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_eq!(psi_simulate(&model(), 0, &OmegaPoint::scalar(0.7), &x).unwrap(), x);
    }

    #[test]
    fn linear_case_matches_cocycle() {
        let m = make_r4_psi(&R4Params::default(), TimeDomain::Discrete).unwrap();
        let omega = OmegaPoint::scalar(0.4);
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        for n in [-3i64, 4] {
            let mut expected = DVector::zeros(4);
            for sub in Subbundle::ALL {
                expected += m.apply_block(sub, n as f64, &omega, &x).unwrap();
            }
            let got = psi_simulate(&m, n, &omega, &x).unwrap();
            assert!((got - expected).amax() <= 1e-12);
        }
    }

    #[test]
    fn backward_inverts_forward() {
        let m = model();
        let omega = OmegaPoint::scalar(-0.2);
        let x = DVector::from_vec(vec![0.3, -0.4, 0.8]);
        let y = psi_simulate(&m, 3, &omega, &x).unwrap();
        let back = psi_simulate(&m, -3, &m.flow(3.0, &omega), &y).unwrap();
        assert!((back - x).amax() <= 1e-12);
    }

    proptest! {
        #[test]
        fn two_parameter_property(
            n in -4i64..5, k in -4i64..5, w in -3.0f64..3.0,
            x in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let m = model();
            let omega = OmegaPoint::scalar(w);
            let x = DVector::from_vec(x);
            let direct = psi_simulate(&m, n + k, &omega, &x).unwrap();
            let first = psi_simulate(&m, k, &omega, &x).unwrap();
            let composed = psi_simulate(&m, n, &m.flow(k as f64, &omega), &first).unwrap();
            prop_assert!((direct - composed).amax() <= 1e-10);
        }
    }
}
