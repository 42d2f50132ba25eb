use serde::Serialize;

use crate::error::{Error, Result};

/// The constants `M ∈ [1, 2[` and `N ∈ [0, 1[` tied to the smallness
/// quantities by `σ = (M-1)/(M(1+N))` and `τ = N/(M(1+N))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionConstants {
    pub sigma: f64,
    pub tau: f64,
    pub m_const: f64,
    pub n_const: f64,
    /// Contraction factor `(σ + τ) · max{1 + N, M}` of the fixed-point operator.
    pub q: f64,
    /// `τ = 0`: the growth estimate `N/τ` is unavailable.
    pub degenerate_tau: bool,
}

impl ContractionConstants {
    /// `N/τ = M(1+N)`, the constant of the growth estimate along the manifold.
    pub fn growth_factor(&self) -> Option<f64> {
        (!self.degenerate_tau).then(|| self.n_const / self.tau)
    }

    /// Residuals of the two defining relations.
    pub fn residuals(&self) -> (f64, f64) {
        let (m, n) = (self.m_const, self.n_const);
        let denom = m * (1.0 + n);
        ((self.sigma - (m - 1.0) / denom).abs(), (self.tau - n / denom).abs())
    }
}

/// Solves for `M` and `N`. `M` is the smaller root of
/// `τM² − (1 + τ − σ)M + 1 = 0`, evaluated in the cancellation-free form
/// `2 / (b + sqrt(b² − 4τ))`, which also covers `τ = 0`.
pub fn solve_mn(sigma: f64, tau: f64) -> Result<ContractionConstants> {
    if !(sigma.is_finite() && tau.is_finite()) || sigma < 0.0 || tau < 0.0 {
        return Err(Error::InvalidInput(format!(
            "sigma and tau must be finite and nonnegative (got {sigma}, {tau})"
        )));
    }
    if sigma + tau >= 0.5 {
        return Err(Error::SmallnessViolated(sigma + tau));
    }
    let b = 1.0 + tau - sigma;
    let m = 2.0 / (b + (b * b - 4.0 * tau).sqrt());
    let n = tau * m / (1.0 - tau * m);
    Ok(ContractionConstants {
        sigma,
        tau,
        m_const: m,
        n_const: n,
        q: (sigma + tau) * (1.0 + n).max(m),
        degenerate_tau: tau == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_smallness_gives_identity_constants() {
        let c = solve_mn(0.0, 0.0).unwrap();
        assert_eq!(c.m_const, 1.0);
        assert_eq!(c.n_const, 0.0);
        assert!(c.degenerate_tau);
        assert_eq!(c.growth_factor(), None);
    }

    #[test]
    fn worked_values() {
        // Roots of 0.1 M² − M + 1 = 0 and 0.15 M² − M + 1 = 0.
        let c = solve_mn(0.1, 0.1).unwrap();
        let m = (1.0 - (1.0f64 - 0.4).sqrt()) / 0.2;
        assert!((c.m_const - m).abs() < 1e-14);
        assert!((c.m_const - 1.1270167).abs() < 1e-6);
        assert!((c.n_const - 0.1270167).abs() < 1e-6);
        let c = solve_mn(0.15, 0.15).unwrap();
        assert!((c.m_const - 1.2251482).abs() < 1e-6);
        assert!((c.n_const - (c.m_const - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_tau_limit() {
        let c = solve_mn(0.3, 0.0).unwrap();
        assert!((c.m_const - 1.0 / 0.7).abs() < 1e-14);
        assert_eq!(c.n_const, 0.0);
        assert!(c.degenerate_tau);
    }

    #[test]
    fn rejects_large_smallness() {
        assert_eq!(solve_mn(0.25, 0.25), Err(Error::SmallnessViolated(0.5)));
        assert!(solve_mn(-0.1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn back_substitution(s in 0.0f64..0.5, frac in 0.0f64..1.0) {
            let total = s * 0.999_999;
            let sigma = total * frac;
            let tau = total - sigma;
            let c = solve_mn(sigma, tau).unwrap();
            let (rs, rt) = c.residuals();
            prop_assert!(rs <= 1e-12 && rt <= 1e-12);
            prop_assert!((1.0..2.0).contains(&c.m_const));
            prop_assert!((0.0..1.0).contains(&c.n_const));
            prop_assert!(c.q < 1.0);
        }
    }
}
