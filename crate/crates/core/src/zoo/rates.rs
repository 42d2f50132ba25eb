use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::rates::{ExponentialRates, PsiRates, Rate};
use crate::rds::{OmegaPoint, TimeDomain};

/// `λ^ℓ(ω) = λ0^ℓ + ε sin(x)` accumulated along the orbit:
/// `ψ^ℓ(t, ω) = exp(λ0^ℓ t + ε (P(x + t) − P(x)))`, where `P` is an
/// antiderivative (continuous time) or an antidifference (discrete time)
/// of `sin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatingRates {
    pub base: ExponentialRates,
    pub amplitude: f64,
    pub domain: TimeDomain,
}

impl OscillatingRates {
    fn primitive(&self, x: f64) -> f64 {
        match self.domain {
            TimeDomain::Continuous => -x.cos(),
            // F(x + 1) − F(x) = sin(x).
            TimeDomain::Discrete => -(x - 0.5).cos() / (2.0 * 0.5f64.sin()),
        }
    }

    /// Largest possible value of `|P(a) − P(b)|`.
    pub fn primitive_range(&self) -> f64 {
        match self.domain {
            TimeDomain::Continuous => 2.0,
            TimeDomain::Discrete => 1.0 / 0.5f64.sin(),
        }
    }
}

impl PsiRates for OscillatingRates {
    fn psi(&self, rate: Rate, t: f64, omega: &OmegaPoint) -> f64 {
        let x = omega.x();
        (self.base.get(rate) * t + self.amplitude * (self.primitive(x + t) - self.primitive(x))).exp()
    }

    fn d_psi(&self, rate: Rate, omega: &OmegaPoint) -> Option<f64> {
        (self.domain == TimeDomain::Continuous).then(|| self.base.get(rate) + self.amplitude * omega.x().sin())
    }

    fn lambda(&self, rate: Rate, omega: &OmegaPoint) -> Option<f64> {
        Some(self.base.get(rate) + self.amplitude * omega.x().sin())
    }

    fn d_lambda(&self, _rate: Rate, omega: &OmegaPoint) -> Option<f64> {
        Some(self.amplitude * omega.x().cos())
    }
}

pub type RateField = Arc<dyn Fn(Rate, &OmegaPoint) -> f64 + Send + Sync>;

pub type FlowMap = Arc<dyn Fn(f64, &OmegaPoint) -> OmegaPoint + Send + Sync>;

/// `ψ^ℓ(t, ω) = λ^ℓ(ω)/λ^ℓ(θ^t ω)` for a positive rate variable `λ^ℓ`.
#[derive(Clone)]
pub struct QuotientRates {
    pub lambda: RateField,
    pub d_lambda: RateField,
    pub flow: FlowMap,
}

impl fmt::Debug for QuotientRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuotientRates").finish_non_exhaustive()
    }
}

impl PsiRates for QuotientRates {
    fn psi(&self, rate: Rate, t: f64, omega: &OmegaPoint) -> f64 {
        (self.lambda)(rate, omega) / (self.lambda)(rate, &(self.flow)(t, omega))
    }

    fn d_psi(&self, rate: Rate, omega: &OmegaPoint) -> Option<f64> {
        Some(-(self.d_lambda)(rate, omega) / (self.lambda)(rate, omega))
    }

    fn lambda(&self, rate: Rate, omega: &OmegaPoint) -> Option<f64> {
        Some((self.lambda)(rate, omega))
    }

    fn d_lambda(&self, rate: Rate, omega: &OmegaPoint) -> Option<f64> {
        Some((self.d_lambda)(rate, omega))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(domain: TimeDomain) -> OscillatingRates {
        OscillatingRates {
            base: ExponentialRates { c_upper: 0.1, c_lower: -0.1, s: -1.0, u: 1.0 },
            amplitude: 0.3,
            domain,
        }
    }

    #[test]
    fn oscillating_rates_are_cocycles() {
        for (domain, times) in [
            (TimeDomain::Continuous, [0.7, -1.3, 2.25]),
            (TimeDomain::Discrete, [2.0, -3.0, 5.0]),
        ] {
            let r = rates(domain);
            let w = OmegaPoint::scalar(0.37);
            for &t in &times {
                for &s in &times {
                    let ws = OmegaPoint::scalar(w.x() + s);
                    let lhs = r.psi(Rate::Stable, t + s, &w);
                    let rhs = r.psi(Rate::Stable, t, &ws) * r.psi(Rate::Stable, s, &w);
                    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
                }
            }
            assert_eq!(r.psi(Rate::Unstable, 0.0, &w), 1.0);
        }
    }

    #[test]
    fn discrete_antidifference_sums_lambda() {
        let r = rates(TimeDomain::Discrete);
        let x = -0.8;
        let sum: f64 = (0..4).map(|k| r.lambda(Rate::CenterUpper, &OmegaPoint::scalar(x + k as f64)).unwrap()).sum();
        let psi = r.psi(Rate::CenterUpper, 4.0, &OmegaPoint::scalar(x));
        assert!((psi.ln() - sum).abs() < 1e-13);
    }
}
