//! Ready-made models: tempered exponential trichotomies, the R⁴ ψ-model
//! with exponential, integral, summable and polynomial rates, and
//! nonlinearities that respect each corollary's Lipschitz budget.

mod r4;
mod rates;
mod tempered;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use r4::{r4_projection, R4Bounds, R4Cocycle};
pub use rates::{FlowMap, OscillatingRates, QuotientRates, RateField};
pub use tempered::{make_tempered_exp, DiagonalCocycle, SubbundleDims, TemperedBounds, TemperedExpParams};

use crate::error::{Error, Result};
use crate::rates::{CorollaryTag, ExponentialEnvelope, ExponentialRates, HypothesisData, PsiRates, Rate, RateFamily};
use crate::rds::{
    CircleRotation, DrivingSystem, HorizontalFlow, Model, Nonlinearity, OmegaPoint, ScalarField, ScaledShape, Shape,
    Shift, TimeDomain,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrivingKind {
    #[default]
    Shift,
    /// Golden-ratio rotation; compact and recurrent, so no positive `G`
    /// is summable along its orbits.
    Circle,
}

impl DrivingKind {
    pub fn build(self, domain: TimeDomain) -> Arc<dyn DrivingSystem> {
        match self {
            DrivingKind::Shift => Arc::new(Shift { domain, radius: 5.0 }),
            DrivingKind::Circle => Arc::new(CircleRotation::golden(domain)),
        }
    }
}

/// `c` in `G = c 3^{−|x|}`: orbit sums are at most `3c` in discrete time
/// and orbit integrals at most `2c/ln 3` in continuous time.
pub fn default_g_scale(domain: TimeDomain) -> f64 {
    match domain {
        TimeDomain::Discrete => 1.0 / 6.0,
        TimeDomain::Continuous => 0.5,
    }
}

pub fn default_g(scale: f64) -> ScalarField {
    Arc::new(move |w: &OmegaPoint| scale * 3f64.powf(-w.x().abs()))
}

/// Weight `K` of the R⁴ model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KSpec {
    Constant { value: f64 },
    /// `K(x) = 1 + κ/(1 + x²)`: bounded, tempered and nonconstant.
    Bump { kappa: f64 },
}

impl KSpec {
    fn check(self) -> Result<()> {
        let bad = match self {
            KSpec::Constant { value } => (!(value >= 1.0)).then_some(("K >= 1", value - 1.0)),
            KSpec::Bump { kappa } => (!(kappa >= 0.0)).then_some(("kappa >= 0", kappa)),
        };
        match bad {
            Some((inequality, margin)) => Err(Error::Precondition { inequality: inequality.into(), margin }),
            None => Ok(()),
        }
    }

    pub fn max(self) -> f64 {
        match self {
            KSpec::Constant { value } => value,
            KSpec::Bump { kappa } => 1.0 + kappa,
        }
    }

    pub fn field(self) -> ScalarField {
        match self {
            KSpec::Constant { value } => Arc::new(move |_| value),
            KSpec::Bump { kappa } => Arc::new(move |w| 1.0 + kappa / (1.0 + w.x() * w.x())),
        }
    }

    /// Derivative of `t ↦ K(θ^t ω)` at `t = 0` for translation drivings.
    pub fn derivative(self) -> ScalarField {
        match self {
            KSpec::Constant { .. } => Arc::new(|_| 0.0),
            KSpec::Bump { kappa } => Arc::new(move |w| {
                let x = w.x();
                -2.0 * kappa * x / (1.0 + x * x).powi(2)
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R4Rates {
    /// `ψ^ℓ(t) = e^{λ^ℓ t}`.
    Exponential,
    /// `λ^ℓ(ω) = λ^ℓ + ε sin(x)` integrated (continuous) or summed (discrete)
    /// along the orbit.
    Oscillating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct R4Params {
    pub lambda_c_upper: f64,
    pub lambda_c_lower: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub rates: R4Rates,
    pub amplitude: f64,
    pub k: KSpec,
    pub delta: f64,
    pub g_scale: Option<f64>,
}

impl Default for R4Params {
    fn default() -> Self {
        R4Params {
            lambda_c_upper: 0.1,
            lambda_c_lower: -0.1,
            lambda_s: -1.0,
            lambda_u: 1.0,
            rates: R4Rates::Exponential,
            amplitude: 0.05,
            k: KSpec::Bump { kappa: 0.5 },
            delta: 0.15,
            g_scale: None,
        }
    }
}

impl R4Params {
    fn base(&self) -> ExponentialRates {
        ExponentialRates {
            c_upper: self.lambda_c_upper,
            c_lower: self.lambda_c_lower,
            s: self.lambda_s,
            u: self.lambda_u,
        }
    }
}

/// The R⁴ ψ-model over the shift.
pub fn make_r4_psi(params: &R4Params, domain: TimeDomain) -> Result<Model> {
    params.k.check()?;
    let base = params.base();
    if base.c_upper < base.c_lower {
        return Err(Error::Precondition {
            inequality: "psi_c_upper(t) >= psi_c_lower(t) for t >= 0".into(),
            margin: base.c_upper - base.c_lower,
        });
    }
    let (psi, family, tag, spread): (Arc<dyn PsiRates>, RateFamily, CorollaryTag, f64) = match params.rates {
        R4Rates::Exponential => {
            let tag = if domain == TimeDomain::Discrete { CorollaryTag::PsiDisc } else { CorollaryTag::PsiCont };
            (Arc::new(base), RateFamily::Exponential(base), tag, 0.0)
        }
        R4Rates::Oscillating => {
            if params.amplitude != 0.0 && base.c_upper - base.c_lower < 2.0 * params.amplitude.abs() {
                // ψ̄^c ≥ ψ̲^c for t >= 0 needs the exponent gap to dominate the oscillation.
                return Err(Error::Precondition {
                    inequality: "lambda_c_upper - lambda_c_lower >= 2 |amplitude|".into(),
                    margin: base.c_upper - base.c_lower - 2.0 * params.amplitude.abs(),
                });
            }
            let r = OscillatingRates { base, amplitude: params.amplitude, domain };
            let tag =
                if domain == TimeDomain::Discrete { CorollaryTag::SummableExp } else { CorollaryTag::IntegralExp };
            let spread = 2.0 * r.primitive_range() * params.amplitude.abs();
            let p: Arc<dyn PsiRates> = Arc::new(r);
            (p.clone(), RateFamily::Psi(p), tag, spread)
        }
    };
    let g_scale = params.g_scale.unwrap_or(default_g_scale(domain));
    let k = params.k.field();
    let driving: Arc<dyn DrivingSystem> = Arc::new(Shift { domain, radius: 5.0 });
    let k_max = params.k.max();
    // Budget caps: δ/K·G <= δc in continuous time, δ/K(θω)·ψ̄^c(1)G in discrete time.
    let cap = match domain {
        TimeDomain::Continuous => params.delta * g_scale,
        TimeDomain::Discrete => params.delta * g_scale * (base.c_upper + 0.5 * spread).exp(),
    };
    let envelope = ExponentialEnvelope {
        domain,
        prefactor: k_max * k_max * spread.exp(),
        lip_bound: cap.max(0.0),
        lambda_s: base.s,
        lambda_u: base.u,
        gap_minus: base.c_lower - base.s,
        gap_plus: base.u - base.c_upper,
    };
    let data = HypothesisData {
        tag,
        delta: params.delta,
        gamma: None,
        k: k.clone(),
        d_k: Some(params.k.derivative()),
        g: default_g(g_scale),
        tempering: None,
        rates: family,
        envelope: (envelope.gap_minus > 0.0 && envelope.gap_plus > 0.0).then_some(envelope),
    };
    let name = match params.rates {
        R4Rates::Exponential if domain == TimeDomain::Discrete => "r4-psi-disc",
        R4Rates::Exponential => "r4-psi-cont",
        R4Rates::Oscillating if domain == TimeDomain::Discrete => "r4-summable-exp",
        R4Rates::Oscillating => "r4-integral-exp",
    };
    Ok(Model::new(
        name,
        driving.clone(),
        Arc::new(R4Cocycle { driving, psi: psi.clone(), k: k.clone() }),
        Arc::new(R4Bounds { psi, k }),
    )
    .with_hypotheses(data))
}

/// Parameters of the polynomial example over the horizontal flow:
/// `λ^ℓ(x, y) = (1 + x²)^{−(1+y²) ξ_ℓ}`, `K(x, y) = C (1 + x²)^{(1+y²) ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolynomialParams {
    pub c: f64,
    pub epsilon: f64,
    pub xi_c_upper: f64,
    pub xi_c_lower: f64,
    pub xi_s: f64,
    pub xi_u: f64,
    pub delta: f64,
    pub g_scale: Option<f64>,
}

impl Default for PolynomialParams {
    fn default() -> Self {
        PolynomialParams {
            c: 1.0,
            epsilon: 0.0,
            xi_c_upper: 0.0,
            xi_c_lower: 0.0,
            xi_s: 1.0,
            xi_u: 1.0,
            delta: 0.15,
            g_scale: None,
        }
    }
}

impl PolynomialParams {
    pub fn xi(&self, rate: Rate) -> f64 {
        match rate {
            Rate::CenterUpper => self.xi_c_upper,
            Rate::CenterLower => self.xi_c_lower,
            Rate::Stable => self.xi_s,
            Rate::Unstable => self.xi_u,
        }
    }
}

/// The polynomial example realised on the R⁴ ψ-model with quotient rates.
///
/// The center bound is `K max{ψ̄^c, ψ̲^c}`, which equals the displayed
/// two-sided bound when `ξ̄^c = ξ̲^c`. Only structural preconditions are
/// enforced here; the corollary's rate ordering changes sign with `x` and
/// is left to [`crate::rates::check_corollary`].
pub fn make_polynomial(params: &PolynomialParams, domain: TimeDomain) -> Result<Model> {
    if !(params.c >= 1.0) {
        return Err(Error::Precondition { inequality: "C >= 1".into(), margin: params.c - 1.0 });
    }
    if !(params.epsilon >= 0.0) {
        return Err(Error::Precondition { inequality: "epsilon >= 0".into(), margin: params.epsilon });
    }
    let p = *params;
    let lambda: RateField = Arc::new(move |r, w| (1.0 + w.x() * w.x()).powf(-(1.0 + w.y() * w.y()) * p.xi(r)));
    let d_lambda: RateField = Arc::new(move |r, w| {
        let (x, e) = (w.x(), -(1.0 + w.y() * w.y()) * p.xi(r));
        e * 2.0 * x * (1.0 + x * x).powf(e - 1.0)
    });
    let driving: Arc<dyn DrivingSystem> = Arc::new(HorizontalFlow::new(domain));
    let flow_driving = driving.clone();
    let psi: Arc<dyn PsiRates> =
        Arc::new(QuotientRates { lambda, d_lambda, flow: Arc::new(move |t, w| flow_driving.flow(t, w)) });
    let k: ScalarField = Arc::new(move |w| p.c * (1.0 + w.x() * w.x()).powf((1.0 + w.y() * w.y()) * p.epsilon));
    let d_k: ScalarField = Arc::new(move |w| {
        let (x, e) = (w.x(), (1.0 + w.y() * w.y()) * p.epsilon);
        p.c * e * 2.0 * x * (1.0 + x * x).powf(e - 1.0)
    });
    let tag = if domain == TimeDomain::Discrete { CorollaryTag::NonexpDisc } else { CorollaryTag::NonexpCont };
    let data = HypothesisData {
        tag,
        delta: params.delta,
        gamma: None,
        k: k.clone(),
        d_k: Some(d_k),
        g: default_g(params.g_scale.unwrap_or(default_g_scale(domain))),
        tempering: None,
        rates: RateFamily::Psi(psi.clone()),
        envelope: None,
    };
    let name = if domain == TimeDomain::Discrete { "polynomial-disc" } else { "polynomial" };
    Ok(Model::new(
        name,
        driving.clone(),
        Arc::new(R4Cocycle { driving, psi: psi.clone(), k: k.clone() }),
        Arc::new(R4Bounds { psi, k }),
    )
    .with_hypotheses(data))
}

/// `f(ω, x) = fraction · budget(ω) · s(x)` for the model's corollary.
pub fn make_admissible_f(model: &Model, shape: Shape, budget_fraction: f64) -> Result<Arc<dyn Nonlinearity>> {
    if !(0.0..=1.0).contains(&budget_fraction) {
        return Err(Error::InvalidInput(format!("budget fraction must lie in [0, 1] (got {budget_fraction})")));
    }
    budget_multiple_f(model, shape, budget_fraction)
}

fn budget_multiple_f(model: &Model, shape: Shape, budget_fraction: f64) -> Result<Arc<dyn Nonlinearity>> {
    let data = model
        .hypotheses
        .clone()
        .ok_or_else(|| Error::MissingData(format!("admissible nonlinearity for `{}`", model.name)))?;
    let driving = model.driving.clone();
    // Surface missing data now rather than inside the closure.
    data.terms(driving.as_ref(), &OmegaPoint::new(vec![0.0; driving.coord_dim()]))?;
    if budget_fraction == 0.0 {
        return Ok(Arc::new(ScaledShape::new(shape, |_| 0.0)));
    }
    Ok(Arc::new(ScaledShape::new(shape, move |w| {
        budget_fraction * data.terms(driving.as_ref(), w).map(|t| t.budget).unwrap_or(0.0)
    })))
}

/// Attaches an admissible nonlinearity together with the model's tail
/// envelope scaled to the same fraction.
pub fn with_admissible_f(model: Model, shape: Shape, budget_fraction: f64) -> Result<Model> {
    let f = make_admissible_f(&model, shape, budget_fraction)?;
    attach(model, f, budget_fraction)
}

/// Like [`with_admissible_f`] but accepts any nonnegative multiple of the
/// budget, so the resulting `f` may break the corollary on purpose.
pub fn with_budget_multiple(model: Model, shape: Shape, multiple: f64) -> Result<Model> {
    if !(multiple.is_finite() && multiple >= 0.0) {
        return Err(Error::InvalidInput(format!("budget multiple must be finite and nonnegative (got {multiple})")));
    }
    let f = budget_multiple_f(&model, shape, multiple)?;
    attach(model, f, multiple)
}

fn attach(model: Model, f: Arc<dyn Nonlinearity>, budget_fraction: f64) -> Result<Model> {
    let envelope = model.hypotheses.as_ref().and_then(|d| d.envelope);
    let model = model.with_nonlinearity(f);
    Ok(match envelope {
        Some(e) => model.with_tail(Arc::new(e.scaled(budget_fraction))),
        None => model,
    })
}

/// A zoo model addressed by name, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum SystemSpec {
    TemperedDisc(#[serde(default)] TemperedExpParams),
    TemperedCont(#[serde(default)] TemperedExpParams),
    R4PsiDisc(#[serde(default)] R4Params),
    R4PsiCont(#[serde(default)] R4Params),
    PolynomialDisc(#[serde(default)] PolynomialParams),
    Polynomial(#[serde(default)] PolynomialParams),
}

impl SystemSpec {
    pub fn time_domain(&self) -> TimeDomain {
        match self {
            SystemSpec::TemperedDisc(_) | SystemSpec::R4PsiDisc(_) | SystemSpec::PolynomialDisc(_) => {
                TimeDomain::Discrete
            }
            _ => TimeDomain::Continuous,
        }
    }

    pub fn build(&self) -> Result<Model> {
        let domain = self.time_domain();
        match self {
            SystemSpec::TemperedDisc(p) | SystemSpec::TemperedCont(p) => make_tempered_exp(p, domain),
            SystemSpec::R4PsiDisc(p) | SystemSpec::R4PsiCont(p) => make_r4_psi(p, domain),
            SystemSpec::PolynomialDisc(p) | SystemSpec::Polynomial(p) => make_polynomial(p, domain),
        }
    }
}
