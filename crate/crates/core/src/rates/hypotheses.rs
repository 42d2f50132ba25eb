use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rds::{DrivingSystem, Model, OmegaPoint, ScalarField, Subbundle, TimeDomain};

/// Values below this count as decayed in the limit conditions.
pub const DECAY_THRESHOLD: f64 = 1e-3;
/// Horizon of the truncated supremum defining `Λ_{K,γ,ω}` when the model
/// does not supply it in closed form.
pub const TEMPERING_HORIZON: f64 = 100.0;
const CONT_SUP_STEP: f64 = 0.05;
const CONT_G_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorollaryTag {
    TemperedCont,
    PsiCont,
    IntegralExp,
    NonexpCont,
    TemperedDisc,
    PsiDisc,
    SummableExp,
    NonexpDisc,
}

impl CorollaryTag {
    pub const ALL: [CorollaryTag; 8] = [
        CorollaryTag::TemperedCont,
        CorollaryTag::PsiCont,
        CorollaryTag::IntegralExp,
        CorollaryTag::NonexpCont,
        CorollaryTag::TemperedDisc,
        CorollaryTag::PsiDisc,
        CorollaryTag::SummableExp,
        CorollaryTag::NonexpDisc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorollaryTag::TemperedCont => "tempered-cont",
            CorollaryTag::PsiCont => "psi-cont",
            CorollaryTag::IntegralExp => "integral-exp",
            CorollaryTag::NonexpCont => "nonexp-cont",
            CorollaryTag::TemperedDisc => "tempered-disc",
            CorollaryTag::PsiDisc => "psi-disc",
            CorollaryTag::SummableExp => "summable-exp",
            CorollaryTag::NonexpDisc => "nonexp-disc",
        }
    }

    pub fn time_domain(self) -> TimeDomain {
        match self {
            CorollaryTag::TemperedCont
            | CorollaryTag::PsiCont
            | CorollaryTag::IntegralExp
            | CorollaryTag::NonexpCont => TimeDomain::Continuous,
            _ => TimeDomain::Discrete,
        }
    }

    pub fn is_tempered(self) -> bool {
        matches!(self, CorollaryTag::TemperedCont | CorollaryTag::TemperedDisc)
    }
}

impl fmt::Display for CorollaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorollaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorollaryTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rate {
    CenterUpper,
    CenterLower,
    Stable,
    Unstable,
}

impl Rate {
    pub const ALL: [Rate; 4] = [Rate::CenterUpper, Rate::CenterLower, Rate::Stable, Rate::Unstable];

    pub fn label(self) -> &'static str {
        match self {
            Rate::CenterUpper => "c_upper",
            Rate::CenterLower => "c_lower",
            Rate::Stable => "s",
            Rate::Unstable => "u",
        }
    }
}

/// Multiplicative rate cocycles `ψ^ℓ(t+s, ω) = ψ^ℓ(t, θ^s ω) ψ^ℓ(s, ω)`.
///
/// `lambda` is the rate variable of whichever parametrization the model's
/// corollary uses: the exponent for exponential, integral and summable
/// rates, the quotient variable for nonexponential ones.
pub trait PsiRates: Send + Sync + fmt::Debug {
    fn psi(&self, rate: Rate, t: f64, omega: &OmegaPoint) -> f64;

    /// `lim (ψ(h, ω) − 1)/h`.
    fn d_psi(&self, _rate: Rate, _omega: &OmegaPoint) -> Option<f64> {
        None
    }

    fn lambda(&self, _rate: Rate, _omega: &OmegaPoint) -> Option<f64> {
        None
    }

    /// `lim (λ(θ^h ω) − λ(ω))/h`.
    fn d_lambda(&self, _rate: Rate, _omega: &OmegaPoint) -> Option<f64> {
        None
    }
}

/// Constant exponents; `ψ^ℓ(t) = e^{λ^ℓ t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialRates {
    pub c_upper: f64,
    pub c_lower: f64,
    pub s: f64,
    pub u: f64,
}

impl ExponentialRates {
    pub fn get(&self, rate: Rate) -> f64 {
        match rate {
            Rate::CenterUpper => self.c_upper,
            Rate::CenterLower => self.c_lower,
            Rate::Stable => self.s,
            Rate::Unstable => self.u,
        }
    }
}

impl PsiRates for ExponentialRates {
    fn psi(&self, rate: Rate, t: f64, _omega: &OmegaPoint) -> f64 {
        (self.get(rate) * t).exp()
    }

    fn d_psi(&self, rate: Rate, _omega: &OmegaPoint) -> Option<f64> {
        Some(self.get(rate))
    }

    fn lambda(&self, rate: Rate, _omega: &OmegaPoint) -> Option<f64> {
        Some(self.get(rate))
    }

    fn d_lambda(&self, _rate: Rate, _omega: &OmegaPoint) -> Option<f64> {
        Some(0.0)
    }
}

#[derive(Clone)]
pub enum RateFamily {
    Exponential(ExponentialRates),
    Psi(Arc<dyn PsiRates>),
}

impl RateFamily {
    pub fn as_psi(&self) -> Arc<dyn PsiRates> {
        match self {
            RateFamily::Exponential(e) => Arc::new(*e),
            RateFamily::Psi(p) => p.clone(),
        }
    }
}

/// Corollary-specific data carried by zoo models.
#[derive(Clone)]
pub struct HypothesisData {
    pub tag: CorollaryTag,
    pub delta: f64,
    /// Tempering exponent of the tempered corollaries.
    pub gamma: Option<f64>,
    pub k: ScalarField,
    pub d_k: Option<ScalarField>,
    pub g: ScalarField,
    /// Closed-form `Λ_{K,γ,ω}`; otherwise a truncated supremum is used.
    pub tempering: Option<ScalarField>,
    pub rates: RateFamily,
    /// Tail envelope valid for `Lip(f) <= budget`; scaled with the budget
    /// fraction when an admissible nonlinearity is attached.
    pub envelope: Option<super::ExponentialEnvelope>,
}

impl fmt::Debug for HypothesisData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HypothesisData")
            .field("tag", &self.tag)
            .field("delta", &self.delta)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

fn time_grid(domain: TimeDomain, horizon: f64, step: f64) -> Vec<f64> {
    let step = if domain == TimeDomain::Discrete { 1.0 } else { step };
    let n = (horizon / step).round() as i64;
    (-n..=n).map(|i| i as f64 * step).collect()
}

impl HypothesisData {
    fn k_at(&self, omega: &OmegaPoint) -> f64 {
        (self.k)(omega)
    }

    fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or_else(|| Error::MissingData(format!("{} (tempering exponent γ)", self.tag)))
    }

    fn exponents(&self) -> Result<ExponentialRates> {
        match &self.rates {
            RateFamily::Exponential(e) => Ok(*e),
            RateFamily::Psi(_) => Err(Error::MissingData(format!("{} (constant exponents)", self.tag))),
        }
    }

    /// Truncated `sup_t e^{−γ|t|} K(θ^t ω)`.
    pub fn tempering_sup(&self, driving: &dyn DrivingSystem, omega: &OmegaPoint, horizon: f64) -> Result<f64> {
        let gamma = self.gamma()?;
        Ok(time_grid(driving.time_domain(), horizon, CONT_SUP_STEP)
            .into_iter()
            .map(|t| (-gamma * t.abs()).exp() * self.k_at(&driving.flow(t, omega)))
            .fold(0.0, f64::max))
    }

    fn tempering(&self, driving: &dyn DrivingSystem, omega: &OmegaPoint) -> Result<f64> {
        match &self.tempering {
            Some(lam) => Ok(lam(omega)),
            None => self.tempering_sup(driving, omega, TEMPERING_HORIZON),
        }
    }

    /// `d_ψ^ℓ(ω)` as prescribed by the tag: the closed form for ψ-tags,
    /// `λ` for integral rates and `−d_λ/λ` for quotient rates.
    fn d_psi(&self, rate: Rate, omega: &OmegaPoint) -> Result<f64> {
        let psi = self.rates.as_psi();
        let missing = |what: &str| Error::MissingData(format!("{} ({what} for {})", self.tag, rate.label()));
        match self.tag {
            CorollaryTag::IntegralExp => psi.lambda(rate, omega).ok_or_else(|| missing("λ")),
            CorollaryTag::NonexpCont => {
                let l = psi.lambda(rate, omega).ok_or_else(|| missing("λ"))?;
                let dl = psi.d_lambda(rate, omega).ok_or_else(|| missing("d_λ"))?;
                Ok(-dl / l)
            }
            _ => psi.d_psi(rate, omega).ok_or_else(|| missing("d_ψ")),
        }
    }

    /// `ψ^ℓ(1, ω)` as prescribed by the tag.
    fn psi_one(&self, driving: &dyn DrivingSystem, rate: Rate, omega: &OmegaPoint) -> Result<f64> {
        let psi = self.rates.as_psi();
        let missing = || Error::MissingData(format!("{} (λ for {})", self.tag, rate.label()));
        match self.tag {
            CorollaryTag::SummableExp => Ok(psi.lambda(rate, omega).ok_or_else(missing)?.exp()),
            CorollaryTag::NonexpDisc => {
                let here = psi.lambda(rate, omega).ok_or_else(missing)?;
                let there = psi.lambda(rate, &driving.flow(1.0, omega)).ok_or_else(missing)?;
                Ok(here / there)
            }
            _ => Ok(psi.psi(rate, 1.0, omega)),
        }
    }

    fn d_k_over_k(&self, omega: &OmegaPoint) -> Result<f64> {
        let dk = self
            .d_k
            .as_ref()
            .ok_or_else(|| Error::MissingData(format!("{} (d_K)", self.tag)))?;
        Ok(dk(omega) / self.k_at(omega))
    }

    /// All quantities entering the tag's hypotheses at one base point.
    pub fn terms(&self, driving: &dyn DrivingSystem, omega: &OmegaPoint) -> Result<BudgetTerms> {
        if driving.time_domain() != self.tag.time_domain() {
            return Err(Error::InvalidInput(format!(
                "corollary {} needs {:?} time",
                self.tag,
                self.tag.time_domain()
            )));
        }
        let g = (self.g)(omega);
        let k = self.k_at(omega);
        let delta = self.delta;
        match self.tag {
            CorollaryTag::TemperedCont | CorollaryTag::TemperedDisc => {
                let e = self.exponents()?;
                let gamma = self.gamma()?;
                let a = e.c_lower - e.s - gamma;
                let b = e.u - e.c_upper - gamma;
                let lam = self.tempering(driving, omega)?;
                let budget = if self.tag == CorollaryTag::TemperedCont {
                    delta / k * g.min(a / lam).min(b / lam)
                } else {
                    let k1 = self.k_at(&driving.flow(1.0, omega));
                    let t1 = e.c_lower.min(e.c_upper).exp() * g;
                    let t2 = e.u.exp() * (a.exp() - 1.0) / lam;
                    let t3 = e.s.exp() * (1.0 - (-b).exp()) / lam;
                    delta / k1 * t1.min(t2).min(t3)
                };
                Ok(BudgetTerms {
                    a,
                    b,
                    ordering_left: e.u - e.c_upper,
                    ordering_right: e.c_lower - e.s,
                    tempering: Some(lam),
                    budget: budget.max(0.0),
                })
            }
            CorollaryTag::PsiCont | CorollaryTag::IntegralExp | CorollaryTag::NonexpCont => {
                let dkk = self.d_k_over_k(omega)?;
                let d = |r| self.d_psi(r, omega);
                let a = dkk - d(Rate::CenterUpper)? + d(Rate::Unstable)?;
                let b = -dkk + d(Rate::CenterLower)? - d(Rate::Stable)?;
                let budget = delta / k * g.min(a / k).min(b / k);
                Ok(BudgetTerms { a, b, ordering_left: a, ordering_right: b, tempering: None, budget: budget.max(0.0) })
            }
            CorollaryTag::PsiDisc | CorollaryTag::SummableExp | CorollaryTag::NonexpDisc => {
                let k1 = self.k_at(&driving.flow(1.0, omega));
                let p = |r| self.psi_one(driving, r, omega);
                let (pcu, pcl, ps, pu) = (p(Rate::CenterUpper)?, p(Rate::CenterLower)?, p(Rate::Stable)?, p(Rate::Unstable)?);
                let a = pu / k - pcu / k1;
                let b = pcl / k1 - ps / k;
                let budget = delta / k1 * (pcu * g).min(pcl * g).min(a).min(b);
                Ok(BudgetTerms {
                    a,
                    b,
                    ordering_left: k1 / k - pcu / pu,
                    ordering_right: pcl / ps - k1 / k,
                    tempering: None,
                    budget: budget.max(0.0),
                })
            }
        }
    }
}

/// Per-ω quantities of a corollary. `ordering_left`/`ordering_right` are the
/// two sides of the rate ordering written as `rhs − lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetTerms {
    pub a: f64,
    pub b: f64,
    pub ordering_left: f64,
    pub ordering_right: f64,
    pub tempering: Option<f64>,
    /// Admissible `Lip(f_ω)`; clamped at 0 when the hypotheses fail.
    pub budget: f64,
}

/// The corollary's Lipschitz budget at `ω`.
pub fn lipschitz_budget(data: &HypothesisData, driving: &dyn DrivingSystem, omega: &OmegaPoint) -> Result<f64> {
    Ok(data.terms(driving, omega)?.budget)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margin {
    pub name: String,
    /// Worst (smallest) value over the samples; `rhs − lhs` of the inequality.
    pub value: f64,
    /// Strict inequalities pass on `value > 0`, the others on `value >= 0`.
    pub strict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_at: Option<OmegaPoint>,
}

impl Margin {
    pub fn new(name: impl Into<String>, value: f64, strict: bool) -> Self {
        Margin { name: name.into(), value, strict, worst_at: None }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.value > 0.0
        } else {
            self.value >= 0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub tag: String,
    pub samples: usize,
    pub passed: bool,
    pub margins: Vec<Margin>,
}

impl HypothesisReport {
    pub fn new(tag: impl Into<String>, samples: usize) -> Self {
        HypothesisReport { tag: tag.into(), samples, passed: true, margins: Vec::new() }
    }

    pub fn push(&mut self, margin: Margin) {
        self.passed &= margin.holds();
        self.margins.push(margin);
    }

    pub fn margin(&self, name: &str) -> Option<&Margin> {
        self.margins.iter().find(|m| m.name == name)
    }

    pub fn violated(&self) -> impl Iterator<Item = &Margin> {
        self.margins.iter().filter(|m| !m.holds())
    }
}

/// Tracks the minimum of a margin across samples.
struct MinTracker {
    name: String,
    strict: bool,
    value: f64,
    at: Option<OmegaPoint>,
}

impl MinTracker {
    fn new(name: &str, strict: bool) -> Self {
        MinTracker { name: name.into(), strict, value: f64::INFINITY, at: None }
    }

    fn update(&mut self, value: f64, omega: &OmegaPoint) {
        // NaN margins count as violations.
        let value = if value.is_nan() { f64::NEG_INFINITY } else { value };
        if value < self.value || self.at.is_none() {
            self.value = value;
            self.at = Some(omega.clone());
        }
    }

    fn finish(self) -> Margin {
        Margin { name: self.name, value: self.value, strict: self.strict, worst_at: self.at }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEvidence {
    pub final_value: f64,
    pub max_value: f64,
    /// Largest relative increase over the last half of the horizon.
    pub tail_increase: f64,
    pub passed: bool,
}

impl DecayEvidence {
    /// Sequence ordered away from `t = 0`.
    pub fn from_values(values: &[f64]) -> Self {
        let final_value = values.last().copied().unwrap_or(f64::NAN);
        let max_value = values.iter().copied().fold(0.0, f64::max);
        let half = values.len() / 2;
        let tail_increase = values[half.min(values.len().saturating_sub(1))..]
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let passed = final_value.is_finite() && final_value < DECAY_THRESHOLD && tail_increase <= 1e-12;
        DecayEvidence { final_value, max_value, tail_increase, passed }
    }

    /// `threshold − final` when monotone, otherwise the negative increase.
    pub fn margin(&self) -> f64 {
        if self.tail_increase > 1e-12 {
            -self.tail_increase
        } else if self.final_value.is_nan() {
            f64::NEG_INFINITY
        } else {
            DECAY_THRESHOLD - self.final_value
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEvidence {
    pub omega: OmegaPoint,
    pub horizon: f64,
    /// `α^s_{−t, θ^t ω} α^c_{t, ω}` as `t → −horizon`.
    pub backward: DecayEvidence,
    /// `α^u_{−t, θ^t ω} α^c_{t, ω}` as `t → +horizon`.
    pub forward: DecayEvidence,
    pub passed: bool,
}

fn decay_times(domain: TimeDomain, horizon: f64) -> Vec<f64> {
    match domain {
        TimeDomain::Discrete => (1..=horizon.round() as i64).map(|n| n as f64).collect(),
        TimeDomain::Continuous => (1..=200).map(|i| horizon * i as f64 / 200.0).collect(),
    }
}

/// Empirical evidence for the limit conditions of the existence theorems.
pub fn check_limit_conditions(model: &Model, omega: &OmegaPoint, horizon: f64) -> Result<LimitEvidence> {
    if !(horizon >= 10.0) {
        return Err(Error::InvalidInput(format!("limit checks need horizon >= 10 (got {horizon})")));
    }
    let times = decay_times(model.time_domain(), horizon);
    let product = |sub: Subbundle, t: f64| {
        let base = model.flow(t, omega);
        model.alpha(sub, -t, &base) * model.alpha(Subbundle::Center, t, omega)
    };
    let backward: Vec<f64> = times.iter().map(|&t| product(Subbundle::Stable, -t)).collect();
    let forward: Vec<f64> = times.iter().map(|&t| product(Subbundle::Unstable, t)).collect();
    let backward = DecayEvidence::from_values(&backward);
    let forward = DecayEvidence::from_values(&forward);
    let passed = backward.passed && forward.passed;
    Ok(LimitEvidence { omega: omega.clone(), horizon, backward, forward, passed })
}

/// Corollary-form limits `K(θ^t ω) ψ^s(−t, θ^t ω) ψ̲^c(t, ω)` (as `t → −∞`)
/// and `K(θ^t ω) ψ^u(−t, θ^t ω) ψ̄^c(t, ω)` (as `t → +∞`).
fn psi_limits(model: &Model, data: &HypothesisData, omega: &OmegaPoint, horizon: f64) -> (DecayEvidence, DecayEvidence) {
    let psi = data.rates.as_psi();
    let times = decay_times(model.time_domain(), horizon);
    let term = |stable: bool, t: f64| {
        let base = model.flow(t, omega);
        let (r1, r2) = if stable { (Rate::Stable, Rate::CenterLower) } else { (Rate::Unstable, Rate::CenterUpper) };
        (data.k)(&base) * psi.psi(r1, -t, &base) * psi.psi(r2, t, omega)
    };
    let back: Vec<f64> = times.iter().map(|&t| term(true, -t)).collect();
    let fwd: Vec<f64> = times.iter().map(|&t| term(false, t)).collect();
    (DecayEvidence::from_values(&back), DecayEvidence::from_values(&fwd))
}

fn g_total(model: &Model, data: &HypothesisData, omega: &OmegaPoint, horizon: f64) -> f64 {
    let grid = time_grid(model.time_domain(), horizon, CONT_G_STEP);
    let vals: Vec<f64> = grid.iter().map(|&t| (data.g)(&model.flow(t, omega))).collect();
    match model.time_domain() {
        TimeDomain::Discrete => vals.iter().sum(),
        TimeDomain::Continuous => vals.windows(2).map(|w| 0.5 * CONT_G_STEP * (w[0] + w[1])).sum(),
    }
}

/// Evaluates every hypothesis of the tagged corollary on the samples.
pub fn check_corollary(
    model: &Model,
    tag: CorollaryTag,
    samples: &[OmegaPoint],
    horizon: f64,
) -> Result<HypothesisReport> {
    let data = model
        .hypotheses
        .as_ref()
        .ok_or_else(|| Error::MissingData(format!("{tag} (model carries no corollary data)")))?;
    if samples.is_empty() {
        return Err(Error::InvalidInput("corollary check needs at least one sample".into()));
    }
    // Evaluate under the requested tag with the model's data.
    let data = HypothesisData { tag, ..(**data).clone() };
    let mut report = HypothesisReport::new(tag.as_str(), samples.len());
    report.push(Margin::new("delta > 0", data.delta, true));
    report.push(Margin::new("delta < 1/6", 1.0 / 6.0 - data.delta, true));

    let (left_name, right_name) = match tag {
        CorollaryTag::TemperedCont | CorollaryTag::TemperedDisc => {
            ("lambda_c_upper < lambda_u", "lambda_c_lower > lambda_s")
        }
        CorollaryTag::PsiCont | CorollaryTag::IntegralExp | CorollaryTag::NonexpCont => {
            ("rate ordering left (a > 0)", "rate ordering right (b > 0)")
        }
        _ => ("psi_c_upper(1)/psi_u(1) < K(theta w)/K(w)", "K(theta w)/K(w) < psi_c_lower(1)/psi_s(1)"),
    };
    let mut left = MinTracker::new(left_name, true);
    let mut right = MinTracker::new(right_name, true);
    let mut a_min = MinTracker::new("a(w) > 0", true);
    let mut b_min = MinTracker::new("b(w) > 0", true);
    let mut g_sum = MinTracker::new("sum of G along orbit <= 1", false);
    let mut budget = MinTracker::new("Lip(f_w) <= budget(w)", false);
    let mut temper = MinTracker::new("tempering sup attained inside horizon", true);
    let mut temper_cover = MinTracker::new("Lambda(w) >= truncated sup", false);
    let mut k_ge_one = MinTracker::new("K(w) >= 1", false);
    let mut lim_back = MinTracker::new("backward limit decays", true);
    let mut lim_fwd = MinTracker::new("forward limit decays", true);

    let tempered = tag.is_tempered();
    if tempered {
        report.push(Margin::new("gamma > 0", data.gamma()?, true));
    }
    for omega in samples {
        let terms = data.terms(model.driving.as_ref(), omega)?;
        left.update(terms.ordering_left, omega);
        right.update(terms.ordering_right, omega);
        a_min.update(terms.a, omega);
        b_min.update(terms.b, omega);
        k_ge_one.update((data.k)(omega) - 1.0, omega);
        g_sum.update(1.0 - g_total(model, &data, omega, horizon), omega);
        let lip = model.lip(omega);
        budget.update(terms.budget * (1.0 + 1e-12) - lip, omega);
        if tempered {
            let gamma = data.gamma()?;
            let sup = data.tempering_sup(model.driving.as_ref(), omega, horizon)?;
            let edge = [-horizon, horizon]
                .iter()
                .map(|&t| (-gamma * horizon).exp() * (data.k)(&model.flow(t, omega)))
                .fold(0.0, f64::max);
            temper.update(sup - edge, omega);
            temper_cover.update(terms.tempering.unwrap_or(sup) * (1.0 + 1e-12) - sup, omega);
            let ev = check_limit_conditions(model, omega, horizon.max(10.0))?;
            lim_back.update(ev.backward.margin(), omega);
            lim_fwd.update(ev.forward.margin(), omega);
        } else {
            let (back, fwd) = psi_limits(model, &data, omega, horizon.max(10.0));
            lim_back.update(back.margin(), omega);
            lim_fwd.update(fwd.margin(), omega);
        }
    }
    for t in [left, right, a_min, b_min, k_ge_one, g_sum] {
        report.push(t.finish());
    }
    if tempered {
        report.push(temper.finish());
        report.push(temper_cover.finish());
    }
    report.push(lim_back.finish());
    report.push(lim_fwd.finish());
    report.push(budget.finish());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub quantity: String,
    pub closed_form: f64,
    pub error_coarse: f64,
    pub error_fine: f64,
    /// `log2(error_coarse / error_fine)`; about 2 for central differences.
    pub observed_order: f64,
    pub passed: bool,
}

impl DerivativeCheck {
    fn new(quantity: String, closed_form: f64, fd: impl Fn(f64) -> f64, h0: f64) -> Self {
        let error_coarse = (fd(h0) - closed_form).abs();
        let error_fine = (fd(h0 / 2.0) - closed_form).abs();
        let noise = 1e-9 * (1.0 + closed_form.abs());
        let observed_order = (error_coarse / error_fine).log2();
        let passed = error_fine <= noise || (observed_order >= 1.5 && error_fine < 1e-2 * (1.0 + closed_form.abs()));
        DerivativeCheck { quantity, closed_form, error_coarse, error_fine, observed_order, passed }
    }
}

/// Central finite differences at steps `h0` and `h0/2` against the closed
/// forms of `d_ψ`, `d_K` and `d_λ`. Failures are reported, not raised.
pub fn psi_derivative_crosscheck(model: &Model, omega: &OmegaPoint, h0: f64) -> Result<Vec<DerivativeCheck>> {
    let data = model
        .hypotheses
        .as_ref()
        .ok_or_else(|| Error::MissingData("derivative crosscheck (model carries no corollary data)".into()))?;
    if model.time_domain() != TimeDomain::Continuous {
        return Err(Error::InvalidInput("derivative crosscheck needs continuous time".into()));
    }
    if !(h0 > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive (got {h0})")));
    }
    let psi = data.rates.as_psi();
    let mut out = Vec::new();
    for rate in Rate::ALL {
        if let Some(d) = psi.d_psi(rate, omega) {
            let fd = |h: f64| (psi.psi(rate, h, omega) - psi.psi(rate, -h, omega)) / (2.0 * h);
            out.push(DerivativeCheck::new(format!("d_psi_{}", rate.label()), d, fd, h0));
        }
        if let Some(d) = psi.d_lambda(rate, omega) {
            let lam = |t: f64| psi.lambda(rate, &model.flow(t, omega)).unwrap_or(f64::NAN);
            let fd = |h: f64| (lam(h) - lam(-h)) / (2.0 * h);
            out.push(DerivativeCheck::new(format!("d_lambda_{}", rate.label()), d, fd, h0));
        }
    }
    if let Some(dk) = &data.d_k {
        let k = |t: f64| (data.k)(&model.flow(t, omega));
        let fd = |h: f64| (k(h) - k(-h)) / (2.0 * h);
        out.push(DerivativeCheck::new("d_K".into(), dk(omega), fd, h0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for tag in CorollaryTag::ALL {
            assert_eq!(tag.as_str().parse::<CorollaryTag>().unwrap(), tag);
        }
        assert_eq!("tempered".parse::<CorollaryTag>(), Err(Error::UnknownTag("tempered".into())));
    }

    #[test]
    fn decay_evidence_detects_plateau() {
        let decaying: Vec<f64> = (1..=20).map(|n| (-0.9 * n as f64).exp()).collect();
        assert!(DecayEvidence::from_values(&decaying).passed);
        let plateau = vec![1.0; 20];
        let ev = DecayEvidence::from_values(&plateau);
        assert!(!ev.passed);
        assert_eq!(ev.final_value, 1.0);
        assert!(ev.margin() < 0.0);
    }

    #[test]
    fn non_strict_margin_passes_at_zero() {
        assert!(Margin::new("x", 0.0, false).holds());
        assert!(!Margin::new("x", 0.0, true).holds());
    }
}
