//! Smallness quantities `σ` and `τ`, the contraction constants derived from
//! them, and checkers for the hypotheses of the existence results.

mod constants;
mod hypotheses;

use std::fmt;

use serde::Serialize;

pub use constants::{solve_mn, ContractionConstants};
pub use hypotheses::{
    check_corollary, check_limit_conditions, lipschitz_budget, psi_derivative_crosscheck, BudgetTerms,
    CorollaryTag, DecayEvidence, DerivativeCheck, ExponentialRates, HypothesisData,
    HypothesisReport, LimitEvidence, Margin, PsiRates, Rate, RateFamily,
};

use crate::error::{Error, Result};
use crate::rds::{Model, OmegaPoint, Subbundle, TimeDomain};

/// Partial sums may not grow by more than this over the last quarter of the
/// horizon.
pub const DIVERGENCE_THRESHOLD: f64 = 1e-6;

/// Certified upper bounds for the parts of the `τ` series (or integrals)
/// beyond the truncation horizon.
pub trait TailEnvelope: Send + Sync + fmt::Debug {
    /// `(tail of τ⁻, tail of τ⁺)` at `ω` for truncation at `horizon`.
    fn tau_tails(&self, omega: &OmegaPoint, horizon: f64) -> (f64, f64);
}

/// Envelope for summands bounded by
/// `prefactor · lip_bound · e^{−λ^u} e^{−(λ^u − λ̄^c) k}` (`k >= 0`) and
/// `prefactor · lip_bound · e^{−λ^s} e^{(λ̲^c − λ^s) k}` (`k <= −1`), or the
/// integrands `prefactor · lip_bound · e^{−gap |r|}` in continuous time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialEnvelope {
    pub domain: TimeDomain,
    pub prefactor: f64,
    /// Upper bound of `Lip(f_ω)` over all of `Ω`.
    pub lip_bound: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    /// `λ̲^c − λ^s`.
    pub gap_minus: f64,
    /// `λ^u − λ̄^c`.
    pub gap_plus: f64,
}

impl ExponentialEnvelope {
    pub fn scaled(mut self, factor: f64) -> Self {
        self.lip_bound *= factor;
        self
    }
}

impl TailEnvelope for ExponentialEnvelope {
    fn tau_tails(&self, _omega: &OmegaPoint, horizon: f64) -> (f64, f64) {
        let c = self.prefactor * self.lip_bound;
        match self.domain {
            TimeDomain::Discrete => {
                let geometric = |gap: f64| {
                    let r = (-gap).exp();
                    r.powf(horizon + 1.0) / (1.0 - r)
                };
                (
                    c * (-self.lambda_s).exp() * geometric(self.gap_minus),
                    c * (-self.lambda_u).exp() * geometric(self.gap_plus),
                )
            }
            TimeDomain::Continuous => (
                c * (-self.gap_minus * horizon).exp() / self.gap_minus,
                c * (-self.gap_plus * horizon).exp() / self.gap_plus,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaPair {
    pub minus: f64,
    pub plus: f64,
    /// Last increment of the running suprema; a heuristic, never certified.
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauPair {
    pub minus: f64,
    pub plus: f64,
    pub tail_minus: f64,
    pub tail_plus: f64,
    /// Tails come from a model envelope rather than the last-term heuristic.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaRates {
    pub omega: OmegaPoint,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub tau_minus: f64,
    pub tau_plus: f64,
    pub sigma_tail: f64,
    pub tau_tail: f64,
    pub certified: bool,
}

impl OmegaRates {
    fn from_pairs(omega: &OmegaPoint, s: SigmaPair, t: TauPair) -> Self {
        OmegaRates {
            omega: omega.clone(),
            sigma_minus: s.minus,
            sigma_plus: s.plus,
            tau_minus: t.minus,
            tau_plus: t.plus,
            sigma_tail: s.tail_estimate,
            tau_tail: t.tail_minus + t.tail_plus,
            certified: t.certified,
        }
    }
}

/// `σ` and `τ` as maxima over a declared sample of base points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub sigma: f64,
    pub tau: f64,
    pub sigma_tail: f64,
    pub tau_tail: f64,
    /// All `τ` tails certified by an envelope.
    pub certified: bool,
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub samples: usize,
    pub per_omega: Vec<OmegaRates>,
}

impl RateEstimate {
    pub fn total(&self) -> f64 {
        self.sigma + self.tau
    }

    /// Upper estimate of `σ + τ` including the truncation remainders.
    pub fn total_upper(&self) -> f64 {
        self.sigma + self.sigma_tail + self.tau + self.tau_tail
    }

    pub fn from_omegas(per_omega: Vec<OmegaRates>, horizon: f64, step: Option<f64>) -> Self {
        let fold = |f: &dyn Fn(&OmegaRates) -> f64| per_omega.iter().map(f).fold(0.0, f64::max);
        RateEstimate {
            sigma: fold(&|r| r.sigma_minus.max(r.sigma_plus)),
            tau: fold(&|r| r.tau_minus + r.tau_plus),
            sigma_tail: fold(&|r| r.sigma_tail),
            tau_tail: fold(&|r| r.tau_tail),
            certified: per_omega.iter().all(|r| r.certified),
            horizon,
            step,
            samples: per_omega.len(),
            per_omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RatesConfig {
    pub horizon: f64,
    /// Quadrature step; ignored in discrete time.
    pub step: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig { horizon: 60.0, step: 0.05 }
    }
}

/// Flags partial sums that keep growing over the last quarter.
fn divergence_check(quantity: &'static str, partial: &[f64]) -> Result<()> {
    let n = partial.len();
    if n < 4 {
        return Ok(());
    }
    let start = n - 1 - n / 4;
    let increase = partial[n - 1] - partial[start];
    if increase > DIVERGENCE_THRESHOLD {
        return Err(Error::Divergence { quantity, increase });
    }
    Ok(())
}

/// Geometric extrapolation from the last two terms; falls back to the last
/// term when they do not decrease.
fn heuristic_tail(terms: &[f64]) -> f64 {
    match terms {
        [.., a, b] if *a > 0.0 && b < a => b * (b / a) / (1.0 - b / a),
        [.., b] => *b,
        [] => 0.0,
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    Ok(())
}

fn require_domain(model: &Model, domain: TimeDomain) -> Result<()> {
    if model.time_domain() != domain {
        return Err(Error::InvalidInput(format!(
            "model `{}` runs in {:?} time",
            model.name,
            model.time_domain()
        )));
    }
    Ok(())
}

/// Discrete `σ_ω^∓`: suprema over `1 <= n <= horizon` of the normalized
/// sums of `α^c Lip(f) α^c` along the orbit.
pub fn sigma_discrete(model: &Model, omega: &OmegaPoint, horizon: usize) -> Result<SigmaPair> {
    check_horizon(horizon)?;
    require_domain(model, TimeDomain::Discrete)?;
    let c = Subbundle::Center;
    let lip: Vec<f64> = (-(horizon as i64)..horizon as i64)
        .map(|k| model.lip(&model.flow(k as f64, omega)))
        .collect();
    let lip_at = |k: i64| lip[(k + horizon as i64) as usize];

    let mut sup_plus = Vec::with_capacity(horizon);
    let mut best = 0.0f64;
    for n in 1..=horizon as i64 {
        let mut sum = 0.0;
        for k in 0..n {
            let l = lip_at(k);
            if l != 0.0 {
                let base = model.flow((k + 1) as f64, omega);
                sum += model.alpha(c, (n - k - 1) as f64, &base) * l * model.alpha(c, k as f64, omega);
            }
        }
        best = best.max(sum / model.alpha(c, n as f64, omega));
        sup_plus.push(best);
    }

    let mut sup_minus = Vec::with_capacity(horizon);
    let mut best = 0.0f64;
    for n in 1..=horizon as i64 {
        let mut sum = 0.0;
        for k in -n..0 {
            let l = lip_at(k);
            if l != 0.0 {
                let base = model.flow((k + 1) as f64, omega);
                sum += model.alpha(c, (-n - k - 1) as f64, &base) * l * model.alpha(c, k as f64, omega);
            }
        }
        best = best.max(sum / model.alpha(c, -n as f64, omega));
        sup_minus.push(best);
    }

    divergence_check("sigma+", &sup_plus)?;
    divergence_check("sigma-", &sup_minus)?;
    let last_inc = |v: &[f64]| match v {
        [.., a, b] => b - a,
        _ => 0.0,
    };
    Ok(SigmaPair {
        minus: *sup_minus.last().unwrap(),
        plus: *sup_plus.last().unwrap(),
        tail_estimate: last_inc(&sup_minus).max(last_inc(&sup_plus)),
    })
}

/// Discrete `τ_ω^∓`, truncated to `k ∈ [-horizon, -1]` and `[0, horizon]`.
pub fn tau_discrete(model: &Model, omega: &OmegaPoint, horizon: usize) -> Result<TauPair> {
    check_horizon(horizon)?;
    require_domain(model, TimeDomain::Discrete)?;
    let h = horizon as i64;
    let term_minus = |k: i64| {
        let w = model.flow(k as f64, omega);
        let l = model.lip(&w);
        if l == 0.0 {
            return 0.0;
        }
        let base = model.flow((k + 1) as f64, omega);
        model.alpha(Subbundle::Stable, (-k - 1) as f64, &base) * l * model.alpha(Subbundle::Center, k as f64, omega)
    };
    let term_plus = |k: i64| {
        let w = model.flow(k as f64, omega);
        let l = model.lip(&w);
        if l == 0.0 {
            return 0.0;
        }
        let base = model.flow((k + 1) as f64, omega);
        model.alpha(Subbundle::Unstable, (-k - 1) as f64, &base) * l * model.alpha(Subbundle::Center, k as f64, omega)
    };
    let minus_terms: Vec<f64> = (1..=h).map(|j| term_minus(-j)).collect();
    let plus_terms: Vec<f64> = (0..=h).map(term_plus).collect();
    finish_tau(model, omega, horizon as f64, &minus_terms, &plus_terms, 1.0)
}

fn partial_sums(terms: &[f64], weight: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut acc = 0.0;
    terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            acc += weight(i) * t;
            acc
        })
        .collect()
}

/// Sums (or trapezoid-integrates, when `step` is not 1) the ordered `τ`
/// terms moving away from `k = 0` and attaches tails.
fn finish_tau(
    model: &Model,
    omega: &OmegaPoint,
    horizon: f64,
    minus_terms: &[f64],
    plus_terms: &[f64],
    step: f64,
) -> Result<TauPair> {
    let discrete = model.time_domain() == TimeDomain::Discrete;
    let (minus_partial, plus_partial) = if discrete {
        (partial_sums(minus_terms, |_| 1.0), partial_sums(plus_terms, |_| 1.0))
    } else {
        // Terms are nodes 0, h, 2h, ...; trapezoid weights h/2 at both ends.
        let trap = |terms: &[f64]| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(terms.len());
            for w in terms.windows(2) {
                acc += 0.5 * step * (w[0] + w[1]);
                out.push(acc);
            }
            out
        };
        (trap(minus_terms), trap(plus_terms))
    };
    divergence_check("tau-", &minus_partial)?;
    divergence_check("tau+", &plus_partial)?;
    let minus = minus_partial.last().copied().unwrap_or(0.0);
    let plus = plus_partial.last().copied().unwrap_or(0.0);
    let (tail_minus, tail_plus, certified) = match &model.tail {
        Some(env) => {
            let (a, b) = env.tau_tails(omega, horizon);
            (a, b, true)
        }
        None => {
            let scale = if discrete { 1.0 } else { step };
            (heuristic_tail(minus_terms) * scale, heuristic_tail(plus_terms) * scale, false)
        }
    };
    Ok(TauPair { minus, plus, tail_minus, tail_plus, certified })
}

/// Continuous `σ` and `τ` by composite trapezoid quadrature on the grid
/// `r ∈ {0, ±step, ..., ±horizon}`; the supremum in `σ` runs over grid
/// times only.
pub fn sigma_tau_continuous(model: &Model, omega: &OmegaPoint, horizon: f64, step: f64) -> Result<OmegaRates> {
    require_domain(model, TimeDomain::Continuous)?;
    if !(step > 0.0 && horizon >= step) {
        return Err(Error::InvalidInput(format!("need 0 < step <= horizon (got {step}, {horizon})")));
    }
    let nodes = (horizon / step).round() as usize;
    let c = Subbundle::Center;
    let time = |i: i64| i as f64 * step;
    let lip: Vec<f64> = (-(nodes as i64)..=nodes as i64)
        .map(|i| model.lip(&model.flow(time(i), omega)))
        .collect();
    let lip_at = |i: i64| lip[(i + nodes as i64) as usize];
    let bases: Vec<OmegaPoint> = (-(nodes as i64)..=nodes as i64).map(|i| model.flow(time(i), omega)).collect();
    let base_at = |i: i64| &bases[(i + nodes as i64) as usize];
    let alpha_c: Vec<f64> = (-(nodes as i64)..=nodes as i64).map(|i| model.alpha(c, time(i), omega)).collect();
    let alpha_c_at = |i: i64| alpha_c[(i + nodes as i64) as usize];

    // σ: for grid time t_n, (1/α^c_{t_n}) |∫_0^{t_n} α^c_{t_n - r, θ^r ω} Lip α^c_{r, ω} dr|.
    let sigma_side = |sign: i64| -> Result<(f64, f64)> {
        let mut sups = Vec::with_capacity(nodes);
        let mut best = 0.0f64;
        for n in 1..=nodes as i64 {
            let tn = sign * n;
            let integrand = |j: i64| {
                let r = sign * j;
                let l = lip_at(r);
                if l == 0.0 {
                    0.0
                } else {
                    model.alpha(c, time(tn - r), base_at(r)) * l * alpha_c_at(r)
                }
            };
            let mut integral = 0.5 * (integrand(0) + integrand(n));
            for j in 1..n {
                integral += integrand(j);
            }
            integral *= step;
            best = best.max(integral.abs() / alpha_c_at(tn));
            sups.push(best);
        }
        divergence_check(if sign > 0 { "sigma+" } else { "sigma-" }, &sups)?;
        let inc = match sups.as_slice() {
            [.., a, b] => b - a,
            _ => 0.0,
        };
        Ok((*sups.last().unwrap(), inc))
    };
    let (sigma_plus, inc_plus) = sigma_side(1)?;
    let (sigma_minus, inc_minus) = sigma_side(-1)?;

    let minus_terms: Vec<f64> = (0..=nodes as i64)
        .map(|j| {
            let r = -j;
            let l = lip_at(r);
            if l == 0.0 {
                0.0
            } else {
                model.alpha(Subbundle::Stable, -time(r), base_at(r)) * l * alpha_c_at(r)
            }
        })
        .collect();
    let plus_terms: Vec<f64> = (0..=nodes as i64)
        .map(|r| {
            let l = lip_at(r);
            if l == 0.0 {
                0.0
            } else {
                model.alpha(Subbundle::Unstable, -time(r), base_at(r)) * l * alpha_c_at(r)
            }
        })
        .collect();
    let tau = finish_tau(model, omega, nodes as f64 * step, &minus_terms, &plus_terms, step)?;
    let sigma = SigmaPair { minus: sigma_minus, plus: sigma_plus, tail_estimate: inc_minus.max(inc_plus) };
    Ok(OmegaRates::from_pairs(omega, sigma, tau))
}

/// Per-`ω` rates for either time domain.
pub fn omega_rates(model: &Model, omega: &OmegaPoint, config: &RatesConfig) -> Result<OmegaRates> {
    match model.time_domain() {
        TimeDomain::Discrete => {
            let h = config.horizon.round().max(1.0) as usize;
            let s = sigma_discrete(model, omega, h)?;
            let t = tau_discrete(model, omega, h)?;
            Ok(OmegaRates::from_pairs(omega, s, t))
        }
        TimeDomain::Continuous => sigma_tau_continuous(model, omega, config.horizon, config.step),
    }
}

/// `σ` and `τ` as maxima over `omegas`.
pub fn estimate_rates(model: &Model, omegas: &[OmegaPoint], config: &RatesConfig) -> Result<RateEstimate> {
    if omegas.is_empty() {
        return Err(Error::InvalidInput("rate estimation needs at least one sample".into()));
    }
    let per_omega = omegas
        .iter()
        .map(|w| omega_rates(model, w, config))
        .collect::<Result<Vec<_>>>()?;
    let step = (model.time_domain() == TimeDomain::Continuous).then_some(config.step);
    Ok(RateEstimate::from_omegas(per_omega, config.horizon, step))
}
