use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{default_g, default_g_scale, DrivingKind};
use crate::error::{Error, Result};
use crate::rates::{CorollaryTag, ExponentialEnvelope, ExponentialRates, HypothesisData, RateFamily};
use crate::rds::{LinearCocycle, Model, OmegaPoint, Subbundle, TimeDomain, TrichotomyBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubbundleDims {
    pub center: usize,
    pub stable: usize,
    pub unstable: usize,
}

impl Default for SubbundleDims {
    fn default() -> Self {
        SubbundleDims { center: 1, stable: 1, unstable: 1 }
    }
}

/// θ-invariant exponents, a constant `K`, the tempering exponent `γ`, the
/// smallness constant `δ` and the scale `c` of `G(ω) = c 3^{−|x|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperedExpParams {
    pub lambda_c_upper: f64,
    pub lambda_c_lower: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub k: f64,
    pub gamma: f64,
    pub delta: f64,
    pub g_scale: Option<f64>,
    pub dims: SubbundleDims,
    pub driving: DrivingKind,
}

impl Default for TemperedExpParams {
    fn default() -> Self {
        TemperedExpParams {
            lambda_c_upper: 0.1,
            lambda_c_lower: -0.1,
            lambda_s: -1.0,
            lambda_u: 1.0,
            k: 1.0,
            gamma: 0.4,
            delta: 0.15,
            g_scale: None,
            dims: SubbundleDims::default(),
            driving: DrivingKind::Shift,
        }
    }
}

/// `diag(e^{λ_i t})` with coordinates ordered center, stable, unstable.
#[derive(Debug, Clone)]
pub struct DiagonalCocycle {
    pub exponents: Vec<f64>,
    pub dims: SubbundleDims,
}

impl DiagonalCocycle {
    fn range(&self, sub: Subbundle) -> std::ops::Range<usize> {
        let SubbundleDims { center: c, stable: s, unstable: u } = self.dims;
        match sub {
            Subbundle::Center => 0..c,
            Subbundle::Stable => c..c + s,
            Subbundle::Unstable => c + s..c + s + u,
        }
    }

    fn diag(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.exponents.len(),
            self.exponents.iter().map(|l| (l * t).exp()),
        ))
    }
}

impl LinearCocycle for DiagonalCocycle {
    fn dim(&self) -> usize {
        self.exponents.len()
    }

    fn forward(&self, t: f64, _omega: &OmegaPoint) -> DMatrix<f64> {
        self.diag(t)
    }

    fn projector(&self, sub: Subbundle, _omega: &OmegaPoint) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.dim(), self.dim());
        for i in self.range(sub) {
            p[(i, i)] = 1.0;
        }
        p
    }

    fn backward(&self, _sub: Subbundle, t: f64, _omega: &OmegaPoint) -> Option<DMatrix<f64>> {
        Some(self.diag(t))
    }

    fn center_basis(&self, _omega: &OmegaPoint) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim(), self.dims.center);
        for i in 0..self.dims.center {
            b[(i, i)] = 1.0;
        }
        b
    }

    fn center_dim(&self) -> usize {
        self.dims.center
    }
}

#[derive(Clone, Copy)]
pub struct TemperedBounds {
    pub rates: ExponentialRates,
    pub k: f64,
}

impl fmt::Debug for TemperedBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TemperedBounds").field("rates", &self.rates).field("k", &self.k).finish()
    }
}

impl TrichotomyBounds for TemperedBounds {
    fn alpha(&self, sub: Subbundle, t: f64, _omega: &OmegaPoint) -> f64 {
        let l = match sub {
            Subbundle::Center if t >= 0.0 => self.rates.c_upper,
            Subbundle::Center => self.rates.c_lower,
            Subbundle::Stable => self.rates.s,
            Subbundle::Unstable => self.rates.u,
        };
        self.k * (l * t).exp()
    }
}

fn center_exponents(rates: &ExponentialRates, n: usize) -> Vec<f64> {
    match n {
        1 => vec![0.5 * (rates.c_upper + rates.c_lower)],
        _ => (0..n)
            .map(|i| rates.c_lower + (rates.c_upper - rates.c_lower) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Block-diagonal model with blocks `e^{λ^ℓ t} Id`, constant projectors and
/// bounds `α = K e^{λ t}`.
pub fn make_tempered_exp(params: &TemperedExpParams, domain: TimeDomain) -> Result<Model> {
    let rates = ExponentialRates {
        c_upper: params.lambda_c_upper,
        c_lower: params.lambda_c_lower,
        s: params.lambda_s,
        u: params.lambda_u,
    };
    let precondition = |inequality: &str, margin: f64| -> Result<()> {
        if margin > 0.0 {
            Ok(())
        } else {
            Err(Error::Precondition { inequality: inequality.into(), margin })
        }
    };
    precondition("lambda_c_lower > lambda_s", rates.c_lower - rates.s)?;
    precondition("lambda_c_upper < lambda_u", rates.u - rates.c_upper)?;
    if rates.c_lower > rates.c_upper {
        return Err(Error::Precondition {
            inequality: "lambda_c_lower <= lambda_c_upper".into(),
            margin: rates.c_upper - rates.c_lower,
        });
    }
    if !(params.k >= 1.0) {
        return Err(Error::Precondition { inequality: "K >= 1".into(), margin: params.k - 1.0 });
    }
    let dims = params.dims;
    if dims.center == 0 {
        return Err(Error::InvalidInput("the center subbundle must be nontrivial".into()));
    }
    let mut exponents = center_exponents(&rates, dims.center);
    exponents.extend(std::iter::repeat_n(rates.s, dims.stable));
    exponents.extend(std::iter::repeat_n(rates.u, dims.unstable));

    let tag = match domain {
        TimeDomain::Discrete => CorollaryTag::TemperedDisc,
        TimeDomain::Continuous => CorollaryTag::TemperedCont,
    };
    let g_scale = params.g_scale.unwrap_or(default_g_scale(domain));
    let k = params.k;
    let mut data = HypothesisData {
        tag,
        delta: params.delta,
        gamma: Some(params.gamma),
        k: Arc::new(move |_| k),
        d_k: Some(Arc::new(|_| 0.0)),
        g: default_g(g_scale),
        // Constant K: the supremum is attained at t = 0.
        tempering: Some(Arc::new(move |_| k)),
        rates: RateFamily::Exponential(rates),
        envelope: None,
    };
    let driving = params.driving.build(domain);
    // Budget bound over Ω: replace G by its maximum c.
    let cap = HypothesisData { g: Arc::new(move |_| g_scale), ..data.clone() }
        .terms(driving.as_ref(), &OmegaPoint::scalar(0.0))
        .map(|t| t.budget)
        .unwrap_or(0.0);
    data.envelope = Some(ExponentialEnvelope {
        domain,
        prefactor: k * k,
        lip_bound: cap,
        lambda_s: rates.s,
        lambda_u: rates.u,
        gap_minus: rates.c_lower - rates.s,
        gap_plus: rates.u - rates.c_upper,
    });
    let name = format!("tempered-{}", if domain == TimeDomain::Discrete { "disc" } else { "cont" });
    Ok(Model::new(
        name,
        driving,
        Arc::new(DiagonalCocycle { exponents, dims }),
        Arc::new(TemperedBounds { rates, k }),
    )
    .with_hypotheses(data))
}
