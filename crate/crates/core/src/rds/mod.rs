//! Driving systems, linear cocycles with invariant splittings, trichotomy
//! bounds and nonlinear perturbations, bundled into a [`Model`].

mod driving;
mod nonlinear;
mod validate;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use driving::{CircleRotation, DrivingSystem, HorizontalFlow, OmegaPoint, Shift, TimeDomain};
pub use nonlinear::{LinearPerturbation, Nonlinearity, ScalarField, ScaledShape, Shape, ZeroNonlinearity};
pub use validate::{
    check_backward_roundtrip, check_cocycle, check_driving, check_nonlinearity, check_trichotomy,
    validate_splitting, validate_structure, CheckOutcome, SampleSet, ValidationReport,
};

use crate::error::{Error, Result};
use crate::norm::VectorNorm;
use crate::rates::{HypothesisData, TailEnvelope};

/// Structural identities that hold in exact arithmetic.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Identities that accumulate rounding through products of cocycle maps.
pub const DYNAMICAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subbundle {
    #[serde(rename = "c")]
    Center,
    #[serde(rename = "s")]
    Stable,
    #[serde(rename = "u")]
    Unstable,
}

impl Subbundle {
    pub const ALL: [Subbundle; 3] = [Subbundle::Center, Subbundle::Stable, Subbundle::Unstable];
}

impl fmt::Display for Subbundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subbundle::Center => "c",
            Subbundle::Stable => "s",
            Subbundle::Unstable => "u",
        })
    }
}

/// A linear cocycle `Φ^t_ω` on `R^d` together with its invariant splitting.
pub trait LinearCocycle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn norm(&self) -> VectorNorm {
        VectorNorm::Max
    }

    /// `Φ^t_ω` for `t >= 0`.
    fn forward(&self, t: f64, omega: &OmegaPoint) -> DMatrix<f64>;

    fn projector(&self, sub: Subbundle, omega: &OmegaPoint) -> DMatrix<f64>;

    /// Inverse of the cocycle along one subbundle for `t <= 0`: a matrix that
    /// maps `E^sub_ω` onto `E^sub_{θ^t ω}`. Its action off the fiber is
    /// irrelevant since callers project first.
    fn backward(&self, _sub: Subbundle, _t: f64, _omega: &OmegaPoint) -> Option<DMatrix<f64>> {
        None
    }

    /// Columns form a basis of `E^c_ω`.
    fn center_basis(&self, omega: &OmegaPoint) -> DMatrix<f64>;

    fn center_dim(&self) -> usize {
        self.center_basis(&OmegaPoint::scalar(0.0)).ncols()
    }
}

/// Rate functions `α^c` (all times), `α^s` (`t >= 0`), `α^u` (`t <= 0`).
pub trait TrichotomyBounds: Send + Sync + fmt::Debug {
    fn alpha(&self, sub: Subbundle, t: f64, omega: &OmegaPoint) -> f64;
}

/// A random dynamical system `x ↦ Φ x + f(x)` with all the data the rates
/// module and the solvers consume.
#[derive(Clone)]
pub struct Model {
    pub name: String,
    pub driving: Arc<dyn DrivingSystem>,
    pub cocycle: Arc<dyn LinearCocycle>,
    pub bounds: Arc<dyn TrichotomyBounds>,
    pub nonlinearity: Arc<dyn Nonlinearity>,
    pub hypotheses: Option<Arc<HypothesisData>>,
    pub tail: Option<Arc<dyn TailEnvelope>>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("time_domain", &self.time_domain())
            .field("nonlinearity", &self.nonlinearity)
            .finish()
    }
}

impl Model {
    pub fn new(
        name: impl Into<String>,
        driving: Arc<dyn DrivingSystem>,
        cocycle: Arc<dyn LinearCocycle>,
        bounds: Arc<dyn TrichotomyBounds>,
    ) -> Self {
        Model {
            name: name.into(),
            driving,
            cocycle,
            bounds,
            nonlinearity: Arc::new(ZeroNonlinearity),
            hypotheses: None,
            tail: None,
        }
    }

    /// Replaces the nonlinearity. Any tail envelope is dropped because it
    /// was certified for the previous one.
    pub fn with_nonlinearity(mut self, f: Arc<dyn Nonlinearity>) -> Self {
        self.nonlinearity = f;
        self.tail = None;
        self
    }

    pub fn with_tail(mut self, tail: Arc<dyn TailEnvelope>) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn with_hypotheses(mut self, data: HypothesisData) -> Self {
        self.hypotheses = Some(Arc::new(data));
        self
    }

    pub fn time_domain(&self) -> TimeDomain {
        self.driving.time_domain()
    }

    pub fn dim(&self) -> usize {
        self.cocycle.dim()
    }

    pub fn norm(&self) -> VectorNorm {
        self.cocycle.norm()
    }

    pub fn drive(&self, t: f64, omega: &OmegaPoint) -> Result<OmegaPoint> {
        self.driving.drive(t, omega)
    }

    /// `θ^t ω` for a time already known to be valid.
    pub(crate) fn flow(&self, t: f64, omega: &OmegaPoint) -> OmegaPoint {
        self.driving.flow(t, omega)
    }

    pub fn lip(&self, omega: &OmegaPoint) -> f64 {
        self.nonlinearity.lip(omega)
    }

    pub fn alpha(&self, sub: Subbundle, t: f64, omega: &OmegaPoint) -> f64 {
        self.bounds.alpha(sub, t, omega)
    }

    pub fn projector(&self, sub: Subbundle, omega: &OmegaPoint) -> DMatrix<f64> {
        self.cocycle.projector(sub, omega)
    }

    /// `Φ^{i,t}_ω = Φ^t_ω P^i_ω` as a matrix, using the restricted inverse
    /// for negative times.
    pub fn block(&self, sub: Subbundle, t: f64, omega: &OmegaPoint) -> Result<DMatrix<f64>> {
        self.time_domain().check(t)?;
        let p = self.cocycle.projector(sub, omega);
        if t == 0.0 {
            return Ok(p);
        }
        if t > 0.0 {
            return Ok(self.cocycle.forward(t, omega) * p);
        }
        let back = self
            .cocycle
            .backward(sub, t, omega)
            .ok_or(Error::MissingBackwardMap(sub))?;
        Ok(back * p)
    }

    /// `Φ^{i,t}_ω x`.
    pub fn apply_block(
        &self,
        sub: Subbundle,
        t: f64,
        omega: &OmegaPoint,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        let y = self.block(sub, t, omega)? * x;
        debug_assert!({
            let target = self.flow(t, omega);
            let p = self.cocycle.projector(sub, &target);
            let off = self.norm().of(&(&p * &y - &y));
            off <= DYNAMICAL_TOL * (1.0 + self.norm().of(&y))
        });
        Ok(y)
    }

    /// Full inverse `(Φ^{-t}_{θ^t ω})` assembled blockwise for `t < 0`; needs
    /// restricted inverses on all three subbundles.
    pub fn full_backward(&self, t: f64, omega: &OmegaPoint) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for sub in Subbundle::ALL {
            m += self.block(sub, t, omega)?;
        }
        Ok(m)
    }

    pub fn project(&self, sub: Subbundle, omega: &OmegaPoint, x: &DVector<f64>) -> DVector<f64> {
        self.cocycle.projector(sub, omega) * x
    }

    /// Lifts center coordinates to a vector of `E^c_ω`.
    pub fn lift_center(&self, omega: &OmegaPoint, coords: &[f64]) -> Result<DVector<f64>> {
        let basis = self.cocycle.center_basis(omega);
        if coords.len() != basis.ncols() {
            return Err(Error::DimensionMismatch { expected: basis.ncols(), actual: coords.len() });
        }
        Ok(basis * DVector::from_column_slice(coords))
    }

    pub fn eval_f(&self, omega: &OmegaPoint, x: &DVector<f64>) -> DVector<f64> {
        self.nonlinearity.eval(omega, x)
    }
}
