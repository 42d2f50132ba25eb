use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::OmegaPoint;
use crate::norm::VectorNorm;

/// A fiberwise perturbation `f_ω` with `f_ω(0) = 0` and a certified upper
/// bound on its Lipschitz constant.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn eval(&self, omega: &OmegaPoint, x: &DVector<f64>) -> DVector<f64>;

    /// Upper bound for `Lip(f_ω)` in the model's norm.
    fn lip(&self, omega: &OmegaPoint) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNonlinearity;

impl Nonlinearity for ZeroNonlinearity {
    fn eval(&self, _omega: &OmegaPoint, x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(x.len())
    }

    fn lip(&self, _omega: &OmegaPoint) -> f64 {
        0.0
    }
}

/// Fixed 1-Lipschitz profiles vanishing at the origin. Both are 1-Lipschitz
/// in the max, sum and Euclidean norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `s_i(x) = sin(x_{i+1 mod d})`.
    ComponentwiseSine,
    /// `s_i(x) = tanh(mean(x))`.
    SmoothSaturation,
}

impl Shape {
    pub fn apply(self, x: &DVector<f64>) -> DVector<f64> {
        let d = x.len();
        match self {
            Shape::ComponentwiseSine => DVector::from_fn(d, |i, _| x[(i + 1) % d].sin()),
            Shape::SmoothSaturation => {
                let m = if d == 0 { 0.0 } else { x.sum() / d as f64 };
                DVector::from_element(d, m.tanh())
            }
        }
    }
}

pub type ScalarField = Arc<dyn Fn(&OmegaPoint) -> f64 + Send + Sync>;

/// `f(ω, x) = lip(ω) · s(x)`.
#[derive(Clone)]
pub struct ScaledShape {
    pub shape: Shape,
    pub lip: ScalarField,
}

impl ScaledShape {
    pub fn new(shape: Shape, lip: impl Fn(&OmegaPoint) -> f64 + Send + Sync + 'static) -> Self {
        ScaledShape { shape, lip: Arc::new(lip) }
    }
}

impl fmt::Debug for ScaledShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScaledShape").field("shape", &self.shape).finish_non_exhaustive()
    }
}

impl Nonlinearity for ScaledShape {
    fn eval(&self, omega: &OmegaPoint, x: &DVector<f64>) -> DVector<f64> {
        let l = (self.lip)(omega);
        if l == 0.0 {
            return DVector::zeros(x.len());
        }
        self.shape.apply(x) * l
    }

    fn lip(&self, omega: &OmegaPoint) -> f64 {
        (self.lip)(omega)
    }
}

/// `f(ω, x) = B x` with a constant matrix; used for closed-form checks.
#[derive(Debug, Clone)]
pub struct LinearPerturbation {
    pub matrix: DMatrix<f64>,
    pub norm: VectorNorm,
}

impl Nonlinearity for LinearPerturbation {
    fn eval(&self, _omega: &OmegaPoint, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    fn lip(&self, _omega: &OmegaPoint) -> f64 {
        self.norm.operator(&self.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_vanish_at_origin() {
        let z = DVector::zeros(4);
        assert_eq!(Shape::ComponentwiseSine.apply(&z), z);
        assert_eq!(Shape::SmoothSaturation.apply(&z), z);
    }

    #[test]
    fn shapes_are_one_lipschitz_on_samples() {
        let pts = [
            DVector::from_vec(vec![0.3, -1.2, 2.0]),
            DVector::from_vec(vec![-0.7, 0.1, 0.05]),
            DVector::from_vec(vec![5.0, 5.0, -5.0]),
        ];
        for shape in [Shape::ComponentwiseSine, Shape::SmoothSaturation] {
            for norm in [VectorNorm::Max, VectorNorm::Sum, VectorNorm::Euclidean] {
                for a in &pts {
                    for b in &pts {
                        let lhs = norm.distance(&shape.apply(a), &shape.apply(b));
                        assert!(lhs <= norm.distance(a, b) + 1e-15);
                    }
                }
            }
        }
    }
}
