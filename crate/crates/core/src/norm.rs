//! Vector norms on the phase space and the operator norms they induce.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorNorm {
    #[default]
    Max,
    Sum,
    Euclidean,
}

impl VectorNorm {
    pub fn of(self, x: &DVector<f64>) -> f64 {
        match self {
            VectorNorm::Max => x.iter().fold(0.0, |m, v| m.max(v.abs())),
            VectorNorm::Sum => x.iter().map(|v| v.abs()).sum(),
            VectorNorm::Euclidean => x.norm(),
        }
    }

    /// Induced operator norm. Exact for all three norms: max absolute row
    /// sum, max absolute column sum, largest singular value.
    pub fn operator(self, a: &DMatrix<f64>) -> f64 {
        match self {
            VectorNorm::Max => a
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            VectorNorm::Sum => a
                .column_iter()
                .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            VectorNorm::Euclidean => {
                if a.is_empty() {
                    0.0
                } else {
                    a.singular_values().max()
                }
            }
        }
    }

    pub fn distance(self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.of(&(x - y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_norm_operator_is_row_sum() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.25]);
        assert_eq!(VectorNorm::Max.operator(&a), 3.0);
        assert_eq!(VectorNorm::Sum.operator(&a), 2.25);
    }

    #[test]
    fn euclidean_operator_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -4.0]));
        assert!((VectorNorm::Euclidean.operator(&a) - 4.0).abs() < 1e-14);
    }
}
