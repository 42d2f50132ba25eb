use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::rates::{PsiRates, Rate};
use crate::rds::{DrivingSystem, LinearCocycle, OmegaPoint, ScalarField, Subbundle, TrichotomyBounds};

/// The four rank-one projections of the R⁴ example, indexed by `K(ω)`.
pub fn r4_projection(rate: Rate, k: f64) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(4, 4);
    match rate {
        Rate::CenterUpper => {
            p[(2, 2)] = 1.0;
            p[(2, 3)] = k - 1.0;
        }
        Rate::CenterLower => {
            p[(0, 1)] = 1.0 - k;
            p[(1, 1)] = 1.0;
        }
        Rate::Stable => {
            p[(0, 0)] = 1.0;
            p[(0, 1)] = k - 1.0;
        }
        Rate::Unstable => {
            p[(2, 3)] = 1.0 - k;
            p[(3, 3)] = 1.0;
        }
    }
    p
}

/// `Φ^t_ω = ψ̄^c P̄^c_ω + (K(ω)/K(θ^t ω)) ψ̲^c P̲^c_{θ^t ω} + ψ^s P^s_ω
///  + (K(ω)/K(θ^t ω)) ψ^u P^u_{θ^t ω}`, valid for every sign of `t`.
#[derive(Clone)]
pub struct R4Cocycle {
    pub driving: Arc<dyn DrivingSystem>,
    pub psi: Arc<dyn PsiRates>,
    pub k: ScalarField,
}

impl fmt::Debug for R4Cocycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("R4Cocycle").field("psi", &self.psi).finish_non_exhaustive()
    }
}

impl R4Cocycle {
    pub fn display(&self, t: f64, omega: &OmegaPoint) -> DMatrix<f64> {
        let target = self.driving.flow(t, omega);
        let (k0, k1) = ((self.k)(omega), (self.k)(&target));
        let psi = |r| self.psi.psi(r, t, omega);
        r4_projection(Rate::CenterUpper, k0) * psi(Rate::CenterUpper)
            + r4_projection(Rate::CenterLower, k1) * (k0 / k1 * psi(Rate::CenterLower))
            + r4_projection(Rate::Stable, k0) * psi(Rate::Stable)
            + r4_projection(Rate::Unstable, k1) * (k0 / k1 * psi(Rate::Unstable))
    }
}

impl LinearCocycle for R4Cocycle {
    fn dim(&self) -> usize {
        4
    }

    fn forward(&self, t: f64, omega: &OmegaPoint) -> DMatrix<f64> {
        self.display(t, omega)
    }

    fn projector(&self, sub: Subbundle, omega: &OmegaPoint) -> DMatrix<f64> {
        let k = (self.k)(omega);
        match sub {
            Subbundle::Center => r4_projection(Rate::CenterUpper, k) + r4_projection(Rate::CenterLower, k),
            Subbundle::Stable => r4_projection(Rate::Stable, k),
            Subbundle::Unstable => r4_projection(Rate::Unstable, k),
        }
    }

    fn backward(&self, _sub: Subbundle, t: f64, omega: &OmegaPoint) -> Option<DMatrix<f64>> {
        Some(self.display(t, omega))
    }

    fn center_basis(&self, omega: &OmegaPoint) -> DMatrix<f64> {
        let k = (self.k)(omega);
        DMatrix::from_column_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 1.0 - k, 1.0, 0.0, 0.0])
    }

    fn center_dim(&self) -> usize {
        2
    }
}

/// `α^c = K max{ψ̄^c, ψ̲^c}`, `α^s = K ψ^s`, `α^u = K ψ^u`.
#[derive(Clone)]
pub struct R4Bounds {
    pub psi: Arc<dyn PsiRates>,
    pub k: ScalarField,
}

impl fmt::Debug for R4Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("R4Bounds").finish_non_exhaustive()
    }
}

impl TrichotomyBounds for R4Bounds {
    fn alpha(&self, sub: Subbundle, t: f64, omega: &OmegaPoint) -> f64 {
        let k = (self.k)(omega);
        match sub {
            Subbundle::Center => {
                k * self.psi.psi(Rate::CenterUpper, t, omega).max(self.psi.psi(Rate::CenterLower, t, omega))
            }
            Subbundle::Stable => k * self.psi.psi(Rate::Stable, t, omega),
            Subbundle::Unstable => k * self.psi.psi(Rate::Unstable, t, omega),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn projections_at_k_two() {
        let x = DVector::from_element(4, 1.0);
        let k = 2.0;
        let ps = r4_projection(Rate::Stable, k) * &x;
        let pcl = r4_projection(Rate::CenterLower, k) * &x;
        let pu = r4_projection(Rate::Unstable, k) * &x;
        let pcu = r4_projection(Rate::CenterUpper, k) * &x;
        assert_eq!(ps.as_slice(), &[2.0, 0.0, 0.0, 0.0]);
        assert_eq!(pcl.as_slice(), &[-1.0, 1.0, 0.0, 0.0]);
        assert_eq!(pu.as_slice(), &[0.0, 0.0, -1.0, 1.0]);
        assert_eq!(pcu.as_slice(), &[0.0, 0.0, 2.0, 0.0]);
        assert_eq!(ps + pcl + pu + pcu, x);
    }

    #[test]
    fn lower_center_products_follow_the_left_factor() {
        // P̲^c_{ω'} P̲^c_ω = P̲^c_{ω'}.
        let a = r4_projection(Rate::CenterLower, 3.0);
        let b = r4_projection(Rate::CenterLower, 1.5);
        assert_eq!(&a * &b, a);
        let u1 = r4_projection(Rate::Unstable, 3.0);
        let u2 = r4_projection(Rate::Unstable, 1.5);
        assert_eq!(&u1 * &u2, u1);
        let s1 = r4_projection(Rate::Stable, 3.0);
        let s2 = r4_projection(Rate::Stable, 1.5);
        assert_eq!(&s1 * &s2, s2);
    }
}
