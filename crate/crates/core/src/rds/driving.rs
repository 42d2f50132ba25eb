use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDomain {
    Discrete,
    Continuous,
}

impl TimeDomain {
    pub fn check(self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("time {t} is not finite")));
        }
        match self {
            TimeDomain::Discrete if t.fract() != 0.0 => Err(Error::NonIntegerTime(t)),
            _ => Ok(()),
        }
    }
}

/// A point of the base space, encoded as a small real tuple chosen by the
/// driving system (a real for a shift, a plane point for the horizontal
/// flow, an angle in `[0, 1)` for a circle rotation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OmegaPoint(pub Vec<f64>);

impl OmegaPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        OmegaPoint(coords.into())
    }

    pub fn scalar(x: f64) -> Self {
        OmegaPoint(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0.get(1).copied().unwrap_or(0.0)
    }
}

impl fmt::Display for OmegaPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The base flow or map `θ`. The probability measure is represented only
/// through the seeded sampler.
pub trait DrivingSystem: Send + Sync + fmt::Debug {
    fn time_domain(&self) -> TimeDomain;

    /// Number of coordinates in the point encoding.
    fn coord_dim(&self) -> usize;

    /// `θ^t ω` without validating `t` against the time domain.
    fn flow(&self, t: f64, omega: &OmegaPoint) -> OmegaPoint;

    fn sample(&self, rng: &mut dyn RngCore) -> OmegaPoint;

    /// Distance in the point encoding.
    fn distance(&self, a: &OmegaPoint, b: &OmegaPoint) -> f64 {
        a.0.iter()
            .zip(&b.0)
            .fold(0.0, |m, (p, q)| m.max((p - q).abs()))
    }

    fn drive(&self, t: f64, omega: &OmegaPoint) -> Result<OmegaPoint> {
        self.time_domain().check(t)?;
        Ok(self.flow(t, omega))
    }
}

/// Translation `θ^t x = x + t` on the real line, sampled uniformly from
/// `[-radius, radius]`.
#[derive(Debug, Clone)]
pub struct Shift {
    pub domain: TimeDomain,
    pub radius: f64,
}

impl Shift {
    pub fn discrete() -> Self {
        Shift { domain: TimeDomain::Discrete, radius: 5.0 }
    }

    pub fn continuous() -> Self {
        Shift { domain: TimeDomain::Continuous, radius: 5.0 }
    }
}

impl DrivingSystem for Shift {
    fn time_domain(&self) -> TimeDomain {
        self.domain
    }

    fn coord_dim(&self) -> usize {
        1
    }

    fn flow(&self, t: f64, omega: &OmegaPoint) -> OmegaPoint {
        OmegaPoint::scalar(omega.x() + t)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> OmegaPoint {
        OmegaPoint::scalar(rng.random_range(-self.radius..=self.radius))
    }
}

/// The horizontal flow `θ^t (x, y) = (x + t, y)` on the plane.
#[derive(Debug, Clone)]
pub struct HorizontalFlow {
    pub domain: TimeDomain,
    pub x_radius: f64,
    pub y_radius: f64,
}

impl HorizontalFlow {
    pub fn new(domain: TimeDomain) -> Self {
        HorizontalFlow { domain, x_radius: 3.0, y_radius: 1.0 }
    }
}

impl DrivingSystem for HorizontalFlow {
    fn time_domain(&self) -> TimeDomain {
        self.domain
    }

    fn coord_dim(&self) -> usize {
        2
    }

    fn flow(&self, t: f64, omega: &OmegaPoint) -> OmegaPoint {
        OmegaPoint::new([omega.x() + t, omega.y()])
    }

    fn sample(&self, rng: &mut dyn RngCore) -> OmegaPoint {
        OmegaPoint::new([
            rng.random_range(-self.x_radius..=self.x_radius),
            rng.random_range(-self.y_radius..=self.y_radius),
        ])
    }
}

/// Rotation of the circle `[0, 1)` by `rho` per unit time.
#[derive(Debug, Clone)]
pub struct CircleRotation {
    pub domain: TimeDomain,
    pub rho: f64,
}

impl CircleRotation {
    /// Rotation by the golden-ratio conjugate, an irrational angle.
    pub fn golden(domain: TimeDomain) -> Self {
        CircleRotation { domain, rho: (5f64.sqrt() - 1.0) / 2.0 }
    }
}

impl DrivingSystem for CircleRotation {
    fn time_domain(&self) -> TimeDomain {
        self.domain
    }

    fn coord_dim(&self) -> usize {
        1
    }

    fn flow(&self, t: f64, omega: &OmegaPoint) -> OmegaPoint {
        OmegaPoint::scalar((omega.x() + self.rho * t).rem_euclid(1.0))
    }

    fn sample(&self, rng: &mut dyn RngCore) -> OmegaPoint {
        OmegaPoint::scalar(rng.random_range(0.0..1.0))
    }

    fn distance(&self, a: &OmegaPoint, b: &OmegaPoint) -> f64 {
        let d = (a.x() - b.x()).rem_euclid(1.0);
        d.min(1.0 - d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_flow_moves_x_only() {
        let flow = HorizontalFlow::new(TimeDomain::Continuous);
        let w = flow.drive(1.5, &OmegaPoint::new([0.2, 1.0])).unwrap();
        assert!((w.x() - 1.7).abs() < 1e-15);
        assert_eq!(w.y(), 1.0);
    }

    #[test]
    fn zero_time_is_identity() {
        let w = OmegaPoint::new([0.3, -0.7]);
        let flow = HorizontalFlow::new(TimeDomain::Continuous);
        assert_eq!(flow.drive(0.0, &w).unwrap(), w);
        let rot = CircleRotation::golden(TimeDomain::Discrete);
        let a = OmegaPoint::scalar(0.25);
        assert_eq!(rot.drive(0.0, &a).unwrap(), a);
    }

    #[test]
    fn integer_shift_round_trip() {
        let shift = Shift::discrete();
        let w = OmegaPoint::scalar(0.4);
        let there = shift.drive(3.0, &w).unwrap();
        let back = shift.drive(-3.0, &there).unwrap();
        assert!(shift.distance(&back, &w) <= 1e-15);
    }

    #[test]
    fn discrete_rejects_fractional_time() {
        let shift = Shift::discrete();
        let err = shift.drive(0.5, &OmegaPoint::scalar(0.0)).unwrap_err();
        assert_eq!(err, Error::NonIntegerTime(0.5));
    }

    #[test]
    fn circle_distance_wraps() {
        let rot = CircleRotation::golden(TimeDomain::Continuous);
        let d = rot.distance(&OmegaPoint::scalar(0.99), &OmegaPoint::scalar(0.01));
        assert!((d - 0.02).abs() < 1e-12);
    }
}
