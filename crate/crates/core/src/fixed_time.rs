//! The scalar fixed-time stable law
//!
//! ```text
//! ż = −ψ(z),   ψ(z) = (π/τ)(|z|^½ + |z|^³ᐟ²)·sign(z)
//! ```
//!
//! reaches the origin no later than `(2τ/π)·arctan(√|z₀|) < τ`, whatever `z₀`.
//! The closed-form solution, the settling time and a deadband-regularized
//! variant for explicit integration live here.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::integrator::OdeSystem;

/// Half-width of the linear segment that replaces ψ around the origin.
pub const DEFAULT_DEADBAND: f64 = 1e-12;

/// User-chosen upper bound on the settling time, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SettlingTime(f64);

impl SettlingTime {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(Self(tau))
        } else {
            Err(Error::validation("tau", format!("must be finite and > 0, got {tau}")))
        }
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// The gain `π/τ` in front of ψ.
    pub fn gain(self) -> f64 {
        PI / self.0
    }
}

impl TryFrom<f64> for SettlingTime {
    type Error = Error;
    fn try_from(tau: f64) -> Result<Self> {
        Self::new(tau)
    }
}

impl From<SettlingTime> for f64 {
    fn from(t: SettlingTime) -> f64 {
        t.0
    }
}

#[inline]
fn psi_unchecked(z: f64, tau: SettlingTime) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let a = z.abs();
    let s = a.sqrt();
    tau.gain() * (s + a * s) * z.signum()
}

pub fn psi(z: f64, tau: SettlingTime) -> Result<f64> {
    ensure_finite("psi argument", z)?;
    Ok(psi_unchecked(z, tau))
}

pub fn psi_vec(v: &DVector<f64>, tau: SettlingTime) -> Result<DVector<f64>> {
    for &z in v.iter() {
        ensure_finite("psi argument", z)?;
    }
    Ok(v.map(|z| psi_unchecked(z, tau)))
}

/// ψ with the non-Lipschitz cusp at the origin replaced by the chord through
/// `(−ε, −ψ(ε))` and `(ε, ψ(ε))`.
#[inline]
pub fn psi_regularized(z: f64, tau: SettlingTime, eps: f64) -> f64 {
    if z.abs() < eps {
        psi_unchecked(eps, tau) * (z / eps)
    } else {
        psi_unchecked(z, tau)
    }
}

pub fn psi_vec_regularized(v: &DVector<f64>, tau: SettlingTime, eps: f64) -> Result<DVector<f64>> {
    for &z in v.iter() {
        ensure_finite("psi argument", z)?;
    }
    Ok(v.map(|z| psi_regularized(z, tau, eps)))
}

/// `(2τ/π)·arctan(√|z₀|)`: the instant the solution starting at `z0` hits zero.
pub fn settling_time_of(z0: f64, tau: SettlingTime) -> f64 {
    2.0 * tau.seconds() / PI * z0.abs().sqrt().atan()
}

/// Closed-form solution of `ż = −ψ(z)`, held at exactly zero from the
/// settling instant on.
pub fn closed_form_solution(z0: f64, tau: SettlingTime, t: f64) -> Result<f64> {
    ensure_finite("initial value", z0)?;
    ensure_finite("time", t)?;
    if t < 0.0 {
        return Err(Error::validation("t", format!("must be >= 0, got {t}")));
    }
    if z0 == 0.0 || t >= settling_time_of(z0, tau) {
        return Ok(0.0);
    }
    // angle lies in (0, π/2) here because t is before the settling instant
    let angle = z0.abs().sqrt().atan() - FRAC_PI_2 * t / tau.seconds();
    let tan = angle.tan();
    Ok(z0.signum() * tan * tan)
}

/// One solution of the fixed-time law, identified by its initial value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedTimeState {
    pub z0: f64,
    pub tau: SettlingTime,
}

impl FixedTimeState {
    pub fn new(z0: f64, tau: SettlingTime) -> Result<Self> {
        ensure_finite("initial value", z0)?;
        Ok(Self { z0, tau })
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        closed_form_solution(self.z0, self.tau, t)
    }

    pub fn settling_time(&self) -> f64 {
        settling_time_of(self.z0, self.tau)
    }
}

/// `ż = −ψ_ε(z)` componentwise, as an ODE for the project integrator.
#[derive(Debug, Clone, Copy)]
pub struct FixedTimeOde {
    pub tau: SettlingTime,
    pub deadband: f64,
    pub dim: usize,
}

impl FixedTimeOde {
    pub fn scalar(tau: SettlingTime) -> Self {
        Self {
            tau,
            deadband: DEFAULT_DEADBAND,
            dim: 1,
        }
    }
}

impl OdeSystem for FixedTimeOde {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, _t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-psi_vec_regularized(y, self.tau, self.deadband)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tau(t: f64) -> SettlingTime {
        SettlingTime::new(t).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.0, tau(3.0)).unwrap(), 0.0);
        assert!((psi(1.0, tau(1.0)).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!((psi(-4.0, tau(2.0)).unwrap() + 5.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn psi_rejects_non_finite() {
        assert!(matches!(psi(f64::NAN, tau(1.0)), Err(Error::NonFinite { .. })));
        assert!(psi(f64::INFINITY, tau(1.0)).is_err());
        let v = DVector::from_vec(vec![1.0, f64::NAN]);
        assert!(psi_vec(&v, tau(1.0)).is_err());
    }

    #[test]
    fn psi_vec_examples() {
        let z = psi_vec(&DVector::from_vec(vec![0.0, 0.0]), tau(2.0)).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0]);
        let a = psi_vec(&DVector::from_vec(vec![1.0, -1.0]), tau(1.0)).unwrap();
        assert!((a[0] - 2.0 * PI).abs() < 1e-14 && (a[1] + 2.0 * PI).abs() < 1e-14);
        let b = psi_vec(&DVector::from_vec(vec![1.0, -4.0]), tau(2.0)).unwrap();
        assert!((b[0] - PI).abs() < 1e-14 && (b[1] + 5.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn settling_tau_must_be_positive() {
        assert!(SettlingTime::new(0.0).is_err());
        assert!(SettlingTime::new(-1.0).is_err());
        assert!(SettlingTime::new(f64::NAN).is_err());
    }

    #[test]
    fn settling_time_examples() {
        assert_eq!(settling_time_of(0.0, tau(3.0)), 0.0);
        assert!((settling_time_of(1.0, tau(1.0)) - 0.5).abs() < 1e-15);
        let big = settling_time_of(1e12, tau(3.0));
        assert!(big > 2.99999 && big < 3.0, "{big}");
    }

    #[test]
    fn closed_form_examples() {
        for t in [0.0, 0.3, 10.0] {
            assert_eq!(closed_form_solution(0.0, tau(2.0), t).unwrap(), 0.0);
        }
        assert_eq!(closed_form_solution(1.0, tau(1.0), 0.5).unwrap(), 0.0);
        assert_eq!(closed_form_solution(1.0, tau(1.0), 0.75).unwrap(), 0.0);
        let q = closed_form_solution(1.0, tau(1.0), 0.25).unwrap();
        let expected = (PI / 8.0).tan().powi(2);
        assert!((q - expected).abs() < 1e-15);
        assert!((q - 0.17157).abs() < 1e-5);
        assert!((closed_form_solution(5.0, tau(1.0), 0.0).unwrap() - 5.0).abs() < 1e-13);
    }

    #[test]
    fn closed_form_rejects_negative_time() {
        assert!(closed_form_solution(1.0, tau(1.0), -0.1).is_err());
    }

    #[test]
    fn regularized_psi_is_linear_inside_deadband() {
        let t = tau(1.0);
        let eps = 1e-6;
        let inside = psi_regularized(0.5e-6, t, eps);
        assert!((inside - 0.5 * psi(eps, t).unwrap()).abs() < 1e-18);
        assert_eq!(psi_regularized(2e-6, t, eps), psi(2e-6, t).unwrap());
        assert_eq!(psi_regularized(0.0, t, eps), 0.0);
    }

    proptest! {
        #[test]
        fn psi_is_odd_and_sign_preserving(z in -1e6f64..1e6, t in 0.01f64..10.0) {
            let p = psi(z, tau(t)).unwrap();
            prop_assert_eq!(p, -psi(-z, tau(t)).unwrap());
            prop_assert_eq!(p.signum() * z.abs().signum(), z.signum() * z.abs().signum());
        }

        #[test]
        fn settling_time_below_tau(z in -1e15f64..1e15, t in 0.01f64..10.0) {
            prop_assert!(settling_time_of(z, tau(t)) < t);
        }

        #[test]
        fn closed_form_odd_and_monotone(z0 in -100.0f64..100.0, t in 0.1f64..5.0) {
            let s = FixedTimeState::new(z0, tau(t)).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=200 {
                let time = 1.2 * t * k as f64 / 200.0;
                let z = s.at(time).unwrap();
                prop_assert_eq!(z, -closed_form_solution(-z0, tau(t), time).unwrap());
                prop_assert!(z.abs() <= prev + 1e-12 * prev.min(1.0));
                prev = z.abs();
            }
            prop_assert_eq!(s.at(s.settling_time()).unwrap(), 0.0);
        }
    }
}
