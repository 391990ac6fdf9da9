//! Forward-mode differentiation with hyper-dual numbers.
//!
//! A hyper-dual number `a + b·ε₁ + c·ε₂ + d·ε₁ε₂` with `ε₁² = ε₂² = 0` carries
//! a value, two independent directional first derivatives and their mixed
//! second derivative. Seeding variable `i` along `ε₁` and variable `j` along
//! `ε₂` yields `∂f/∂i`, `∂f/∂j` and `∂²f/∂i∂j` from one evaluation, exact up
//! to rounding.
//!
//! Problem definitions are written once against [`Real`] and evaluated with
//! either `f64` or [`HyperDual`].

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar field the problem definitions are generic over.
pub trait Real:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + 'static
{
    fn from_f64(v: f64) -> Self;
    /// The real (non-infinitesimal) part.
    fn re(&self) -> f64;
    fn recip(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn recip(self) -> Self {
        f64::recip(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// `re + e1·ε₁ + e2·ε₂ + e12·ε₁ε₂`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub const fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    pub const fn constant(re: f64) -> Self {
        Self::new(re, 0.0, 0.0, 0.0)
    }

    /// Seed a variable with unit perturbations along the requested directions.
    pub const fn seeded(re: f64, along_e1: bool, along_e2: bool) -> Self {
        Self::new(
            re,
            if along_e1 { 1.0 } else { 0.0 },
            if along_e2 { 1.0 } else { 0.0 },
            0.0,
        )
    }

    /// Apply a scalar function given its value and first two derivatives at `re`.
    #[inline]
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Self {
            re: f0,
            e1: f1 * self.e1,
            e2: f1 * self.e2,
            e12: f1 * self.e12 + f2 * self.e1 * self.e2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for HyperDual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Neg for HyperDual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl Add<f64> for HyperDual {
    type Output = Self;
    #[inline]
    fn add(self, o: f64) -> Self {
        Self { re: self.re + o, ..self }
    }
}

impl Sub<f64> for HyperDual {
    type Output = Self;
    #[inline]
    fn sub(self, o: f64) -> Self {
        Self { re: self.re - o, ..self }
    }
}

impl Mul<f64> for HyperDual {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        Self::new(self.re * o, self.e1 * o, self.e2 * o, self.e12 * o)
    }
}

impl AddAssign for HyperDual {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for HyperDual {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for HyperDual {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Real for HyperDual {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }

    fn re(&self) -> f64 {
        self.re
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.re;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.re))
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let r = 1.0 / self.re;
        self.chain(self.re.ln(), r, -r * r)
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => {
                let nf = f64::from(n);
                self.chain(
                    self.re.powi(n),
                    nf * self.re.powi(n - 1),
                    nf * (nf - 1.0) * self.re.powi(n - 2),
                )
            }
        }
    }
}

/// Value, first partials along both seeds, and the mixed second partial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

/// Evaluate `f` with variable `i` seeded along `ε₁` and variable `j` along `ε₂`.
pub fn second_partial<F>(point: &[f64], i: usize, j: usize, f: F) -> SecondOrder
where
    F: Fn(&[HyperDual]) -> HyperDual,
{
    let args: Vec<HyperDual> = point
        .iter()
        .enumerate()
        .map(|(k, &v)| HyperDual::seeded(v, k == i, k == j))
        .collect();
    let r = f(&args);
    SecondOrder {
        value: r.re,
        d1: r.e1,
        d2: r.e2,
        d12: r.e12,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_has_exact_constant_derivative() {
        let r = second_partial(&[2.0, -3.0], 0, 1, |v| v[0] * 4.0 - v[1] * 7.0 + 1.5);
        assert_eq!(r.value, 8.0 + 21.0 + 1.5);
        assert_eq!(r.d1, 4.0);
        assert_eq!(r.d2, -7.0);
        assert_eq!(r.d12, 0.0);
    }

    #[test]
    fn mixed_partial_of_product() {
        // f = x² y, ∂²f/∂x∂y = 2x
        let r = second_partial(&[3.0, 5.0], 0, 1, |v| v[0] * v[0] * v[1]);
        assert_eq!(r.value, 45.0);
        assert_eq!(r.d1, 30.0);
        assert_eq!(r.d2, 9.0);
        assert_eq!(r.d12, 6.0);
    }

    #[test]
    fn pure_second_derivative_of_reciprocal() {
        // f = -1/z, f' = 1/z², f'' = -2/z³
        let z = -0.25;
        let r = second_partial(&[z], 0, 0, |v| -v[0].recip());
        assert!((r.value - 4.0).abs() < 1e-15);
        assert!((r.d1 - 16.0).abs() < 1e-13);
        assert!((r.d12 - 128.0).abs() < 1e-12);
    }

    #[test]
    fn transcendental_rules() {
        let x = 0.7;
        let e = second_partial(&[x], 0, 0, |v| v[0].exp());
        assert!((e.d12 - x.exp()).abs() < 1e-15);
        let s = second_partial(&[x], 0, 0, |v| v[0].sqrt());
        assert!((s.d1 - 0.5 / x.sqrt()).abs() < 1e-15);
        assert!((s.d12 + 0.25 * x.powf(-1.5)).abs() < 1e-14);
        let l = second_partial(&[x], 0, 0, |v| v[0].ln());
        assert!((l.d12 + 1.0 / (x * x)).abs() < 1e-14);
        let p = second_partial(&[x], 0, 0, |v| v[0].powi(3));
        assert!((p.d12 - 6.0 * x).abs() < 1e-14);
    }
}
