//! Dual numbers for forward-mode automatic differentiation.
//!
//! A dual number `a + a'ε` with `ε² = 0` carries a value and one tangent.
//! `Dual<T>` is generic over its component type, so `Dual<Dual<f64>>`
//! carries two independent tangent directions plus their mixed second
//! derivative. That nesting is what the KKT residual Jacobian needs, since the
//! residual itself already contains first derivatives of the cost functions.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Numeric type accepted by game callbacks and generic numerical kernels.
pub trait Scalar:
    Copy
    + Debug
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    fn from_f64(v: f64) -> Self;
    /// Primal (real) part.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, e: Self) -> Self;
    /// Absolute value; the derivative at 0 is taken as 0.
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn is_finite(&self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
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
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dual<T> {
    pub value: T,
    pub deriv: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(value: T, deriv: T) -> Self {
        Dual { value, deriv }
    }

    pub fn constant(value: T) -> Self {
        Dual {
            value,
            deriv: T::zero(),
        }
    }

    pub fn variable(value: T) -> Self {
        Dual {
            value,
            deriv: T::one(),
        }
    }

    // chain rule: d f(g) = f'(g) dg
    fn chain(self, value: T, slope: T) -> Self {
        Dual {
            value,
            deriv: slope * self.deriv,
        }
    }
}

/// Scalar passed to game callbacks: two nested tangents.
///
/// `value.value` is the function value, `value.deriv` the derivative along
/// the inner seed, `deriv.value` the derivative along the outer seed and
/// `deriv.deriv` the mixed second derivative.
pub type Ad = Dual<Dual<f64>>;

impl Ad {
    /// Constant lifted into the callback scalar.
    pub fn cst(v: f64) -> Ad {
        Dual::constant(Dual::constant(v))
    }

    /// Value with inner tangent `d_inner` and outer tangent `d_outer`.
    pub fn seeded(v: f64, d_inner: f64, d_outer: f64) -> Ad {
        Dual::new(Dual::new(v, d_inner), Dual::new(d_outer, 0.0))
    }

    pub fn val(&self) -> f64 {
        self.value.value
    }

    pub fn d_inner(&self) -> f64 {
        self.value.deriv
    }

    pub fn d_outer(&self) -> f64 {
        self.deriv.value
    }

    pub fn d_mixed(&self) -> f64 {
        self.deriv.deriv
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }
    fn re(&self) -> f64 {
        self.value.re()
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, T::one() / (s * 2.0))
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.value.ln(), T::one() / self.value)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(T::one());
        }
        let slope = self.value.powi(n - 1) * (n as f64);
        self.chain(self.value.powi(n), slope)
    }
    fn powf(self, e: Self) -> Self {
        // d(a^b) = a^b (b' ln a + b a'/a)
        let v = self.value.powf(e.value);
        let mut deriv = v * e.value / self.value * self.deriv;
        // ln(a) only exists for a > 0; a constant exponent needs no ln term
        if self.value.re() > 0.0 {
            deriv += v * self.value.ln() * e.deriv;
        }
        Dual { value: v, deriv }
    }
    fn abs(self) -> Self {
        let r = self.value.re();
        let sign = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
        Dual {
            value: self.value.abs(),
            deriv: self.deriv * sign,
        }
    }
    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.deriv.is_finite()
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.value + o.value, self.deriv + o.deriv)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.value - o.value, self.deriv - o.deriv)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.value * o.value, self.deriv * o.value + self.value * o.deriv)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.value;
        let v = self.value * inv;
        Dual::new(v, (self.deriv - v * o.deriv) * inv)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.value, -self.deriv)
    }
}

impl<T: Scalar> Add<f64> for Dual<T> {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Dual::new(self.value + o, self.deriv)
    }
}

impl<T: Scalar> Sub<f64> for Dual<T> {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Dual::new(self.value - o, self.deriv)
    }
}

impl<T: Scalar> Mul<f64> for Dual<T> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Dual::new(self.value * o, self.deriv * o)
    }
}

impl<T: Scalar> Div<f64> for Dual<T> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Dual::new(self.value / o, self.deriv / o)
    }
}

impl<T: Scalar> Add<Dual<T>> for f64 {
    type Output = Dual<T>;
    fn add(self, o: Dual<T>) -> Dual<T> {
        o + self
    }
}

impl<T: Scalar> Sub<Dual<T>> for f64 {
    type Output = Dual<T>;
    fn sub(self, o: Dual<T>) -> Dual<T> {
        -o + self
    }
}

impl<T: Scalar> Mul<Dual<T>> for f64 {
    type Output = Dual<T>;
    fn mul(self, o: Dual<T>) -> Dual<T> {
        o * self
    }
}

impl<T: Scalar> Div<Dual<T>> for f64 {
    type Output = Dual<T>;
    fn div(self, o: Dual<T>) -> Dual<T> {
        Dual::<T>::from_f64(self) / o
    }
}

impl<T: Scalar> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> SubAssign for Dual<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> MulAssign for Dual<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> DivAssign for Dual<T> {
    fn div_assign(&mut self, o: Self) {
        *self = *self / o;
    }
}

impl<T: Scalar> Sum for Dual<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Dual::constant(T::zero()), |a, b| a + b)
    }
}
