//! Scalar abstraction shared by the validated and the plain floating-point
//! evaluation paths.
//!
//! The Taylor-coefficient recurrences for the vector field are written once,
//! generically; instantiating them with [`ivl::Interval`] gives rigorous
//! enclosures, with `f64` gives the fast non-rigorous path used for seeding
//! and step-size heuristics, and with a truncated power series gives the
//! parameter-jet transport used to fit the local chart.

use ivl::Interval;

pub trait Scalar: Clone + std::fmt::Debug {
    fn from_f64(x: f64) -> Self;
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// Multiplication by an exact f64 constant.
    fn scale(&self, k: f64) -> Self;
    /// Representative value for heuristics (midpoint / constant term).
    fn approx(&self) -> f64;
    /// Magnitude bound for step-size control and blow-up detection.
    fn bound(&self) -> f64;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
    fn approx(&self) -> f64 {
        *self
    }
    fn bound(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Interval {
    fn from_f64(x: f64) -> Self {
        Interval::point(x)
    }
    fn zero() -> Self {
        Interval::ZERO
    }
    fn one() -> Self {
        Interval::ONE
    }
    fn add(&self, rhs: &Self) -> Self {
        *self + *rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        *self - *rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        *self * *rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        *self / *rhs
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn sqrt(&self) -> Self {
        Interval::sqrt(self)
    }
    fn scale(&self, k: f64) -> Self {
        Interval::scale(self, k)
    }
    fn approx(&self) -> f64 {
        self.mid()
    }
    fn bound(&self) -> f64 {
        self.mag()
    }
}
