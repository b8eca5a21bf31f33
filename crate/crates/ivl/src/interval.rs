//! Closed real intervals with binary64 endpoints and outward rounding.

use crate::round::*;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::IvlError;

/// A closed interval `[lo, hi]` with `lo <= hi`, or the empty set.
///
/// The empty interval is a dedicated sentinel (both endpoints NaN); an
/// interval with `lo > hi` can never be constructed. Every arithmetic
/// operation returns an enclosure of the exact real result set.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::NAN,
        hi: f64::NAN,
    };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Enclosure of pi.
    pub fn pi() -> Interval {
        Interval {
            lo: std::f64::consts::PI,
            hi: std::f64::consts::PI.next_up(),
        }
    }

    /// Enclosure of 2*pi.
    pub fn two_pi() -> Interval {
        let p = Interval::pi();
        Interval {
            lo: 2.0 * p.lo,
            hi: 2.0 * p.hi,
        }
    }

    #[inline]
    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(
            lo <= hi,
            "invalid interval endpoints [{lo}, {hi}]"
        );
        Interval { lo, hi }
    }

    #[inline]
    pub fn point(x: f64) -> Interval {
        assert!(!x.is_nan());
        Interval { lo: x, hi: x }
    }

    /// `center + [-r, r]`, outward rounded.
    #[inline]
    pub fn centered(center: f64, r: f64) -> Interval {
        assert!(r >= 0.0);
        Interval {
            lo: sub_down(center, r),
            hi: add_up(center, r),
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.lo.is_nan()
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn mid(&self) -> f64 {
        debug_assert!(!self.is_empty());
        let m = 0.5 * (self.lo + self.hi);
        if m.is_finite() {
            m.clamp(self.lo, self.hi)
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    /// Radius measured from `mid()`, rounded up, so `self ⊆ mid ± rad`.
    #[inline]
    pub fn rad(&self) -> f64 {
        let m = self.mid();
        f64::max(sub_up(m, self.lo), sub_up(self.hi, m))
    }

    #[inline]
    pub fn width(&self) -> f64 {
        debug_assert!(!self.is_empty());
        sub_up(self.hi, self.lo)
    }

    /// Magnitude: max |x| over the interval.
    #[inline]
    pub fn mag(&self) -> f64 {
        f64::max(self.lo.abs(), self.hi.abs())
    }

    /// Mignitude: min |x| over the interval (0 if it contains 0).
    #[inline]
    pub fn mig(&self) -> f64 {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            f64::min(self.lo.abs(), self.hi.abs())
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        !self.is_empty() && self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    #[inline]
    pub fn subset(&self, other: &Interval) -> bool {
        if self.is_empty() {
            return true;
        }
        if other.is_empty() {
            return false;
        }
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Strict subset of the interior.
    #[inline]
    pub fn interior_subset(&self, other: &Interval) -> bool {
        if self.is_empty() {
            return true;
        }
        if other.is_empty() {
            return false;
        }
        other.lo < self.lo && self.hi < other.hi
    }

    #[inline]
    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    #[inline]
    pub fn meet(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Interval { lo, hi }
        } else {
            Interval::EMPTY
        }
    }

    /// Widen by `eps` on each side (outward rounded).
    #[inline]
    pub fn inflate(&self, eps: f64) -> Interval {
        debug_assert!(eps >= 0.0 && !self.is_empty());
        Interval {
            lo: sub_down(self.lo, eps),
            hi: add_up(self.hi, eps),
        }
    }

    /// Widen each endpoint by one ulp.
    #[inline]
    pub fn widen_ulp(&self) -> Interval {
        Interval {
            lo: next_down(self.lo),
            hi: next_up(self.hi),
        }
    }

    /// Multiply by an exact f64 without directed-rounding slack when exact.
    #[inline]
    pub fn scale(&self, k: f64) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if k >= 0.0 {
            Interval {
                lo: mul_down(self.lo, k),
                hi: mul_up(self.hi, k),
            }
        } else {
            Interval {
                lo: mul_down(self.hi, k),
                hi: mul_up(self.lo, k),
            }
        }
    }

    #[inline]
    pub fn recip(&self) -> Result<Interval, IvlError> {
        if self.is_empty() {
            return Ok(Interval::EMPTY);
        }
        if self.contains_zero() {
            return Err(IvlError::DivisionByZeroInterval);
        }
        Ok(Interval {
            lo: div_down(1.0, self.hi),
            hi: div_up(1.0, self.lo),
        })
    }

    #[inline]
    pub fn checked_div(&self, other: &Interval) -> Result<Interval, IvlError> {
        if self.is_empty() || other.is_empty() {
            return Ok(Interval::EMPTY);
        }
        if other.contains_zero() {
            return Err(IvlError::DivisionByZeroInterval);
        }
        let candidates_lo = [
            div_down(self.lo, other.lo),
            div_down(self.lo, other.hi),
            div_down(self.hi, other.lo),
            div_down(self.hi, other.hi),
        ];
        let candidates_hi = [
            div_up(self.lo, other.lo),
            div_up(self.lo, other.hi),
            div_up(self.hi, other.lo),
            div_up(self.hi, other.hi),
        ];
        Ok(Interval {
            lo: candidates_lo.iter().copied().fold(f64::INFINITY, f64::min),
            hi: candidates_hi
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Square root under the strict domain policy.
    pub fn checked_sqrt(&self) -> Result<Interval, IvlError> {
        if self.is_empty() {
            return Ok(Interval::EMPTY);
        }
        if self.lo < 0.0 {
            return Err(IvlError::DomainError {
                op: "sqrt",
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(Interval {
            lo: sqrt_down(self.lo),
            hi: sqrt_up(self.hi),
        })
    }

    /// Square root with the negative part truncated away.
    pub fn sqrt_clamped(&self) -> Result<Interval, IvlError> {
        if self.is_empty() {
            return Ok(Interval::EMPTY);
        }
        if self.hi < 0.0 {
            return Err(IvlError::DomainError {
                op: "sqrt",
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(Interval {
            lo: sqrt_down(self.lo.max(0.0)),
            hi: sqrt_up(self.hi),
        })
    }

    /// Panicking square root for callers that have checked positivity.
    #[inline]
    pub fn sqrt(&self) -> Interval {
        self.checked_sqrt().expect("sqrt of negative interval")
    }

    #[inline]
    pub fn sqr(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        let mig = self.mig();
        let mag = self.mag();
        Interval {
            lo: mul_down(mig, mig),
            hi: mul_up(mag, mag),
        }
    }

    /// Integer power.
    pub fn powi(&self, n: i32) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if n == 0 {
            return Interval::ONE;
        }
        if n < 0 {
            return self
                .powi(-n)
                .recip()
                .expect("negative power of interval containing zero");
        }
        if n % 2 == 0 {
            // even: monotone in |x|
            let mig = self.mig();
            let mag = self.mag();
            Interval {
                lo: pow_down(mig, n as u32),
                hi: pow_up(mag, n as u32),
            }
        } else {
            Interval {
                lo: pow_dir_signed(self.lo, n as u32, false),
                hi: pow_dir_signed(self.hi, n as u32, true),
            }
        }
    }

    /// |x| over the interval, as an interval.
    #[inline]
    pub fn abs(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: self.mig(),
            hi: self.mag(),
        }
    }

    pub fn sin(&self) -> Interval {
        trig(self, TrigKind::Sin)
    }

    pub fn cos(&self) -> Interval {
        trig(self, TrigKind::Cos)
    }

    /// Arctangent (monotone, libm endpoints padded).
    pub fn atan(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        let lo = pad_down(self.lo.atan());
        let hi = pad_up(self.hi.atan());
        let half_pi = Interval::pi().scale(0.5);
        Interval {
            lo: lo.max(-half_pi.hi),
            hi: hi.min(half_pi.hi),
        }
    }
}

const LIBM_PAD_ULPS: u32 = 2;

#[inline]
fn pad_down(x: f64) -> f64 {
    let mut y = x;
    for _ in 0..LIBM_PAD_ULPS {
        y = next_down(y);
    }
    y
}

#[inline]
fn pad_up(x: f64) -> f64 {
    let mut y = x;
    for _ in 0..LIBM_PAD_ULPS {
        y = next_up(y);
    }
    y
}

fn pow_down(base: f64, n: u32) -> f64 {
    debug_assert!(base >= 0.0);
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc = mul_down(acc, base);
    }
    acc
}

fn pow_up(base: f64, n: u32) -> f64 {
    debug_assert!(base >= 0.0);
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc = mul_up(acc, base);
    }
    acc
}

// Directed odd power of a possibly-negative endpoint.
fn pow_dir_signed(x: f64, n: u32, up: bool) -> f64 {
    if x >= 0.0 {
        if up {
            pow_up(x, n)
        } else {
            pow_down(x, n)
        }
    } else {
        // odd power: (-a)^n = -(a^n); direction flips
        let a = -x;
        if up {
            -pow_down(a, n)
        } else {
            -pow_up(a, n)
        }
    }
}

enum TrigKind {
    Sin,
    Cos,
}

/// Sin/cos by quadrant analysis: libm endpoint values (padded) plus +-1
/// whenever a critical point may lie inside the argument range.
fn trig(x: &Interval, kind: TrigKind) -> Interval {
    if x.is_empty() {
        return Interval::EMPTY;
    }
    let two_pi = Interval::two_pi();
    if x.width() >= two_pi.lo() {
        return Interval::new(-1.0, 1.0);
    }
    let (f_lo, f_hi) = match kind {
        TrigKind::Sin => (pad_down(x.lo.sin()), pad_up(x.lo.sin())),
        TrigKind::Cos => (pad_down(x.lo.cos()), pad_up(x.lo.cos())),
    };
    let (g_lo, g_hi) = match kind {
        TrigKind::Sin => (pad_down(x.hi.sin()), pad_up(x.hi.sin())),
        TrigKind::Cos => (pad_down(x.hi.cos()), pad_up(x.hi.cos())),
    };
    let mut lo = f_lo.min(g_lo);
    let mut hi = f_hi.max(g_hi);

    // Shift so the interval starts near [0, 2pi); the shift is rigorous
    // interval arithmetic, so critical-point containment checks are sound.
    let k = (x.lo / (2.0 * std::f64::consts::PI)).floor();
    let shift = two_pi.scale(k);
    let reduced = *x - shift;
    // Critical points of sin: pi/2 + m*pi; of cos: m*pi.
    let half_pi = Interval::pi().scale(0.5);
    for m in -1i32..=5 {
        let c = match kind {
            TrigKind::Sin => Interval::pi().scale(m as f64) + half_pi,
            TrigKind::Cos => Interval::pi().scale(m as f64),
        };
        if !c.meet(&reduced).is_empty() {
            // maximum when the critical point is an even multiple phase
            let is_max = match kind {
                TrigKind::Sin => m % 2 == 0,
                TrigKind::Cos => m.rem_euclid(2) == 0,
            };
            if is_max {
                hi = 1.0;
            } else {
                lo = -1.0;
            }
        }
    }
    Interval::new(lo.max(-1.0), hi.min(1.0))
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, rhs: Interval) -> Interval {
        if self.is_empty() || rhs.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: add_down(self.lo, rhs.lo),
            hi: add_up(self.hi, rhs.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, rhs: Interval) -> Interval {
        if self.is_empty() || rhs.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: sub_down(self.lo, rhs.hi),
            hi: sub_up(self.hi, rhs.lo),
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    #[inline]
    fn mul(self, rhs: Interval) -> Interval {
        if self.is_empty() || rhs.is_empty() {
            return Interval::EMPTY;
        }
        let (a, b, c, d) = (self.lo, self.hi, rhs.lo, rhs.hi);
        let lo = mul_down(a, c)
            .min(mul_down(a, d))
            .min(mul_down(b, c))
            .min(mul_down(b, d));
        let hi = mul_up(a, c)
            .max(mul_up(a, d))
            .max(mul_up(b, c))
            .max(mul_up(b, d));
        Interval { lo, hi }
    }
}

impl Div for Interval {
    type Output = Interval;
    #[inline]
    fn div(self, rhs: Interval) -> Interval {
        self.checked_div(&rhs)
            .expect("interval division by interval containing zero")
    }
}

impl Neg for Interval {
    type Output = Interval;
    #[inline]
    fn neg(self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl From<f64> for Interval {
    #[inline]
    fn from(x: f64) -> Interval {
        Interval::point(x)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{:?}, {:?}]", self.lo, self.hi)
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

// JSON form: {"lo": "<shortest round-trip decimal>", "hi": ...}.
#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: String,
    hi: String,
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = if self.is_empty() {
            IntervalRepr {
                lo: "empty".into(),
                hi: "empty".into(),
            }
        } else {
            IntervalRepr {
                lo: format_exact(self.lo),
                hi: format_exact(self.hi),
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Interval, D::Error> {
        let repr = IntervalRepr::deserialize(deserializer)?;
        if repr.lo == "empty" || repr.hi == "empty" {
            return Ok(Interval::EMPTY);
        }
        let lo = parse_exact(&repr.lo).map_err(D::Error::custom)?;
        let hi = parse_exact(&repr.hi).map_err(D::Error::custom)?;
        if lo > hi {
            return Err(D::Error::custom(format!(
                "interval endpoints out of order: {lo} > {hi}"
            )));
        }
        Ok(Interval { lo, hi })
    }
}

fn format_exact(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        // Rust's Display for f64 is shortest round-trip.
        format!("{x}")
    }
}

fn parse_exact(s: &str) -> Result<f64, String> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .map_err(|e| format!("bad decimal endpoint {s:?}: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_endpoint_arithmetic() {
        let a = Interval::new(1.0, 2.0);
        let b = Interval::new(3.0, 4.0);
        assert_eq!(a + b, Interval::new(4.0, 6.0));
        let c = Interval::new(-1.0, 2.0);
        assert_eq!(c * b, Interval::new(-4.0, 8.0));
        assert_eq!(Interval::new(4.0, 9.0).sqrt(), Interval::new(2.0, 3.0));
    }

    #[test]
    fn hull_and_meet() {
        let a = Interval::new(0.0, 1.0);
        let b = Interval::new(2.0, 3.0);
        assert_eq!(a.hull(&b), Interval::new(0.0, 3.0));
        assert_eq!(
            Interval::new(0.0, 2.0).meet(&Interval::new(1.0, 3.0)),
            Interval::new(1.0, 2.0)
        );
        assert!(a.meet(&b).is_empty());
    }

    #[test]
    fn division_errors_on_zero_divisor() {
        let a = Interval::new(1.0, 1.0);
        let b = Interval::new(-1.0, 1.0);
        assert!(a.checked_div(&b).is_err());
        let c = Interval::new(1.9, 2.1);
        let q = a.checked_div(&c).unwrap();
        assert!(q.lo() <= 1.0 / 2.1 && 1.0 / 1.9 <= q.hi());
        assert!(q.width() < 0.06);
    }

    #[test]
    fn sqrt_domain_policy() {
        assert!(Interval::new(-1.0, 1.0).checked_sqrt().is_err());
        let t = Interval::new(-1.0, 4.0).sqrt_clamped().unwrap();
        assert!(t.lo() == 0.0 && t.hi() >= 2.0);
        assert!(Interval::new(-2.0, -1.0).sqrt_clamped().is_err());
    }

    #[test]
    fn trig_basic_ranges() {
        let full = Interval::new(0.0, 10.0).sin();
        assert_eq!(full, Interval::new(-1.0, 1.0));
        let c = Interval::new(0.0, 0.1).cos();
        assert!(c.hi() >= 1.0 - 1e-12 && c.lo() <= 1.0);
        assert!(c.lo() >= 0.99);
        let s = Interval::new(1.5, 1.7).sin();
        assert_eq!(s.hi(), 1.0);
        assert!(s.lo() > 0.99);
        // cos over an interval around pi must reach -1
        let c2 = Interval::new(3.0, 3.3).cos();
        assert_eq!(c2.lo(), -1.0);
    }

    #[test]
    fn trig_containment_sampled() {
        for i in 0..2000 {
            let a = -20.0 + 0.017 * i as f64;
            let w = 0.01 * ((i % 7) as f64);
            let x = Interval::new(a, a + w);
            let s = x.sin();
            let c = x.cos();
            for j in 0..5 {
                let t = a + w * (j as f64) / 4.0;
                assert!(s.contains(t.sin()), "sin({t}) not in {s:?}");
                assert!(c.contains(t.cos()), "cos({t}) not in {c:?}");
            }
        }
    }

    #[test]
    fn powi_cases() {
        let x = Interval::new(-2.0, 3.0);
        assert_eq!(x.powi(2), Interval::new(0.0, 9.0));
        assert_eq!(x.powi(3).lo(), -8.0);
        assert_eq!(x.powi(0), Interval::ONE);
        let y = Interval::new(2.0, 2.0);
        let inv3 = y.powi(-3);
        assert!(inv3.contains(0.125));
        assert!(inv3.width() < 1e-16);
    }

    #[test]
    fn atan_monotone() {
        let x = Interval::new(1.0, 2.0);
        let a = x.atan();
        assert!(a.contains(1.0f64.atan()) && a.contains(2.0f64.atan()));
        assert!(a.width() < (2.0f64.atan() - 1.0f64.atan()) + 1e-14);
    }

    #[test]
    fn serde_round_trip_bit_exact() {
        let xs = [
            Interval::new(-0.1, 0.30000000000000004),
            Interval::point(std::f64::consts::PI),
            Interval::new(f64::MIN, f64::MAX),
            Interval::EMPTY,
        ];
        for x in xs {
            let j = serde_json::to_string(&x).unwrap();
            let y: Interval = serde_json::from_str(&j).unwrap();
            if x.is_empty() {
                assert!(y.is_empty());
            } else {
                assert_eq!(x.lo().to_bits(), y.lo().to_bits());
                assert_eq!(x.hi().to_bits(), y.hi().to_bits());
            }
        }
    }
}
