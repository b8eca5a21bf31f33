//! Directed rounding primitives on binary64.
//!
//! We do not touch the FPU rounding mode. Instead every primitive operation
//! is performed in round-to-nearest and corrected by one ulp in the required
//! direction, using error-free transformations (two-sum, FMA residuals) to
//! detect when the nearest result is already exact or already on the correct
//! side. The result is a correctly rounded directed operation for
//! `+ - * / sqrt`.

#[inline]
pub fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        x
    } else {
        x.next_up()
    }
}

#[inline]
pub fn next_down(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        x
    } else {
        x.next_down()
    }
}

/// Error-free sum: returns (s, e) with s = fl(a+b) and a + b = s + e exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    let e = (a - av) + (b - bv);
    (s, e)
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if s.is_infinite() {
        return if s > 0.0 { f64::MAX } else { s };
    }
    if e < 0.0 {
        next_down(s)
    } else {
        s
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if s.is_infinite() {
        return if s < 0.0 { f64::MIN } else { s };
    }
    if e > 0.0 {
        next_up(s)
    } else {
        s
    }
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_infinite() {
        return if p > 0.0 { f64::MAX } else { p };
    }
    // e is the exact residual a*b - p (exact when p is normal).
    let e = a.mul_add(b, -p);
    if e < 0.0 || (e == 0.0 && p.is_subnormal() && exact_product_below(a, b, p)) {
        next_down(p)
    } else {
        p
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_infinite() {
        return if p < 0.0 { f64::MIN } else { p };
    }
    let e = a.mul_add(b, -p);
    if e > 0.0 || (e == 0.0 && p.is_subnormal() && exact_product_above(a, b, p)) {
        next_up(p)
    } else {
        p
    }
}

// In the subnormal range the FMA residual can underflow to zero while the
// product is inexact. One extra widening ulp is applied there; tightness in
// that range is irrelevant for this crate's use.
#[inline]
fn exact_product_below(a: f64, b: f64, _p: f64) -> bool {
    a != 0.0 && b != 0.0
}

#[inline]
fn exact_product_above(a: f64, b: f64, _p: f64) -> bool {
    a != 0.0 && b != 0.0
}

#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    debug_assert!(b != 0.0);
    let q = a / b;
    if q.is_infinite() {
        return if q > 0.0 { f64::MAX } else { q };
    }
    // r = a - q*b exactly; exact quotient is q + r/b.
    let r = q.mul_add(-b, a);
    if r == 0.0 {
        q
    } else if (r > 0.0) == (b > 0.0) {
        q
    } else {
        next_down(q)
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    debug_assert!(b != 0.0);
    let q = a / b;
    if q.is_infinite() {
        return if q < 0.0 { f64::MIN } else { q };
    }
    let r = q.mul_add(-b, a);
    if r == 0.0 {
        q
    } else if (r > 0.0) == (b > 0.0) {
        next_up(q)
    } else {
        q
    }
}

#[inline]
pub fn sqrt_down(a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    let s = a.sqrt();
    let d = s.mul_add(s, -a);
    if d > 0.0 {
        next_down(s)
    } else {
        s
    }
}

#[inline]
pub fn sqrt_up(a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    let s = a.sqrt();
    let d = s.mul_add(s, -a);
    if d < 0.0 {
        next_up(s)
    } else {
        s
    }
}
