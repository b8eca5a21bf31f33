//! The planar restricted circular three-body problem in rotating coordinates.
//!
//! State is `(x, y, px, py)`; the heavy primary (mass `1-mu`) sits at
//! `(mu, 0)`, the light one (mass `mu`) at `(-1+mu, 0)`.  The Hamiltonian is
//!
//! ```text
//! H = ((px + y)^2 + (py - x)^2) / 2 - Omega(x, y)
//! Omega = (x^2 + y^2)/2 + (1 - mu)/r1 + mu/r2
//! ```
//!
//! Everything is generic over [`Scalar`] so the same formulas drive the
//! floating-point, interval, and parameter-jet evaluation paths.

use crate::error::{LibrateError, Result};
use crate::scalar::Scalar;
use ivl::{interval_newton, IMatrix, IVector, Interval, NewtonStatus};

pub const MU_DEFAULT: f64 = 0.0009537;

/// Distance below which a rigorous enclosure is rejected as too close to a
/// primary for the gravitational terms to stay well-conditioned.
pub const COLLISION_RADIUS: f64 = 1e-4;

pub const DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
}

impl ModelParams {
    pub fn new(mu: f64) -> Result<ModelParams> {
        if !(mu > 0.0 && mu < 0.5) {
            return Err(LibrateError::InvalidParameter(format!(
                "mass ratio mu must lie in (0, 1/2), got {mu}"
            )));
        }
        Ok(ModelParams { mu })
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { mu: MU_DEFAULT }
    }
}

/// Squared distances to the primaries: `r1^2 = (x-mu)^2 + y^2`,
/// `r2^2 = (x+1-mu)^2 + y^2`.
fn dist_sq<S: Scalar>(x: &S, y: &S, mu: f64) -> (S, S) {
    let dx1 = x.sub(&S::from_f64(mu));
    let dx2 = x.add(&S::from_f64(1.0 - mu));
    let y2 = y.mul(y);
    (dx1.mul(&dx1).add(&y2), dx2.mul(&dx2).add(&y2))
}

/// `u^(-3/2)` for `u > 0`.
fn inv_pow32<S: Scalar>(u: &S) -> S {
    S::one().div(&u.mul(&u.sqrt()))
}

pub fn hamiltonian<S: Scalar>(q: &[S; DIM], mu: f64) -> S {
    let [x, y, px, py] = q;
    let a = px.add(y);
    let b = py.sub(x);
    let kinetic = a.mul(&a).add(&b.mul(&b)).scale(0.5);
    let (r1sq, r2sq) = dist_sq(x, y, mu);
    let omega = x
        .mul(x)
        .add(&y.mul(y))
        .scale(0.5)
        .add(&S::from_f64(1.0 - mu).div(&r1sq.sqrt()))
        .add(&S::from_f64(mu).div(&r2sq.sqrt()));
    kinetic.sub(&omega)
}

/// Gradient of the effective potential, `(Omega_x, Omega_y)`.
fn omega_grad<S: Scalar>(x: &S, y: &S, mu: f64) -> (S, S) {
    let dx1 = x.sub(&S::from_f64(mu));
    let dx2 = x.add(&S::from_f64(1.0 - mu));
    let (r1sq, r2sq) = dist_sq(x, y, mu);
    let c1 = inv_pow32(&r1sq).scale(1.0 - mu);
    let c2 = inv_pow32(&r2sq).scale(mu);
    let ox = x.sub(&dx1.mul(&c1)).sub(&dx2.mul(&c2));
    let oy = y.sub(&y.mul(&c1)).sub(&y.mul(&c2));
    (ox, oy)
}

/// Second partials `(Omega_xx, Omega_xy, Omega_yy)`.
fn omega_hess<S: Scalar>(x: &S, y: &S, mu: f64) -> (S, S, S) {
    let dx1 = x.sub(&S::from_f64(mu));
    let dx2 = x.add(&S::from_f64(1.0 - mu));
    let (r1sq, r2sq) = dist_sq(x, y, mu);
    let ir1_3 = inv_pow32(&r1sq).scale(1.0 - mu);
    let ir2_3 = inv_pow32(&r2sq).scale(mu);
    let ir1_5 = ir1_3.div(&r1sq);
    let ir2_5 = ir2_3.div(&r2sq);
    let one = S::one();
    let oxx = one
        .sub(&ir1_3)
        .sub(&ir2_3)
        .add(&dx1.mul(&dx1).mul(&ir1_5).scale(3.0))
        .add(&dx2.mul(&dx2).mul(&ir2_5).scale(3.0));
    let oxy = dx1
        .mul(y)
        .mul(&ir1_5)
        .add(&dx2.mul(y).mul(&ir2_5))
        .scale(3.0);
    let y2 = y.mul(y);
    let oyy = one
        .sub(&ir1_3)
        .sub(&ir2_3)
        .add(&y2.mul(&ir1_5).scale(3.0))
        .add(&y2.mul(&ir2_5).scale(3.0));
    (oxx, oxy, oyy)
}

/// Hamiltonian vector field.
pub fn vector_field<S: Scalar>(q: &[S; DIM], mu: f64) -> [S; DIM] {
    let [x, y, px, py] = q;
    let (ox, oy) = omega_grad(x, y, mu);
    [
        px.add(y),
        py.sub(x),
        py.sub(x).add(&ox),
        px.add(y).neg().add(&oy),
    ]
}

/// Jacobian of the vector field; constant rows come from the symplectic
/// structure, the lower-left 2x2 block from the Hessian of `Omega`.
pub fn vector_field_jacobian<S: Scalar>(q: &[S; DIM], mu: f64) -> [[S; DIM]; DIM] {
    let [x, y, _, _] = q;
    let (oxx, oxy, oyy) = omega_hess(x, y, mu);
    let z = S::zero;
    let o = S::one;
    [
        [z(), o(), o(), z()],
        [o().neg(), z(), z(), o()],
        [oxx.sub(&o()), oxy.clone(), z(), o()],
        [oxy, oyy.sub(&o()), o().neg(), z()],
    ]
}

/// The reversing symmetry `S(x, y, px, py) = (x, -y, -px, py)`; conjugates
/// the flow to its time reversal.
pub fn symmetry<S: Scalar>(q: &[S; DIM]) -> [S; DIM] {
    [q[0].clone(), q[1].neg(), q[2].neg(), q[3].clone()]
}

/// Checks whether an interval state stays clear of both primaries; enclosure
/// arithmetic degenerates near a collision.
pub fn check_collision(q: &[Interval; DIM], mu: f64) -> Result<()> {
    let (r1sq, r2sq) = dist_sq(&q[0], &q[1], mu);
    let thr = COLLISION_RADIUS * COLLISION_RADIUS;
    if r1sq.lo() < thr || r2sq.lo() < thr {
        return Err(LibrateError::CollisionBox {
            r1: r1sq.lo().max(0.0).sqrt(),
            r2: r2sq.lo().max(0.0).sqrt(),
        });
    }
    Ok(())
}

/// `Omega_x(x, 0)` as a function of `x` alone, on a region of fixed signs
/// relative to the primaries; zero at the collinear libration points.
fn collinear_eq(x: Interval, mu: f64) -> Interval {
    let d1 = x - Interval::point(mu);
    let d2 = x + Interval::point(1.0 - mu);
    // (x - mu)/|x - mu|^3 = sign(d)/d^2
    let term = |d: Interval| {
        let s = if d.lo() > 0.0 {
            1.0
        } else {
            assert!(d.hi() < 0.0, "collinear equation evaluated across a primary");
            -1.0
        };
        d.sqr().recip().expect("sign-definite distance").scale(s)
    };
    x - term(d1).scale(1.0 - mu) - term(d2).scale(mu)
}

/// `d/dx Omega_x(x, 0) = 1 + 2(1-mu)/|x-mu|^3 + 2 mu/|x+1-mu|^3 > 0`.
fn collinear_eq_deriv(x: Interval, mu: f64) -> Interval {
    let d1 = (x - Interval::point(mu)).abs();
    let d2 = (x + Interval::point(1.0 - mu)).abs();
    Interval::ONE + d1.powi(-3).scale(2.0 * (1.0 - mu)) + d2.powi(-3).scale(2.0 * mu)
}

/// Interval-Newton enclosures of the collinear points `L1 < -1+mu < L2`,
/// plus `L3` on the far side of the heavy primary.
pub fn collinear_points(mu: f64) -> Result<[Interval; 3]> {
    // Hill-sphere scale around the light primary seeds L1/L2.
    let h = (mu / 3.0).powf(1.0 / 3.0);
    let seeds = [-1.0 + mu - h, -1.0 + mu + h, 1.0];
    let mut out = [Interval::EMPTY; 3];
    for (i, &seed) in seeds.iter().enumerate() {
        let mut x = seed;
        for _ in 0..60 {
            let f = collinear_eq(Interval::point(x), mu).mid();
            let df = collinear_eq_deriv(Interval::point(x), mu).mid();
            let step = f / df;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let x_box = Interval::point(x).inflate(1e-12);
        let f0 = IVector(vec![collinear_eq(Interval::point(x), mu)]);
        let df = IMatrix::from_rows(&[vec![collinear_eq_deriv(x_box, mu)]]);
        let nw = interval_newton(&f0, &df, &IVector(vec![x_box]), &[x]);
        if nw.status != NewtonStatus::UniqueZeroProven {
            return Err(LibrateError::VerificationFailed(format!(
                "collinear point near x = {x} not certified"
            )));
        }
        out[i] = nw.refined[0];
    }
    Ok(out)
}

/// Interval state on the symmetry section `y = 0, px = 0`.
pub fn section_state(x: Interval, py: Interval) -> [Interval; DIM] {
    [x, Interval::ZERO, Interval::ZERO, py]
}
