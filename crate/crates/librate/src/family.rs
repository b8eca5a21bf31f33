//! Existence of the symmetric Lyapunov-orbit family and its normal
//! hyperbolicity.
//!
//! A family box is a parallelogram on the symmetry section
//!
//! ```text
//! U = { (x, 0, 0, py_c + slope (x - x_c) + iota) : |x - x_c| <= rx, |iota| <= r1 }
//! ```
//!
//! Existence of a unique graph `py = kappa(x)` of symmetric orbits inside
//! the thinner tube `|iota| <= r0` follows from an interval Newton step on
//! `px` after the half turn, plus a slope condition keeping the graph inside
//! the tube:
//!
//! ```text
//! N  = py_c - pi_px P(x_c, 0, 0, py_c) / dP_23(U)      subset of  J0
//! sup |alpha - slope| < (r1 - r0) / rx,   alpha = -dP_21(U) / dP_23(U)
//! ```

use crate::error::{LibrateError, Result};
use crate::flow::{LohnerSet, RigorousFlow};
use crate::flow64::{identity4, Flow64};
use crate::model::{vector_field, DIM};
use ivl::{eig2_real, IMatrix, Interval};
use serde::{Deserialize, Serialize};

/// Parallelogram of candidate symmetric-orbit initial conditions.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FamilyBox {
    pub x_c: f64,
    pub py_c: f64,
    pub slope: f64,
    /// Half-width in `x`.
    pub rx: f64,
    /// Half-width of the uniqueness tube `J0`.
    pub r0: f64,
    /// Half-width of the existence parallelogram `J1`.
    pub r1: f64,
}

impl FamilyBox {
    /// The reference box of the proof.
    pub fn reference() -> FamilyBox {
        FamilyBox {
            x_c: -0.9510055339445208,
            py_c: -0.836804179646973,
            slope: -4.506866203376769,
            rx: 1e-9,
            r0: 1e-13,
            r1: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rx > 0.0 && self.r0 > 0.0 && self.r1 > self.r0) {
            return Err(LibrateError::Config(format!(
                "family box radii must satisfy 0 < r0 < r1, rx > 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// The parallelogram as a Lohner set (exactly, via the affine frame).
    pub fn lohner_set(&self) -> LohnerSet {
        let mut c = identity4();
        c[3][0] = self.slope;
        LohnerSet::affine(
            [self.x_c, 0.0, 0.0, self.py_c],
            c,
            [
                Interval::centered(0.0, self.rx),
                Interval::ZERO,
                Interval::ZERO,
                Interval::centered(0.0, self.r1),
            ],
        )
    }

    pub fn x_interval(&self) -> Interval {
        Interval::centered(self.x_c, self.rx)
    }

    /// The `py` tube of the verified graph at abscissa `x`.
    pub fn tube_at(&self, x: f64) -> Interval {
        Interval::point(self.py_c)
            + Interval::point(self.slope) * Interval::point(x - self.x_c)
            + Interval::centered(0.0, self.r0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyCertificate {
    pub bx: FamilyBox,
    /// Interval-Newton image in `py`; verification requires it inside `J0`.
    pub n_enclosure: Interval,
    /// Slope range `-dP_21 / dP_23` of the implicit graph.
    pub alpha: Interval,
    /// `pi_px P` of the center point after the half turn.
    pub px_image: Interval,
    pub dp21: Interval,
    pub dp23: Interval,
    /// Half-turn crossing time of the center point.
    pub half_time: Interval,
    /// Derivative of the orbit energy along the family, `dH/dx` on the box.
    pub dh_dx: Interval,
    pub verified: bool,
}

/// Gradient components of `H` on the section box: `(H_x, H_py)`; uses the
/// Hamiltonian structure `f = (H_px, H_py, -H_x, -H_y)`.
fn energy_gradient(hull: &[Interval; DIM], mu: f64) -> (Interval, Interval) {
    let f = vector_field(hull, mu);
    (-f[2], f[1])
}

/// Energy derivative along the family, `dH/dx` on the box: positive means
/// the energy level foliates the family graph transversally.
pub fn energy_foliation(cert: &FamilyCertificate) -> Interval {
    cert.dh_dx
}

/// Interval-Newton verification of one family box: a unique symmetric-orbit
/// graph `py = kappa(x)` over the box's `x` range, inside the `J0` tube,
/// with `kappa'` enclosed by `alpha`.
pub fn verify_family_box(bx: &FamilyBox, mu: f64) -> Result<FamilyCertificate> {
    bx.validate()?;
    let flow = RigorousFlow::new(mu);

    // tight point run for the Newton numerator
    let mut center = LohnerSet::point([bx.x_c, 0.0, 0.0, bx.py_c]);
    let hit_c = flow.poincare(&mut center, 1)?;
    let px_image = hit_c.q[2];
    let half_time = hit_c.t;

    // set run for the derivative enclosures
    let mut set = bx.lohner_set();
    let hull0 = set.hull();
    let hit_u = flow.poincare(&mut set, 1)?;
    let dp21 = hit_u.dp[2][0];
    let dp23 = hit_u.dp[2][3];
    let n_enclosure = Interval::point(bx.py_c) - px_image.checked_div(&dp23)?;
    let alpha = -(dp21.checked_div(&dp23)?);

    let newton_ok = n_enclosure.interior_subset(&Interval::centered(bx.py_c, bx.r0));
    let dev = (alpha - Interval::point(bx.slope)).mag();
    let slope_ok = dev < (bx.r1 - bx.r0) / bx.rx;

    let (h_x, h_py) = energy_gradient(&hull0, mu);
    let dh_dx = h_x + h_py * alpha;

    Ok(FamilyCertificate {
        bx: *bx,
        n_enclosure,
        alpha,
        px_image,
        dp21,
        dp23,
        half_time,
        dh_dx,
        verified: newton_ok && slope_ok,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HyperbolicityCertificate {
    pub bx: FamilyBox,
    /// Return map linearization on the energy level, a 2x2 interval matrix
    /// in `(px, py)` stored row-major.
    pub b: [[Interval; 2]; 2],
    pub lambda_unstable: Interval,
    pub lambda_stable: Interval,
    /// Product of the eigenvalues; symplecticity demands it contain 1.
    pub eigen_product: Interval,
    pub return_time: Interval,
    pub verified: bool,
}

/// Certifies `|lambda_u| > 1 > |lambda_s|` for the full-return map
/// restricted to the energy level over the family box.
pub fn verify_hyperbolicity(bx: &FamilyBox, mu: f64) -> Result<HyperbolicityCertificate> {
    bx.validate()?;
    let flow = RigorousFlow::new(mu);
    let mut set = bx.lohner_set();
    let hull0 = set.hull();
    let hit = flow.poincare(&mut set, 2)?;
    let dp3 = hit.dp3(); // section coordinates (x, px, py)

    // On the energy level, x is a function of (px, py):
    // dx/d(px,py) = -(H_x)^-1 (H_px, H_py); H_px = px + y = 0 exactly on U.
    let (h_x, h_py) = energy_gradient(&hull0, mu);
    let a1 = -(h_py.checked_div(&h_x)?);
    let mut b = [[Interval::ZERO; 2]; 2];
    for i in 0..2 {
        // rows px, py of dp3 are 1, 2; column x is 0
        b[i][1] = dp3[(i + 1, 0)] * a1 + dp3[(i + 1, 2)];
        b[i][0] = dp3[(i + 1, 1)];
    }
    let bm = IMatrix::from_rows(&[b[0].to_vec(), b[1].to_vec()]);
    let (l1, l2, real) = eig2_real(&bm);
    let (lu, ls_raw) = if l1.mag() >= l2.mag() { (l1, l2) } else { (l2, l1) };
    // The reduced map preserves the area form -(H_py/H_x) dpx^dpy, so
    // det B = a1(U) / a1(P(U)); this beats the interval quadratic formula
    // for the small eigenvalue, where tr and sqrt(disc) nearly cancel.
    let (h_x_end, h_py_end) = energy_gradient(&hit.q, mu);
    let a1_end = -(h_py_end.checked_div(&h_x_end)?);
    let det_b = a1.checked_div(&a1_end)?;
    let ls = ls_raw.meet(&det_b.checked_div(&lu)?);
    let product = (lu * ls).meet(&det_b);
    let verified = real && lu.mig() > 1.0 && ls.mag() < 1.0 && product.contains(1.0);
    Ok(HyperbolicityCertificate {
        bx: *bx,
        b,
        lambda_unstable: lu,
        lambda_stable: ls,
        eigen_product: product,
        return_time: hit.t,
        verified,
    })
}

/// Floating-point seeds for a chain of family boxes walking `x` upward from
/// `x_lo` with centers spaced `1.98 rx` apart, so adjacent boxes overlap.
pub fn seed_chain(
    x_lo: f64,
    n: usize,
    rx: f64,
    seed: (f64, f64),
    mu: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let fl = Flow64::new(mu);
    let mut out = Vec::with_capacity(n);
    let (mut x_prev, mut py_prev) = seed;
    let mut slope_prev = fl.family_slope(x_prev, py_prev, 1);
    // walk the seed to the start of the chain in coarse strides
    let stride = 1e-4f64.max(4.0 * rx);
    while (x_prev - x_lo).abs() > stride {
        let dir = (x_lo - x_prev).signum();
        let x_next = x_prev + dir * stride;
        let guess = py_prev + slope_prev * (x_next - x_prev);
        py_prev = fl
            .solve_symmetric_py(x_next, guess, 1)
            .ok_or_else(|| LibrateError::VerificationFailed("seed walk diverged".into()))?;
        x_prev = x_next;
        slope_prev = fl.family_slope(x_prev, py_prev, 1);
    }
    for i in 0..n {
        let x_c = x_lo + (1.0 + 1.98 * i as f64) * rx;
        let guess = py_prev + slope_prev * (x_c - x_prev);
        let py_c = fl
            .solve_symmetric_py(x_c, guess, 1)
            .ok_or_else(|| LibrateError::VerificationFailed(format!("seed at x = {x_c} diverged")))?;
        let slope = fl.family_slope(x_c, py_c, 1);
        out.push((x_c, py_c, slope));
        x_prev = x_c;
        py_prev = py_c;
        slope_prev = slope;
    }
    Ok(out)
}

/// Verifies a chain of overlapping family boxes in parallel (deterministic:
/// results are collected in index order).
pub fn verify_chain(
    seeds: &[(f64, f64, f64)],
    rx: f64,
    r0: f64,
    r1: f64,
    mu: f64,
) -> Result<Vec<FamilyCertificate>> {
    use rayon::prelude::*;
    let boxes: Vec<FamilyBox> = seeds
        .iter()
        .map(|&(x_c, py_c, slope)| FamilyBox {
            x_c,
            py_c,
            slope,
            rx,
            r0,
            r1,
        })
        .collect();
    boxes
        .par_iter()
        .map(|bx| verify_family_box(bx, mu))
        .collect()
}

/// Adjacent verified graphs must agree where their boxes overlap: the `J0`
/// tubes intersect on the shared `x` range.
pub fn chain_connected(certs: &[FamilyCertificate]) -> bool {
    certs.windows(2).all(|w| {
        let (a, b) = (&w[0].bx, &w[1].bx);
        let xa = a.x_interval();
        let xb = b.x_interval();
        let shared = xa.meet(&xb);
        if shared.is_empty() {
            return false;
        }
        let x_mid = shared.mid();
        !a.tube_at(x_mid).meet(&b.tube_at(x_mid)).is_empty()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MU_DEFAULT;

    #[test]
    fn reference_box_verifies() {
        let cert = verify_family_box(&FamilyBox::reference(), MU_DEFAULT).unwrap();
        assert!(cert.verified, "cert: {cert:#?}");
        // [PAPER] slope range of the graph
        let kappa_ref = Interval::new(-4.506980818, -4.506751634);
        assert!(!cert.alpha.meet(&kappa_ref).is_empty(), "alpha = {}", cert.alpha);
        // [PAPER] energy slope along the family
        let dh_ref = Interval::new(-0.3670937615, -0.3670674516);
        assert!(!cert.dh_dx.meet(&dh_ref).is_empty(), "dh_dx = {}", cert.dh_dx);
    }

    #[test]
    fn widened_tube_fails_slope_condition() {
        // shrinking the gap between r0 and r1 must break verification
        let mut bx = FamilyBox::reference();
        bx.r0 = bx.r1 * 0.999999;
        let cert = verify_family_box(&bx, MU_DEFAULT).unwrap();
        assert!(!cert.verified);
    }

    #[test]
    fn wrong_slope_fails() {
        let mut bx = FamilyBox::reference();
        bx.slope = 0.0;
        let cert = verify_family_box(&bx, MU_DEFAULT).unwrap();
        assert!(!cert.verified);
    }

    #[test]
    fn hyperbolicity_of_reference_box() {
        let cert = verify_hyperbolicity(&FamilyBox::reference(), MU_DEFAULT).unwrap();
        assert!(cert.verified, "cert: {cert:#?}");
        // [PAPER] eigenvalue enclosures
        let lu_ref = Interval::new(1450.24, 1481.68);
        let ls_ref = Interval::new(6.74909e-4, 6.89541e-4);
        assert!(
            !cert.lambda_unstable.meet(&lu_ref).is_empty(),
            "lambda_u = {}",
            cert.lambda_unstable
        );
        assert!(
            !cert.lambda_stable.meet(&ls_ref).is_empty(),
            "lambda_s = {}",
            cert.lambda_stable
        );
        assert!(cert.eigen_product.contains(1.0));
    }

    #[test]
    fn short_chain_verifies_and_connects() {
        let bx = FamilyBox::reference();
        let seeds = seed_chain(
            bx.x_c - 1e-5,
            4,
            1.1007716e-6,
            (bx.x_c, bx.py_c),
            MU_DEFAULT,
        )
        .unwrap();
        let certs = verify_chain(&seeds, 1.1007716e-6, 2.5e-8, 5e-8, MU_DEFAULT).unwrap();
        assert!(certs.iter().all(|c| c.verified), "{certs:#?}");
        assert!(chain_connected(&certs));
    }
}
