//! Transversal intersection of the unstable and stable manifolds on the
//! section `Sigma = {y = 0, x > 0, px^2 < 2(H + Omega)}`.
//!
//! The probe set is `B_E = [x_l, x_r] x B_c` in chart coordinates, with
//! `B_c` the cone cross-section of the certified fiber bound at `x_r`.  The
//! map `G(v) = Phi_tau(C psi(v) + q0)` (first hit of `Sigma`) is enclosed by
//! the rigorous integrator; the crossing follows from opposite `px` signs on
//! the edge slices, transversality from a sign-definite slope of the section
//! trace, bounded through the fan images `[DG(B_E)] V+-`.  The stable
//! manifold is the `S`-symmetric mirror, so its trace has slope `-a` and the
//! intersection angle follows from `a` alone.

use crate::chart::{ambient_set, Chart, FiberCertificate};
use crate::error::{LibrateError, Result};
use crate::family::{FamilyCertificate, HyperbolicityCertificate};
use crate::flow::{imat_vec, IMat4, IVec4, RigorousFlow};
use crate::flow64::Flow64;
use crate::model::{hamiltonian, symmetry, DIM};
use ivl::Interval;
use serde::{Deserialize, Serialize};

/// Probe geometry: the `x`-window of the fiber that brackets the rightmost
/// homoclinic point, and how finely `B_c` is subdivided for the slope bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionProbe {
    pub x_m: f64,
    pub half_width: f64,
    pub n_parts: usize,
    /// Extra subdivision of the two narrow `B_c` coordinates: past a few
    /// hundred `n_parts` the slope width is limited by their scale, not the
    /// family direction's.
    #[serde(default = "default_refine")]
    pub refine: usize,
}

fn default_refine() -> usize {
    1
}

/// `i`-th of `n` equal slices of an interval; the outer endpoints are exact.
fn slice(iv: &Interval, n: usize, i: usize) -> Interval {
    let step = (iv.hi() - iv.lo()) / n as f64;
    let a = if i == 0 { iv.lo() } else { iv.lo() + i as f64 * step };
    let b = if i + 1 == n { iv.hi() } else { iv.lo() + (i + 1) as f64 * step };
    Interval::new(a, b)
}

impl SectionProbe {
    /// The published probe; `n_parts` is 600 in the full run.
    pub fn reference(n_parts: usize) -> SectionProbe {
        SectionProbe {
            x_m: 4.461867506615821e-6,
            half_width: 1e-11,
            n_parts,
            refine: 1,
        }
    }

    /// Number of boxes the slope bound iterates over.
    pub fn total_parts(&self) -> usize {
        self.n_parts * self.refine * self.refine
    }

    pub fn x_l(&self) -> f64 {
        self.x_m - self.half_width
    }

    pub fn x_r(&self) -> f64 {
        self.x_m + self.half_width
    }

    /// The probe must be non-degenerate and sit strictly beyond the
    /// fixed-point enclosure.
    pub fn validate(&self, b0: &IVec4) -> Result<()> {
        if !(self.half_width > 0.0) || self.n_parts == 0 || self.refine == 0 {
            return Err(LibrateError::Config(format!(
                "degenerate probe: half-width {}, {} parts, refine {}",
                self.half_width, self.n_parts, self.refine
            )));
        }
        if !(b0[0].hi() < self.x_l()) {
            return Err(LibrateError::Config(format!(
                "probe window [{:e}, {:e}] overlaps the fixed-point enclosure {}",
                self.x_l(),
                self.x_r(),
                b0[0]
            )));
        }
        Ok(())
    }

    /// Cone cross-section `B_c` containing `pi_y B` up to `x_r`.
    pub fn b_c(&self, b0: &IVec4, alpha: f64) -> [Interval; 3] {
        let d = self.x_r().abs() + b0[0].mag();
        let ry = (Interval::point(alpha).sqrt() * Interval::point(d)).hi();
        std::array::from_fn(|j| b0[j + 1] + Interval::centered(0.0, ry))
    }

    /// The `i`-th part of `B_E`: `n_parts` slices along the widest `B_c`
    /// coordinate (the family direction), `refine` along each of the other
    /// two; the `x`-window itself is only `2 half_width` wide, so splitting
    /// it would gain nothing.
    pub fn part(&self, b0: &IVec4, alpha: f64, i: usize) -> IVec4 {
        assert!(i < self.total_parts());
        let bc = self.b_c(b0, alpha);
        let i3 = i / (self.refine * self.refine);
        let rem = i % (self.refine * self.refine);
        [
            Interval::new(self.x_l(), self.x_r()),
            slice(&bc[0], self.refine, rem / self.refine),
            slice(&bc[1], self.refine, rem % self.refine),
            slice(&bc[2], self.n_parts, i3),
        ]
    }

    /// Edge slice `{x} x B_c`.
    pub fn edge(&self, b0: &IVec4, alpha: f64, right: bool) -> IVec4 {
        let bc = self.b_c(b0, alpha);
        let x = if right { self.x_r() } else { self.x_l() };
        [Interval::point(x), bc[0], bc[1], bc[2]]
    }
}

/// Enclosure of a first hit of `Sigma` together with the composed
/// differential `[DG] = DP . C Dpsi`.
#[derive(Clone, Debug)]
pub struct GImage {
    pub t: Interval,
    pub q: IVec4,
    pub dg: IMat4,
}

/// Flows the chart box `u` to the first crossing of
/// `{y = 0, x > 0, px^2 < 2(H + Omega)}` and certifies membership.
pub fn hit_section_g(chart: &Chart, u: &IVec4, mu: f64) -> Result<GImage> {
    let mut set = ambient_set(chart, u)?;
    // crossing index of the first y = 0 hit with x > 0, from the midpoint
    let fl64 = Flow64::new(mu);
    let mut index = None;
    for n in 1..=24 {
        let (_, qs, _) = fl64.to_section(set.m, n);
        if qs[0] > 0.0 {
            index = Some(n);
            break;
        }
    }
    let Some(n) = index else {
        return Err(LibrateError::SectionFailure(
            "no section crossing with x > 0 within 24 returns".into(),
        ));
    };
    let rf = RigorousFlow::new(mu);
    let hit = rf.poincare(&mut set, n)?;
    // the seeded variational already carries C Dpsi(u), so dp is DG directly
    let dg = hit.dp;
    // Mean-value refinement of the image: the direct box flight loses the
    // parallelepiped over ~4 periods of unstable expansion, so intersect it
    // with G(mid) + DG(u) (u - mid), using the narrow point flight for G(mid).
    let mid: IVec4 = std::array::from_fn(|i| Interval::point(u[i].mid()));
    let mut mid_set = ambient_set(chart, &mid)?;
    let mid_hit = rf.poincare(&mut mid_set, n)?;
    let mut q = hit.q;
    for i in 0..DIM {
        let mut mv = mid_hit.q[i];
        for j in 0..DIM {
            mv = mv + dg[i][j] * (u[j] - mid[j]);
        }
        let met = q[i].meet(&mv);
        if !met.is_empty() {
            q[i] = met;
        }
    }
    if !(q[0].lo() > 0.0) {
        return Err(LibrateError::SectionFailure(format!(
            "crossing box not in the x > 0 half-plane: x = {}",
            q[0]
        )));
    }
    // On {y = 0} and on the energy level of the orbit family the section
    // inequality px^2 < 2(H + Omega) reduces to px^2 < px^2 + (py - x)^2,
    // i.e. a nonzero ydot; checked as the literal strict inequality.
    let ydot = q[3] - q[0];
    let lhs = q[2].sqr();
    let rhs = q[2].sqr() + ydot.sqr();
    if !(lhs.hi() < rhs.lo()) {
        return Err(LibrateError::SectionFailure(format!(
            "section membership undecided: px^2 = {lhs} vs 2(H + Omega) = {rhs}"
        )));
    }
    let tm = hit.t.meet(&mid_hit.t);
    let t = if tm.is_empty() { hit.t } else { tm };
    Ok(GImage { t, q, dg })
}

/// Exit-set sign conditions: the edge slices of the probe map to opposite
/// sides of `{px = 0}`.
pub fn check_crossing(
    chart: &Chart,
    probe: &SectionProbe,
    b0: &IVec4,
    alpha: f64,
    mu: f64,
) -> Result<(GImage, GImage, bool)> {
    probe.validate(b0)?;
    let left = hit_section_g(chart, &probe.edge(b0, alpha, false), mu)?;
    let right = hit_section_g(chart, &probe.edge(b0, alpha, true), mu)?;
    let pass = left.q[2].hi() < 0.0 && right.q[2].lo() > 0.0;
    Ok((left, right, pass))
}

/// Fan image of `[DG]` applied to `V+`: the `(x, px)` components of
/// `[DG] (1, y)` over `y` in the cone opening.
fn fan_image(dg: &IMat4, alpha: f64) -> (Interval, Interval) {
    let s = Interval::point(alpha).sqrt().hi();
    let v: IVec4 = [
        Interval::ONE,
        Interval::centered(0.0, s),
        Interval::centered(0.0, s),
        Interval::centered(0.0, s),
    ];
    let img = imat_vec(dg, &v);
    (img[0], img[2])
}

/// Slope enclosure of the unstable trace on the section: the hull over the
/// subdivision of `pi_px [DG] V+ / pi_x [DG] V+`; the `V-` branch is the
/// exact negation, so its quotient coincides and its sign conditions follow.
/// Fails unless both fan components are sign-definite on every part.
pub fn slope_parts(
    chart: &Chart,
    probe: &SectionProbe,
    b0: &IVec4,
    alpha: f64,
    mu: f64,
) -> Result<Vec<Interval>> {
    use rayon::prelude::*;
    probe.validate(b0)?;
    (0..probe.total_parts())
        .into_par_iter()
        .map(|i| {
            let part = probe.part(b0, alpha, i);
            let img = hit_section_g(chart, &part, mu)?;
            let (ux, upx) = fan_image(&img.dg, alpha);
            if !(ux.lo() > 0.0 && upx.lo() > 0.0) {
                return Err(LibrateError::VerificationFailed(format!(
                    "fan image of part {i} not sign-definite: pi_x = {ux}, pi_px = {upx}"
                )));
            }
            Ok(upx.checked_div(&ux)?)
        })
        .collect()
}

/// Hull of the per-part slope enclosures.
pub fn slope_bound(
    chart: &Chart,
    probe: &SectionProbe,
    b0: &IVec4,
    alpha: f64,
    mu: f64,
) -> Result<Interval> {
    let slopes = slope_parts(chart, probe, b0, alpha, mu)?;
    let mut a = slopes[0];
    for s in &slopes[1..] {
        a = a.hull(s);
    }
    Ok(a)
}

/// Acute angle (degrees) between the lines of slope `a` and `-a`: each makes
/// the angle `atan(a)` with the `x` axis, so the angle between them is
/// `2 atan(a)` or its supplement, whichever is acute; `a = 1` gives 90.
pub fn intersection_angle_deg(a: Interval) -> Result<Interval> {
    if !(a.lo() > 0.0) {
        return Err(LibrateError::VerificationFailed(format!(
            "slope enclosure not positive: {a}"
        )));
    }
    let pi = Interval::point(std::f64::consts::PI).widen_ulp();
    let deg = Interval::point(180.0).checked_div(&pi)?;
    let two_phi = a.atan().scale(2.0) * deg;
    let supplement = Interval::point(180.0) - two_phi;
    if two_phi.hi() <= 90.0 {
        Ok(two_phi)
    } else if two_phi.lo() >= 90.0 {
        Ok(supplement)
    } else {
        Ok(Interval::new(two_phi.lo().min(supplement.lo()), 90.0))
    }
}

/// Certified transversal homoclinic intersection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntersectionCertificate {
    pub probe: SectionProbe,
    pub alpha: f64,
    pub left_image: IVec4,
    pub right_image: IVec4,
    pub slope_a: Interval,
    /// Per-part slope enclosures (index order of `SectionProbe::part`).
    pub slopes: Vec<Interval>,
    pub angle_deg: Interval,
    pub verified: bool,
}

/// Full pipeline: prerequisites verified, exit-set signs, positive slope,
/// angle; also corroborates energy conservation through `G` and the
/// `S`-symmetry between the two manifold traces.
pub fn certify_transversal(
    chart: &Chart,
    probe: &SectionProbe,
    fiber: &FiberCertificate,
    family: &FamilyCertificate,
    hyper: &HyperbolicityCertificate,
    mu: f64,
) -> Result<IntersectionCertificate> {
    if !family.verified || !hyper.verified || !fiber.verified {
        return Err(LibrateError::VerificationFailed(
            "transversality requires verified family, hyperbolicity and fiber certificates".into(),
        ));
    }
    if fiber.local_box.x_hi < probe.x_r() {
        return Err(LibrateError::VerificationFailed(format!(
            "fiber bound reaches x = {:e} but the probe needs {:e}",
            fiber.local_box.x_hi,
            probe.x_r()
        )));
    }
    let b0 = &fiber.local_box.b0;
    let alpha = fiber.alpha;
    let (left, right, crossing) = check_crossing(chart, probe, b0, alpha, mu)?;

    // energy is conserved through G: each image carries the energy of its
    // edge slice
    for (img, edge_right) in [(&left, false), (&right, true)] {
        let edge_amb = chart.to_ambient(&probe.edge(b0, alpha, edge_right));
        let h0 = hamiltonian(&edge_amb, mu);
        let h1 = hamiltonian(&img.q, mu);
        if h0.meet(&h1).is_empty() {
            return Err(LibrateError::VerificationFailed(format!(
                "energy drifted through the section map: {h0} vs {h1}"
            )));
        }
    }
    // S-symmetry: the stable trace is the mirror of the unstable one, so
    // the mirrored crossing hull must meet the original
    let hull: IVec4 = std::array::from_fn(|i| left.q[i].hull(&right.q[i]));
    let mirrored = symmetry(&hull);
    if (0..DIM).any(|i| hull[i].meet(&mirrored[i]).is_empty()) {
        return Err(LibrateError::VerificationFailed(
            "mirrored crossing enclosure does not meet the original".into(),
        ));
    }

    let slopes = slope_parts(chart, probe, b0, alpha, mu)?;
    let mut slope_a = slopes[0];
    for s in &slopes[1..] {
        slope_a = slope_a.hull(s);
    }
    let angle_deg = intersection_angle_deg(slope_a)?;
    let verified = crossing && slope_a.lo() > 0.0;
    Ok(IntersectionCertificate {
        probe: probe.clone(),
        alpha,
        left_image: left.q,
        right_image: right.q,
        slope_a,
        slopes,
        angle_deg,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::enclose_b0;
    use crate::family::FamilyBox;
    use crate::model::MU_DEFAULT;

    fn setup() -> (Chart, IVec4) {
        let ch = Chart::reference();
        let b0 = enclose_b0(&ch, &FamilyBox::reference()).unwrap();
        (ch, b0)
    }

    const ALPHA: f64 = 2.56e-6;

    #[test]
    fn probe_validation() {
        let (_, b0) = setup();
        // [TRIVIAL] degenerate window rejected
        let mut p = SectionProbe::reference(10);
        p.half_width = 0.0;
        assert!(p.validate(&b0).is_err());
        // [TRIVIAL] probe inside the fixed-point enclosure rejected
        let mut p = SectionProbe::reference(10);
        p.x_m = 0.0;
        assert!(p.validate(&b0).is_err());
        assert!(SectionProbe::reference(10).validate(&b0).is_ok());
    }

    #[test]
    fn parts_cover_b_e() {
        let (_, b0) = setup();
        let p = SectionProbe::reference(7);
        let bc = p.b_c(&b0, ALPHA);
        let mut covered = p.part(&b0, ALPHA, 0)[3];
        for i in 1..7 {
            let part = p.part(&b0, ALPHA, i);
            assert_eq!(part[0], Interval::new(p.x_l(), p.x_r()));
            assert_eq!(part[1], bc[0]);
            covered = covered.hull(&part[3]);
        }
        assert!(bc[2].subset(&covered));
    }

    #[test]
    fn refined_parts_cover_b_e() {
        // [TRIVIAL] the refine x refine x n_parts grid covers B_c exactly
        let (_, b0) = setup();
        let mut p = SectionProbe::reference(3);
        p.refine = 2;
        let bc = p.b_c(&b0, ALPHA);
        let mut covered: [Interval; 3] = std::array::from_fn(|_| Interval::ZERO);
        let mut first = true;
        for i in 0..p.total_parts() {
            let part = p.part(&b0, ALPHA, i);
            for j in 0..3 {
                covered[j] = if first { part[j + 1] } else { covered[j].hull(&part[j + 1]) };
            }
            first = false;
        }
        for j in 0..3 {
            assert!(bc[j].subset(&covered[j]), "coordinate {j}");
        }
    }

    #[test]
    fn midpoint_hit_matches_f64_oracle() {
        // [DERIVED] the chart midpoint reaches Sigma on the fifth y = 0
        // crossing, around t = 12.1, with px near zero
        let (ch, _) = setup();
        let p = SectionProbe::reference(1);
        let u: IVec4 = [
            Interval::point(p.x_m),
            Interval::ZERO,
            Interval::ZERO,
            Interval::ZERO,
        ];
        let img = hit_section_g(&ch, &u, MU_DEFAULT).unwrap();
        assert!(img.q[0].lo() > 0.6 && img.q[0].hi() < 0.7, "x = {}", img.q[0]);
        assert!(img.t.lo() > 12.0 && img.t.hi() < 12.3, "t = {}", img.t);
        assert!(img.q[2].mag() < 1e-4, "px = {}", img.q[2]);
        let fl = Flow64::new(MU_DEFAULT);
        let amb = ch.to_ambient(&u);
        let (t, q, _) = fl.to_section(amb.map(|c| c.mid()), 5);
        assert!(img.t.inflate(1e-9).contains(t));
        for i in 0..4 {
            assert!(img.q[i].inflate(1e-9).contains(q[i]), "component {i}");
        }
    }

    #[test]
    fn edge_images_straddle_px_zero() {
        // [PAPER] pi_px G(B_E^l) < 0 < pi_px G(B_E^r)
        let (ch, b0) = setup();
        let p = SectionProbe::reference(1);
        let (left, right, pass) = check_crossing(&ch, &p, &b0, ALPHA, MU_DEFAULT).unwrap();
        assert!(pass, "left px = {}, right px = {}", left.q[2], right.q[2]);
    }

    #[test]
    fn displaced_probe_fails_crossing() {
        // [DERIVED] shifting the window by 1e-7 puts both edges on one side
        let (ch, b0) = setup();
        let mut p = SectionProbe::reference(1);
        p.x_m += 1e-7;
        match check_crossing(&ch, &p, &b0, ALPHA, MU_DEFAULT) {
            Ok((_, _, pass)) => assert!(!pass),
            Err(_) => {}
        }
    }

    #[test]
    fn coarse_slope_overlaps_reference() {
        // [PAPER] a = [1.7695, 1.7725] from the 600-part run; a coarse
        // subdivision must still enclose it with a positive sign
        let (ch, b0) = setup();
        let p = SectionProbe::reference(4);
        let a = slope_bound(&ch, &p, &b0, ALPHA, MU_DEFAULT).unwrap();
        assert!(a.lo() > 0.0, "a = {a}");
        let a_ref = Interval::new(1.7695, 1.7725);
        assert!(!a.meet(&a_ref).is_empty(), "a = {a}");
    }

    #[test]
    fn angle_formula() {
        // [TRIVIAL] symmetric slopes +-1 meet at a right angle
        let ninety = intersection_angle_deg(Interval::point(1.0)).unwrap();
        assert!(ninety.contains(90.0) && ninety.width() < 1e-10, "{ninety}");
        // [DERIVED] interval evaluation on the published slope, cross-checked
        // against the published angle
        let a = Interval::new(1.7695, 1.7725);
        let ang = intersection_angle_deg(a).unwrap();
        let ang_ref = Interval::new(58.8637, 58.9439);
        assert!(ang.subset(&ang_ref.inflate(0.05)), "angle = {ang}");
        assert!(!ang.meet(&ang_ref).is_empty());
        // [TRIVIAL] non-positive slope rejected
        assert!(intersection_angle_deg(Interval::new(-1.0, 2.0)).is_err());
    }

    #[test]
    fn trivial_fan_slope_is_cone_opening() {
        // [TRIVIAL] DG = identity: the fan quotient is [-sqrt(a), sqrt(a)]
        let dg = crate::flow::imat_identity();
        let (ux, upx) = fan_image(&dg, ALPHA);
        assert_eq!(ux, Interval::ONE);
        let s = ALPHA.sqrt();
        assert!(upx.subset(&Interval::centered(0.0, s * (1.0 + 1e-12))));
    }
}
