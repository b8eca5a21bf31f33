//! Cone conditions for unstable-fiber bounds at a saddle-center fixed point.
//!
//! The quadratic form is `Q(x, y) = alpha x^2 - ||y||^2` with one unstable
//! coordinate `x` and `dim_c` central ones.  Two checks on an interval
//! matrix enclosure `A` (of `[DF(B)]`) imply, for every member map, that the
//! unstable set is a graph over the `x` axis with Lipschitz constant
//! `sqrt(alpha)`:
//!
//! - cone increase (cc1): with `D = A^T C_Q A`, `d_11 - 2 eps > M alpha`,
//!   where `eps` bounds the Euclidean norm of `D`'s first-row tail and `-M`
//!   lower-bounds the spectrum of the central block of `D`;
//! - expansion (cc2): `(a_11_lower - eps sqrt(alpha)) / sqrt(1 + alpha) > m`
//!   with `eps` from `A`'s first-row tail, giving `||A v|| > m ||v||` on the
//!   cone.

use crate::error::{LibrateError, Result};
use ivl::{gershgorin_min_eig, IMatrix, Interval};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConeForm {
    /// Cone opening; the unstable cone is `{ alpha x^2 >= ||y||^2 }`.
    pub alpha: f64,
    /// Number of central coordinates (3 for the flow's local section model).
    pub dim_c: usize,
}

impl ConeForm {
    pub fn new(alpha: f64, dim_c: usize) -> Result<ConeForm> {
        if !(alpha > 0.0) {
            return Err(LibrateError::Config(format!(
                "cone opening must be positive, got {alpha}"
            )));
        }
        Ok(ConeForm { alpha, dim_c })
    }

    pub fn dim(&self) -> usize {
        1 + self.dim_c
    }

    /// `C_Q = diag(alpha, -1, ..., -1)`.
    pub fn c_q(&self) -> IMatrix {
        let n = self.dim();
        let mut m = IMatrix::zeros(n, n);
        m[(0, 0)] = Interval::point(self.alpha);
        for i in 1..n {
            m[(i, i)] = -Interval::ONE;
        }
        m
    }

    /// `Q(v) = alpha x^2 - ||y||^2` (plain f64, used by corroboration tests).
    pub fn q(&self, v: &[f64]) -> f64 {
        self.alpha * v[0] * v[0] - v[1..].iter().map(|y| y * y).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub pass: bool,
    /// Certified lower bound on the strict inequality's slack.
    pub margin: f64,
}

fn check_shape(a: &IMatrix, cone: &ConeForm) -> Result<()> {
    let n = cone.dim();
    if a.rows() != n || a.cols() != n {
        return Err(LibrateError::BadBlockStructure(format!(
            "expected {n}x{n} matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

/// Upper bound on the Euclidean norm of the first-row tail of `a`.
fn first_row_tail_norm(a: &IMatrix) -> Interval {
    let mut s = Interval::ZERO;
    for j in 1..a.cols() {
        s = s + Interval::point(a[(0, j)].mag()).sqr();
    }
    s.sqrt()
}

/// Expansion condition (cc2): `(a_11_lower - eps sqrt(alpha)) / sqrt(1 + alpha) > m`.
pub fn check_expansion(a: &IMatrix, cone: &ConeForm, m: f64) -> Result<CheckOutcome> {
    check_shape(a, cone)?;
    let a11 = a[(0, 0)];
    if !(a11.lo() > 0.0) {
        return Ok(CheckOutcome {
            pass: false,
            margin: f64::NEG_INFINITY,
        });
    }
    let alpha = Interval::point(cone.alpha);
    let eps = first_row_tail_norm(a);
    let lhs = (Interval::point(a11.lo()) - eps * alpha.sqrt())
        .checked_div(&(Interval::ONE + alpha).sqrt())?;
    let margin = lhs.lo() - m;
    Ok(CheckOutcome {
        pass: margin > 0.0,
        margin,
    })
}

/// Cone-increase condition (cc1) on `D = A^T C_Q A`:
/// `d_11 - 2 eps > M alpha` with `-M` a lower bound for the central block.
pub fn check_q_increase(a: &IMatrix, cone: &ConeForm) -> Result<CheckOutcome> {
    check_shape(a, cone)?;
    let d = a.transpose().matmul(&cone.c_q()).matmul(a);
    let d11 = d[(0, 0)];
    let eps = first_row_tail_norm(&d);
    let n = cone.dim();
    let block = d.submatrix(
        &(1..n).collect::<Vec<_>>(),
        &(1..n).collect::<Vec<_>>(),
    );
    let m_bound = (-gershgorin_min_eig(&block)).max(0.0);
    let lhs = Interval::point(d11.lo()) - eps.scale(2.0);
    let rhs = Interval::point(m_bound) * Interval::point(cone.alpha);
    let margin = lhs.lo() - rhs.hi();
    Ok(CheckOutcome {
        pass: margin > 0.0,
        margin,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub cone: ConeForm,
    /// Expansion constant; must exceed 1.
    pub m: f64,
    pub cc1: CheckOutcome,
    pub cc2: CheckOutcome,
    /// Lipschitz bound of the certified unstable graph.
    pub lipschitz: f64,
    pub verified: bool,
}

/// Certifies that every map with derivative in `df` has its unstable set a
/// graph over the `x` axis inside the cone union, Lipschitz `sqrt(alpha)`.
pub fn certify_unstable_disc(df: &IMatrix, cone: &ConeForm, m: f64) -> Result<ConeCertificate> {
    if !(m > 1.0) {
        return Err(LibrateError::Config(format!(
            "expansion constant must exceed 1, got {m}"
        )));
    }
    let cc1 = check_q_increase(df, cone)?;
    let cc2 = check_expansion(df, cone, m)?;
    Ok(ConeCertificate {
        cone: *cone,
        m,
        cc1,
        cc2,
        lipschitz: cone.alpha.sqrt(),
        verified: cc1.pass && cc2.pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(entries: &[f64]) -> IMatrix {
        let n = entries.len();
        let mut m = IMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Interval::point(entries[i]);
        }
        m
    }

    #[test]
    fn pure_expansion_passes_for_small_m() {
        let cone = ConeForm::new(1e-12, 3).unwrap();
        let a = diag(&[2.0, 0.1, 0.1, 0.1]);
        assert!(check_expansion(&a, &cone, 1.9).unwrap().pass);
        assert!(!check_expansion(&a, &cone, 2.0).unwrap().pass);
    }

    #[test]
    fn contraction_cannot_expand() {
        let cone = ConeForm::new(1e-6, 3).unwrap();
        let mut a = diag(&[0.0, 0.1, 0.1, 0.1]);
        a[(0, 0)] = Interval::new(0.5, 0.6);
        assert!(!check_expansion(&a, &cone, 1.0).unwrap().pass);
    }

    #[test]
    fn reference_df_matrix_passes_with_huge_margin() {
        // [PAPER] (1,1) entry [1465.6, 1466.5], first-row tail radii <= 0.369,
        // alpha = 2.56e-6
        let cone = ConeForm::new(2.56e-6, 3).unwrap();
        let mut a = IMatrix::zeros(4, 4);
        a[(0, 0)] = Interval::new(1465.6, 1466.5);
        for j in 1..4 {
            a[(0, j)] = Interval::centered(0.0, 0.369);
            a[(j, j)] = Interval::centered(0.0, 1.0);
        }
        let out = check_expansion(&a, &cone, 1000.0).unwrap();
        assert!(out.pass && out.margin > 400.0, "{out:?}");
    }

    #[test]
    fn q_increase_toy_diagonal() {
        // D = diag(4 alpha, -0.25, ...): d11 = 4, eps = 0, M = 0.25
        let cone = ConeForm::new(1.0, 3).unwrap();
        let a = diag(&[2.0, 0.5, 0.5, 0.5]);
        let out = check_q_increase(&a, &cone).unwrap();
        assert!(out.pass, "{out:?}");
        assert!((out.margin - 3.75).abs() < 1e-12);
    }

    #[test]
    fn identity_fails_strict_q_increase() {
        let cone = ConeForm::new(1.0, 3).unwrap();
        let a = diag(&[1.0, 1.0, 1.0, 1.0]);
        let out = check_q_increase(&a, &cone).unwrap();
        assert!(!out.pass);
        assert!(out.margin <= 0.0);
    }

    #[test]
    fn toy_saddle_certifies() {
        // the expansion bound is conservative: with alpha = 1 it certifies
        // m up to a_11 / sqrt(2), so 1.3 passes and 1.5 does not
        let cone = ConeForm::new(1.0, 1).unwrap();
        let a = diag(&[2.0, 0.5]);
        let cert = certify_unstable_disc(&a, &cone, 1.3).unwrap();
        assert!(cert.verified, "{cert:?}");
        assert_eq!(cert.lipschitz, 1.0);
        assert!(!certify_unstable_disc(&a, &cone, 1.5).unwrap().verified);
    }

    #[test]
    fn m_at_most_one_rejected() {
        let cone = ConeForm::new(1.0, 1).unwrap();
        let a = diag(&[2.0, 0.5]);
        assert!(certify_unstable_disc(&a, &cone, 1.0).is_err());
        assert!(certify_unstable_disc(&a, &cone, 0.5).is_err());
    }

    #[test]
    fn narrower_cone_still_certifies_toy_saddle() {
        let a = diag(&[2.0, 0.5]);
        for alpha in [1.0, 0.5, 0.1, 1e-3] {
            let cone = ConeForm::new(alpha, 1).unwrap();
            let cert = certify_unstable_disc(&a, &cone, 1.3).unwrap();
            assert!(cert.verified, "alpha = {alpha}");
        }
    }

    #[test]
    fn wrong_shape_rejected() {
        let cone = ConeForm::new(1.0, 3).unwrap();
        let a = diag(&[2.0, 0.5]);
        assert!(matches!(
            check_expansion(&a, &cone, 1.5),
            Err(LibrateError::BadBlockStructure(_))
        ));
    }

    /// Deterministic xorshift for the randomized corroborations.
    struct Rng(u64);
    impl Rng {
        fn next_f64(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
            lo + (hi - lo) * self.next_f64()
        }
    }

    fn sample_matrix(rng: &mut Rng, a: &IMatrix) -> Vec<Vec<f64>> {
        (0..a.rows())
            .map(|i| {
                (0..a.cols())
                    .map(|j| rng.in_range(a[(i, j)].lo(), a[(i, j)].hi()))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn randomized_corroboration_of_both_lemmas() {
        let cone = ConeForm::new(2.56e-6, 3).unwrap();
        let mut a = IMatrix::zeros(4, 4);
        a[(0, 0)] = Interval::new(1465.6, 1466.5);
        for j in 1..4 {
            a[(0, j)] = Interval::centered(0.0, 0.369);
            a[(j, 0)] = Interval::centered(0.0, 0.1);
            for k in 1..4 {
                a[(j, k)] = Interval::centered(0.0, 0.9);
            }
        }
        let m = 1000.0;
        assert!(check_expansion(&a, &cone, m).unwrap().pass);
        assert!(check_q_increase(&a, &cone).unwrap().pass);
        let mut rng = Rng(0x9e3779b97f4a7c15);
        for _ in 0..500 {
            let mat = sample_matrix(&mut rng, &a);
            // a cone vector: |x| = 1, ||y|| <= sqrt(alpha)
            let x = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
            let mut v = [x, 0.0, 0.0, 0.0];
            let scale = rng.next_f64() * cone.alpha.sqrt() / 3f64.sqrt();
            for vi in v.iter_mut().skip(1) {
                *vi = rng.in_range(-scale, scale);
            }
            assert!(cone.q(&v) >= 0.0);
            let av: Vec<f64> = (0..4)
                .map(|i| (0..4).map(|j| mat[i][j] * v[j]).sum())
                .collect();
            assert!(cone.q(&av) > 0.0, "Q should strictly increase");
            let norm = |w: &[f64]| w.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!(norm(&av) > m * norm(&v), "expansion violated");
        }
    }
}
