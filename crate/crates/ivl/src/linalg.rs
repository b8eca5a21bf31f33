//! Interval linear algebra: preconditioned interval Gaussian elimination,
//! the interval Newton operator, and eigenvalue enclosures for the small
//! matrices this project needs.

use crate::{IMatrix, IVector, Interval, IvlError};

/// Plain floating-point Gaussian elimination with partial pivoting.
/// Returns the inverse, or None when numerically singular.
pub fn f64_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n);
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|i| (i, aug[i][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if pval == 0.0 || !pval.is_finite() {
            return None;
        }
        aug.swap(col, piv);
        let d = aug[col][col];
        for j in 0..2 * n {
            aug[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = aug[i][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        aug[i][j] -= f * aug[col][j];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn precondition(a: &IMatrix) -> Result<IMatrix, IvlError> {
    let p = f64_inverse(&a.mid()).ok_or(IvlError::SingularEnclosure)?;
    Ok(IMatrix::from_f64_rows(&p))
}

/// Enclosure of {A^-1 b : A in [A], b in [b]} by midpoint-inverse
/// preconditioning followed by interval Gaussian elimination.
pub fn solve_linear(a: &IMatrix, b: &IVector) -> Result<IVector, IvlError> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    let p = precondition(a)?;
    let pa = p.matmul(a);
    let pb = p.matvec(b);
    gauss_solve(&pa, &pb)
}

/// Same preconditioning, matrix right-hand side.
pub fn solve_linear_matrix(a: &IMatrix, b: &IMatrix) -> Result<IMatrix, IvlError> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.rows(), n);
    let p = precondition(a)?;
    let pa = p.matmul(a);
    let pb = p.matmul(b);
    let mut out = IMatrix::zeros(n, b.cols());
    for j in 0..b.cols() {
        let col = gauss_solve(&pa, &pb.col(j))?;
        out.set_col(j, &col);
    }
    Ok(out)
}

/// Enclosure of the exact inverse of every member of [A].
pub fn enclose_inverse(a: &IMatrix) -> Result<IMatrix, IvlError> {
    solve_linear_matrix(a, &IMatrix::identity(a.rows()))
}

fn gauss_solve(a: &IMatrix, b: &IVector) -> Result<IVector, IvlError> {
    let n = a.rows();
    let mut m = a.clone();
    let mut rhs = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        // pivot by largest mignitude
        let (piv, mig) = (col..n)
            .map(|i| (i, m[(perm[i], col)].mig()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if mig == 0.0 {
            return Err(IvlError::SingularEnclosure);
        }
        perm.swap(col, piv);
        let prow = perm[col];
        let pivot = m[(prow, col)];
        for i in col + 1..n {
            let row = perm[i];
            let factor = m[(row, col)].checked_div(&pivot)?;
            m[(row, col)] = Interval::ZERO;
            for j in col + 1..n {
                let t = m[(row, j)] - factor * m[(prow, j)];
                m[(row, j)] = t;
            }
            let t = rhs[row] - factor * rhs[prow];
            rhs[row] = t;
        }
    }
    let mut x = IVector::zeros(n);
    for col in (0..n).rev() {
        let row = perm[col];
        let mut s = rhs[row];
        for j in col + 1..n {
            s = s - m[(row, j)] * x[j];
        }
        x[col] = s.checked_div(&m[(row, col)])?;
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq)]
pub enum NewtonStatus {
    UniqueZeroProven,
    Inconclusive,
}

/// Result of one interval Newton step N(x0, X) = x0 - [Df(X)]^-1 f(x0).
#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub status: NewtonStatus,
    /// The set N(x0, X).
    pub refined: IVector,
}

/// Interval Newton test: proves a unique zero in `x_box` when the Newton
/// image lands inside the box.
///
/// `f_at_point` must enclose f(x0) and `df_on_box` must enclose the
/// Jacobian over all of `x_box`; `x0` must lie in `x_box`.
pub fn interval_newton(
    f_at_point: &IVector,
    df_on_box: &IMatrix,
    x_box: &IVector,
    x0: &[f64],
) -> NewtonOutcome {
    debug_assert!(x0
        .iter()
        .zip(&x_box.0)
        .all(|(&p, iv)| iv.contains(p)));
    let correction = match solve_linear(df_on_box, f_at_point) {
        Ok(c) => c,
        Err(_) => {
            return NewtonOutcome {
                status: NewtonStatus::Inconclusive,
                refined: x_box.clone(),
            }
        }
    };
    let refined = IVector(
        x0.iter()
            .zip(&correction.0)
            .map(|(&p, &c)| Interval::point(p) - c)
            .collect(),
    );
    let status = if refined.subset(x_box) {
        NewtonStatus::UniqueZeroProven
    } else {
        NewtonStatus::Inconclusive
    };
    NewtonOutcome { status, refined }
}

/// Eigenvalue enclosures for a 2x2 interval matrix via the interval
/// quadratic formula. `verified_real_split` is true only when the
/// discriminant is strictly positive over the whole enclosure, in which
/// case `l1`, `l2` enclose the two real eigenvalues of every member.
pub fn eig2_real(b: &IMatrix) -> (Interval, Interval, bool) {
    assert_eq!((b.rows(), b.cols()), (2, 2));
    let tr = b[(0, 0)] + b[(1, 1)];
    let det = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
    let disc = tr.sqr() - det.scale(4.0);
    if disc.lo() <= 0.0 {
        return (Interval::EMPTY, Interval::EMPTY, false);
    }
    let sd = disc.sqrt();
    let half = Interval::point(0.5);
    let l1 = (tr + sd) * half;
    let l2 = (tr - sd) * half;
    (l1, l2, true)
}

/// Lower bound on the spectrum of every symmetric member of `bsym`
/// via Gershgorin disks: returns `g` with inf spec(B) >= g.
pub fn gershgorin_min_eig(bsym: &IMatrix) -> f64 {
    let n = bsym.rows();
    assert_eq!(bsym.cols(), n);
    let mut bound = f64::INFINITY;
    for i in 0..n {
        let mut radius = Interval::ZERO;
        for j in 0..n {
            if i != j {
                radius = radius + Interval::point(bsym[(i, j)].mag());
            }
        }
        let low = (bsym[(i, i)] - radius).lo();
        bound = bound.min(low);
    }
    bound
}
