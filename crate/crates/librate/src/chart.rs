//! Local chart around a reference Lyapunov orbit and the local map `F`.
//!
//! The chart is the data `(q0, C, K, lambda, T)`: a near-fixed point `q0` of
//! the `tau`-time map, a frame `C` taking its monodromy to real Jordan form,
//! polynomials `K` approximating the unstable manifold of the linearized map
//! in local coordinates, the unstable multiplier `lambda`, and an enclosure
//! `T` of all orbit periods over the family box.  The straightening map is
//!
//! ```text
//! psi_0(x, y) = K_0(x) - (y_1 K_1'(x) + y_2 K_2'(x) + y_3 K_3'(x))
//! psi_i(x, y) = K_i(x) + y_i K_0'(x)
//! ```
//!
//! and the local map `F = psi^-1 Phi~_T psi` is never evaluated through
//! `psi^-1`: images come from an interval Newton inclusion on
//! `G(tau, v1, v2) = Phi_tau(C psi(v1) + q0) - (C psi(lambda v2) + q0)`, and
//! derivatives from the product form
//! `[Dpsi(F(B))]^-1 C^-1 [DPhi_T] C [Dpsi(B)]` with the leading inverse an
//! interval linear solve.

use crate::cones::{certify_unstable_disc, ConeCertificate, ConeForm};
use crate::error::{LibrateError, Result};
use crate::family::FamilyBox;
use crate::flow::{
    from_imatrix, imat_identity, imat_mul, imat_vec, ivec4, to_imatrix, IMat4, IVec4, LohnerSet,
    RigorousFlow,
};
use crate::flow64::{matmul4, Flow64, Mat4};
use crate::jets::TaylorExpansion;
use crate::model::{vector_field, vector_field_jacobian, DIM};
use crate::poly::PolyJet;
use crate::scalar::Scalar;
use ivl::{enclose_inverse, f64_inverse, solve_linear, solve_linear_matrix, IVector, Interval};
use serde::{Deserialize, Serialize};

/// Local chart data; see the module docs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ChartData", into = "ChartData")]
pub struct Chart {
    pub q0: [f64; DIM],
    pub c: Mat4,
    /// Rigorous enclosure of the inverse of the (exact f64) frame `c`.
    pub c_inv: IMat4,
    /// Coefficient lists of `K_0 .. K_3`, index = power.
    pub k: [Vec<f64>; DIM],
    /// Floating-point unstable multiplier used in the conjugacy `lambda x`.
    pub lambda: f64,
    /// Period enclosure: `tau(x)` for every family member.
    pub t: Interval,
}

impl Chart {
    pub fn new(q0: [f64; DIM], c: Mat4, k: [Vec<f64>; DIM], lambda: f64, t: Interval) -> Result<Chart> {
        if k[0].first().copied().unwrap_or(0.0) != 0.0 {
            return Err(LibrateError::Config("K_0 must have zero constant term".into()));
        }
        for kc in &k[1..] {
            if kc.first().copied().unwrap_or(0.0) != 0.0
                || kc.get(1).copied().unwrap_or(0.0) != 0.0
            {
                return Err(LibrateError::Config(
                    "K_1..K_3 must have zero constant and linear terms".into(),
                ));
            }
        }
        if k[0].get(1).copied().unwrap_or(0.0) <= 0.0 {
            return Err(LibrateError::Config("K_0 needs a positive linear term".into()));
        }
        if !(lambda.abs() > 1.0) {
            return Err(LibrateError::Config(format!("not an unstable multiplier: {lambda}")));
        }
        let c_im = to_imatrix(&fmat(&c));
        let c_inv = from_imatrix(&enclose_inverse(&c_im).map_err(LibrateError::Interval)?);
        Ok(Chart {
            q0,
            c,
            c_inv,
            k,
            lambda,
            t,
        })
    }

    /// The chart of the reference proof: the published frame and manifold
    /// polynomials; the multiplier is recomputed from the monodromy.
    pub fn reference() -> Chart {
        use crate::model::MU_DEFAULT;
        let bx = FamilyBox::reference();
        let q0 = [bx.x_c, 0.0, 0.0, bx.py_c];
        let c = [
            [0.197841, -0.197841, 0.0, 0.221884],
            [-0.221884, -0.221884, 0.773671, 0.0],
            [1.0, 1.0, -1.0, 0.0],
            [-0.255717, 0.255717, 0.0, -1.0],
        ];
        let k = [
            vec![0.0, 0.1, -0.0621591, 0.0375888, -0.0200645],
            vec![0.0, 0.0, 0.000533561, -0.00723085, 0.00827176],
            vec![0.0, 0.0, -0.0151949, 0.009304476, -0.00427633],
            vec![0.0, 0.0, 0.0269670, -0.0275820, 0.0203022],
        ];
        let t = Interval::new(3.058882598, 3.058883224);
        let (_, m) = Flow64::new(MU_DEFAULT).flow_var(q0, t.mid());
        let lambda = unstable_multiplier(&m).expect("reference monodromy is hyperbolic");
        Chart::new(q0, c, k, lambda, t).expect("reference chart data is well-formed")
    }

    /// Linear coefficient of `K_0`, the scale of the chart at the origin.
    pub fn sigma(&self) -> f64 {
        self.k[0][1]
    }

    /// `C psi(v) + q0` as an interval enclosure.
    pub fn to_ambient(&self, v: &IVec4) -> IVec4 {
        let p = psi_eval(self, v);
        std::array::from_fn(|i| {
            let mut acc = Interval::point(self.q0[i]);
            for (j, pj) in p.iter().enumerate() {
                acc = acc + pj.scale(self.c[i][j]);
            }
            acc
        })
    }

    /// `lambda(v) = (lambda x, y)` on a box; the scaling is an exact f64
    /// product in each bound.
    pub fn lam(&self, v: &IVec4) -> IVec4 {
        [v[0].scale(self.lambda), v[1], v[2], v[3]]
    }
}

/// Serialized form: frame and point as decimal strings (round-trip exact),
/// polynomials as coefficient lists.
#[derive(Clone, Serialize, Deserialize)]
struct ChartData {
    q0: Vec<String>,
    /// Row-major 16 entries.
    c: Vec<String>,
    k: Vec<Vec<f64>>,
    lambda: String,
    t: Interval,
}

impl From<Chart> for ChartData {
    fn from(ch: Chart) -> ChartData {
        ChartData {
            q0: ch.q0.iter().map(|x| format!("{x:?}")).collect(),
            c: ch.c.iter().flatten().map(|x| format!("{x:?}")).collect(),
            k: ch.k.to_vec(),
            lambda: format!("{:?}", ch.lambda),
            t: ch.t,
        }
    }
}

impl TryFrom<ChartData> for Chart {
    type Error = LibrateError;

    fn try_from(d: ChartData) -> Result<Chart> {
        let num = |s: &String| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| LibrateError::Config(format!("bad decimal string {s:?}: {e}")))
        };
        if d.q0.len() != DIM || d.c.len() != DIM * DIM || d.k.len() != DIM {
            return Err(LibrateError::Config("chart data has wrong dimensions".into()));
        }
        let mut q0 = [0.0; DIM];
        for (i, s) in d.q0.iter().enumerate() {
            q0[i] = num(s)?;
        }
        let mut c = [[0.0; DIM]; DIM];
        for (idx, s) in d.c.iter().enumerate() {
            c[idx / DIM][idx % DIM] = num(s)?;
        }
        let k: [Vec<f64>; DIM] = std::array::from_fn(|i| d.k[i].clone());
        Chart::new(q0, c, k, num(&d.lambda)?, d.t)
    }
}

fn fmat(a: &Mat4) -> IMat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| Interval::point(a[i][j])))
}

fn poly_eval<S: Scalar>(c: &[f64], x: &S) -> S {
    let mut acc = S::from_f64(c.last().copied().unwrap_or(0.0));
    for &ck in c.iter().rev().skip(1) {
        acc = acc.mul(x).add(&S::from_f64(ck));
    }
    acc
}

fn poly_deriv_eval<S: Scalar>(c: &[f64], x: &S) -> S {
    let n = c.len();
    if n <= 1 {
        return S::zero();
    }
    let mut acc = S::from_f64(c[n - 1]).scale((n - 1) as f64);
    for j in (1..n - 1).rev() {
        acc = acc.mul(x).add(&S::from_f64(c[j]).scale(j as f64));
    }
    acc
}

fn poly_deriv2_eval<S: Scalar>(c: &[f64], x: &S) -> S {
    let n = c.len();
    if n <= 2 {
        return S::zero();
    }
    let m = n - 1;
    let mut acc = S::from_f64(c[m]).scale((m * (m - 1)) as f64);
    for j in (2..m).rev() {
        acc = acc.mul(x).add(&S::from_f64(c[j]).scale((j * (j - 1)) as f64));
    }
    acc
}

/// The straightening map `psi` at `v = (x, y1, y2, y3)`.
pub fn psi_eval<S: Scalar>(chart: &Chart, v: &[S; DIM]) -> [S; DIM] {
    let x = &v[0];
    let k0d = poly_deriv_eval(&chart.k[0], x);
    let mut out: [S; DIM] = std::array::from_fn(|_| S::zero());
    let mut psi0 = poly_eval(&chart.k[0], x);
    for i in 1..DIM {
        let kid = poly_deriv_eval(&chart.k[i], x);
        psi0 = psi0.sub(&v[i].mul(&kid));
        out[i] = poly_eval(&chart.k[i], x).add(&v[i].mul(&k0d));
    }
    out[0] = psi0;
    out
}

/// Exact symbolic Jacobian of `psi` over a box (or at a point).
pub fn psi_jacobian<S: Scalar>(chart: &Chart, v: &[S; DIM]) -> [[S; DIM]; DIM] {
    let x = &v[0];
    let k0d = poly_deriv_eval(&chart.k[0], x);
    let k0dd = poly_deriv2_eval(&chart.k[0], x);
    let mut j: [[S; DIM]; DIM] = std::array::from_fn(|_| std::array::from_fn(|_| S::zero()));
    let mut j00 = k0d.clone();
    for i in 1..DIM {
        let kid = poly_deriv_eval(&chart.k[i], x);
        let kidd = poly_deriv2_eval(&chart.k[i], x);
        j00 = j00.sub(&v[i].mul(&kidd));
        j[0][i] = kid.neg();
        j[i][0] = poly_deriv_eval(&chart.k[i], x).add(&v[i].mul(&k0dd));
        j[i][i] = k0d.clone();
        let _ = kid;
    }
    j[0][0] = j00;
    j
}

/// Unstable multiplier of a symplectic 4x4 monodromy matrix from the
/// reciprocal characteristic polynomial: with `s = t + 1/t`,
/// `s^2 - tr(M) s + (c2 - 2) = 0` where `c2` sums the principal 2x2 minors.
pub fn unstable_multiplier(m: &Mat4) -> Result<f64> {
    let c1: f64 = (0..DIM).map(|i| m[i][i]).sum();
    let mut c2 = 0.0;
    for i in 0..DIM {
        for j in i + 1..DIM {
            c2 += m[i][i] * m[j][j] - m[i][j] * m[j][i];
        }
    }
    let disc = c1 * c1 - 4.0 * (c2 - 2.0);
    if disc <= 0.0 {
        return Err(LibrateError::EigenFailure(
            "complex s-roots: no hyperbolic pair".into(),
        ));
    }
    let sd = disc.sqrt();
    let s1 = if c1 >= 0.0 { (c1 + sd) / 2.0 } else { (c1 - sd) / 2.0 };
    let d2 = s1 * s1 - 4.0;
    if d2 <= 0.0 {
        return Err(LibrateError::EigenFailure(format!(
            "dominant multiplier pair is elliptic (s = {s1})"
        )));
    }
    let lam = if s1 >= 0.0 {
        (s1 + d2.sqrt()) / 2.0
    } else {
        (s1 - d2.sqrt()) / 2.0
    };
    Ok(lam)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// A null vector of a (numerically) rank-3 matrix: the largest column of the
/// adjugate, since `A adj(A) = det(A) I` is negligible.
fn adjugate_null(a: &Mat4) -> Result<[f64; DIM]> {
    let mut adj = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            let mut minor = [[0.0; 3]; 3];
            let mut r = 0;
            for ii in 0..DIM {
                if ii == i {
                    continue;
                }
                let mut c = 0;
                for jj in 0..DIM {
                    if jj == j {
                        continue;
                    }
                    minor[r][c] = a[ii][jj];
                    c += 1;
                }
                r += 1;
            }
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[j][i] = sign * det3(minor);
        }
    }
    let best = (0..DIM)
        .max_by(|&p, &q| {
            let np: f64 = (0..DIM).map(|i| adj[i][p] * adj[i][p]).sum();
            let nq: f64 = (0..DIM).map(|i| adj[i][q] * adj[i][q]).sum();
            np.total_cmp(&nq)
        })
        .unwrap();
    let v: [f64; DIM] = std::array::from_fn(|i| adj[i][best]);
    let n: f64 = v.iter().map(|x| x * x).sum();
    if n == 0.0 || !n.is_finite() {
        return Err(LibrateError::EigenFailure("adjugate null space collapsed".into()));
    }
    Ok(v)
}

/// Non-rigorous flow of a polynomial curve of initial conditions: every
/// scalar of the Taylor recurrence is a truncated power series in the curve
/// parameter.
fn flow_jet(mut q: [PolyJet; DIM], mu: f64, t: f64) -> [PolyJet; DIM] {
    assert!(t >= 0.0);
    let order = 20;
    let tol = 1e-14;
    let mut remaining = t;
    while remaining > 0.0 {
        let mut te = TaylorExpansion::new(q, mu, None);
        te.extend_to(order);
        let top = te.state[order].iter().fold(0.0f64, |m, c| m.max(c.bound()));
        let h = if top > 0.0 {
            0.8 * (tol / top).powf(1.0 / order as f64)
        } else {
            0.5
        };
        let h = h.clamp(1e-6, 0.5).min(remaining);
        q = te.eval_state(&PolyJet::from_f64(h));
        remaining -= h;
    }
    q
}

/// Fits the chart at the center of a family box: frame columns from the
/// monodromy eigen-structure (unstable, stable, orbit direction, family
/// direction), then the manifold polynomials `K` order-by-order from the
/// cohomology equation `Phi~_tau(K(x)) = K(lambda x)` with linear term
/// `(sigma, 0, 0, 0)`.
pub fn fit_chart(bx: &FamilyBox, t: Interval, mu: f64, d: usize, sigma: f64) -> Result<Chart> {
    if d < 1 || sigma <= 0.0 {
        return Err(LibrateError::Config(format!(
            "need degree >= 1 and positive scale, got d = {d}, sigma = {sigma}"
        )));
    }
    let q0 = [bx.x_c, 0.0, 0.0, bx.py_c];
    let fl = Flow64::new(mu);
    let tau = t.mid();
    let (_, m) = fl.flow_var(q0, tau);
    let lambda = unstable_multiplier(&m)?;

    // Columns: unstable and stable eigenvectors normalized to px = 1, the
    // flow direction (multiplier-1 eigenvector) to px = -1, and the family
    // tangent (1, 0, 0, slope) to py = -1.
    let shifted = |s: f64| -> Mat4 {
        let mut a = m;
        for i in 0..DIM {
            a[i][i] -= s;
        }
        a
    };
    let vu = adjugate_null(&shifted(lambda))?;
    let vs = adjugate_null(&shifted(1.0 / lambda))?;
    if vu[2] == 0.0 || vs[2] == 0.0 {
        return Err(LibrateError::EigenFailure(
            "hyperbolic eigenvectors orthogonal to the px axis".into(),
        ));
    }
    let f0 = vector_field(&q0, mu);
    if f0[2] == 0.0 || bx.slope == 0.0 {
        return Err(LibrateError::EigenFailure("degenerate center directions".into()));
    }
    let cols: [[f64; DIM]; DIM] = [
        std::array::from_fn(|i| vu[i] / vu[2]),
        std::array::from_fn(|i| vs[i] / vs[2]),
        std::array::from_fn(|i| f0[i] / -f0[2]),
        [-1.0 / bx.slope, 0.0, 0.0, -1.0],
    ];
    let c: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| cols[j][i]));
    let c_rows: Vec<Vec<f64>> = c.iter().map(|r| r.to_vec()).collect();
    let c_inv_f = f64_inverse(&c_rows)
        .ok_or_else(|| LibrateError::EigenFailure("frame is numerically singular".into()))?;
    let cinv: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| c_inv_f[i][j]));
    let j_mat = matmul4(&cinv, &matmul4(&m, &c));

    // kcoef[n] is the order-n vector coefficient of K in local coordinates.
    let mut kcoef: Vec<[f64; DIM]> = vec![[0.0; DIM], [sigma, 0.0, 0.0, 0.0]];
    for n in 2..=d {
        let q_jet: [PolyJet; DIM] = std::array::from_fn(|i| {
            let mut coeffs = vec![0.0; n + 1];
            coeffs[0] = q0[i];
            for (ord, kc) in kcoef.iter().enumerate().skip(1) {
                coeffs[ord] = (0..DIM).map(|l| c[i][l] * kc[l]).sum();
            }
            PolyJet::from_coeffs(coeffs)
        });
        let w = flow_jet(q_jet, mu, tau);
        let r_amb: [f64; DIM] = std::array::from_fn(|i| w[i].coeff(n));
        let r_loc: [f64; DIM] =
            std::array::from_fn(|i| (0..DIM).map(|l| cinv[i][l] * r_amb[l]).sum());
        let ln = lambda.powi(n as i32);
        let mut sys = [[0.0; DIM]; DIM];
        for i in 0..DIM {
            for jj in 0..DIM {
                sys[i][jj] = if i == jj { ln - j_mat[i][jj] } else { -j_mat[i][jj] };
            }
        }
        let sys_rows: Vec<Vec<f64>> = sys.iter().map(|r| r.to_vec()).collect();
        let inv = f64_inverse(&sys_rows)
            .ok_or(LibrateError::ResonanceDivisionFailure { order: n })?;
        kcoef.push(std::array::from_fn(|i| {
            (0..DIM).map(|l| inv[i][l] * r_loc[l]).sum()
        }));
    }
    let k: [Vec<f64>; DIM] = std::array::from_fn(|l| (0..=d).map(|n| kcoef[n][l]).collect());
    Chart::new(q0, c, k, lambda, t)
}

/// Enclosure of `tau(q(x))` for every `x` in the family box: the full-return
/// crossing time of the whole parallelogram.
pub fn period_enclosure(bx: &FamilyBox, mu: f64) -> Result<Interval> {
    let fl = RigorousFlow::new(mu);
    let mut set = bx.lohner_set();
    let hit = fl.poincare(&mut set, 2)?;
    Ok(hit.t)
}

/// Encloses the fixed-point curve in local coordinates: a box `B0` with
/// `psi^-1(C^-1(q(x) - q0))` inside it for every family member, certified by
/// an interval Newton inclusion (no `psi^-1` is ever evaluated).
pub fn enclose_b0(chart: &Chart, bx: &FamilyBox) -> Result<IVec4> {
    let sigma = chart.sigma();
    // shear A carries the family tangent; R approximates Dpsi(0)^-1 C^-1 A
    let mut a_sh = [[0.0; DIM]; DIM];
    let mut a_inv = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        a_sh[i][i] = 1.0;
        a_inv[i][i] = 1.0;
    }
    a_sh[3][0] = bx.slope;
    a_inv[3][0] = -bx.slope;
    let c_rows: Vec<Vec<f64>> = chart.c.iter().map(|r| r.to_vec()).collect();
    let cinv = f64_inverse(&c_rows)
        .ok_or_else(|| LibrateError::EigenFailure("frame is numerically singular".into()))?;
    let mut r_mat = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            r_mat[i][j] = (0..DIM).map(|l| cinv[i][l] * a_sh[l][j]).sum::<f64>() / sigma;
        }
    }
    let rhs: IVec4 = [
        Interval::centered(0.0, bx.rx),
        Interval::ZERO,
        Interval::ZERO,
        Interval::centered(0.0, bx.r1),
    ];
    let mut cand: IVec4 = [
        rhs[0].inflate(0.05 * bx.rx),
        Interval::centered(0.0, 1e-18),
        Interval::centered(0.0, 1e-18),
        rhs[3].inflate(0.05 * bx.r1),
    ];
    for _ in 0..12 {
        let rb = imat_vec(&fmat(&r_mat), &cand);
        let dpsi = psi_jacobian(chart, &rb);
        let t_mat = imat_mul(
            &fmat(&a_inv),
            &imat_mul(&fmat(&chart.c), &imat_mul(&dpsi, &fmat(&r_mat))),
        );
        let m_vec = solve_linear(&to_imatrix(&t_mat), &IVector(ivec4(&rhs)))
            .map_err(LibrateError::Interval)?;
        let m_arr: IVec4 = std::array::from_fn(|i| m_vec[i]);
        if (0..DIM).all(|i| m_arr[i].interior_subset(&cand[i])) {
            return Ok(imat_vec(&fmat(&r_mat), &m_arr));
        }
        cand = std::array::from_fn(|i| {
            let h = m_arr[i].hull(&cand[i]);
            h.inflate(h.rad() + 1e-20)
        });
    }
    Err(LibrateError::InclusionFailed(
        "Newton preimage candidate did not stabilize".into(),
    ))
}

/// The ambient set `{q0 + C psi(u1)}` as a Lohner parallelepiped in the
/// frame `mid(C Dpsi(u1))`; keeping the chart alignment in the frame is what
/// lets the variational enclosure stay thin over a full period.
pub fn ambient_set(chart: &Chart, u1: &IVec4) -> Result<LohnerSet> {
    let v1: [f64; DIM] = std::array::from_fn(|i| u1[i].mid());
    let b: IVec4 = std::array::from_fn(|i| u1[i] - Interval::point(v1[i]));
    let psi_v1 = psi_eval(chart, &v1.map(Interval::point));
    let center: IVec4 = std::array::from_fn(|i| {
        let mut acc = Interval::point(chart.q0[i]);
        for j in 0..DIM {
            acc = acc + psi_v1[j].scale(chart.c[i][j]);
        }
        acc
    });
    let j = imat_mul(&fmat(&chart.c), &psi_jacobian(chart, u1));
    let a: Mat4 = std::array::from_fn(|i| std::array::from_fn(|jj| j[i][jj].mid()));
    let m: [f64; DIM] = std::array::from_fn(|i| center[i].mid());
    // r encloses (A^-1 J) b + A^-1 (center - m); forming the near-identity
    // product A^-1 J first keeps the box anisotropy
    let a_inv = from_imatrix(&enclose_inverse(&to_imatrix(&fmat(&a))).map_err(LibrateError::Interval)?);
    let near_id = imat_mul(&a_inv, &j);
    let d: IVec4 = std::array::from_fn(|i| center[i] - Interval::point(m[i]));
    let mut r = imat_vec(&near_id, &b);
    let ad = imat_vec(&a_inv, &d);
    for i in 0..DIM {
        r[i] = r[i] + ad[i];
    }
    let mut set = LohnerSet::affine(m, a, r);
    // seed the variational with C Dpsi(u1): the doubleton then propagates
    // DPhi C Dpsi(u1) directly, so downstream products need no cancelling
    // end-multiplication (which inflates relative widths)
    set.vp = std::array::from_fn(|i| std::array::from_fn(|jj| j[i][jj].mid()));
    set.vs = std::array::from_fn(|i| {
        std::array::from_fn(|jj| j[i][jj] - Interval::point(set.vp[i][jj]))
    });
    Ok(set)
}

/// Enclosure of a flow image and differential over an interval duration:
/// flow for the midpoint time, then a mean-value correction in time over a
/// window covering the radius.
fn flow_over_t(fl: &RigorousFlow, mut set: LohnerSet, t: &Interval) -> Result<(IVec4, IMat4)> {
    let tm = t.mid();
    fl.flow_time(&mut set, tm)?;
    let shift = *t - Interval::point(tm);
    let dt = shift.mag().max(1e-12);
    let (e, w) = fl.window_enclosure(&set, dt)?;
    let f_e = vector_field(&e, fl.mu);
    let hull = set.hull();
    let value: IVec4 = std::array::from_fn(|i| hull[i] + f_e[i] * shift);
    let df_e = vector_field_jacobian(&e, fl.mu);
    let dfw = imat_mul(&df_e, &w);
    let mut sh = imat_identity();
    for i in 0..DIM {
        for j in 0..DIM {
            sh[i][j] = sh[i][j] + shift * dfw[i][j];
        }
    }
    Ok((value, imat_mul(&sh, &set.var_hull())))
}

/// Certified image of the local map.
#[derive(Clone, Debug)]
pub struct ImageEnclosure {
    /// `F(U1)` is contained in `lambda(u2)`.
    pub u2: IVec4,
    /// Enclosure of `DPhi_T(C psi(U1) + q0)`, reusable for `DF`.
    pub dphi: IMat4,
}

/// Floating-point seed for the Newton image: solves
/// `psi(lambda v2) = C^-1 (target - q0)`.
fn seed_v0(chart: &Chart, cinv: &Mat4, target: [f64; DIM], v1: [f64; DIM]) -> [f64; DIM] {
    let rhs: [f64; DIM] = std::array::from_fn(|i| {
        (0..DIM).map(|j| cinv[i][j] * (target[j] - chart.q0[j])).sum()
    });
    let mut v2 = v1;
    for _ in 0..40 {
        let lv = [v2[0] * chart.lambda, v2[1], v2[2], v2[3]];
        let val = psi_eval(chart, &lv);
        let res: [f64; DIM] = std::array::from_fn(|i| val[i] - rhs[i]);
        let mut jm = psi_jacobian(chart, &lv);
        for row in jm.iter_mut() {
            row[0] *= chart.lambda;
        }
        let rows: Vec<Vec<f64>> = jm.iter().map(|r| r.to_vec()).collect();
        let Some(inv) = f64_inverse(&rows) else { break };
        let mut sq = 0.0;
        for i in 0..DIM {
            let step: f64 = (0..DIM).map(|j| inv[i][j] * res[j]).sum();
            v2[i] -= step;
            sq += step * step;
        }
        if sq < 1e-32 {
            break;
        }
    }
    v2
}

/// Interval Newton image bound for `F(u1)` (mean-value form): a certified
/// box `u2` with `F(u1)` inside `lambda(u2)`, together with the variational
/// enclosure along the way.
pub fn f_image(
    chart: &Chart,
    u1: &IVec4,
    u2_candidate: Option<IVec4>,
    mu: f64,
) -> Result<ImageEnclosure> {
    let fl = RigorousFlow::new(mu);
    let v1: [f64; DIM] = std::array::from_fn(|i| u1[i].mid());
    let b_box: IVec4 = std::array::from_fn(|i| u1[i] - Interval::point(v1[i]));
    let pt_box: IVec4 = std::array::from_fn(|i| Interval::point(v1[i]));
    let (phi_pt, _) = flow_over_t(&fl, ambient_set(chart, &pt_box)?, &chart.t)?;
    let (_, dphi) = flow_over_t(&fl, ambient_set(chart, u1)?, &chart.t)?;

    let c_rows: Vec<Vec<f64>> = chart.c.iter().map(|r| r.to_vec()).collect();
    let cinv_f = f64_inverse(&c_rows)
        .ok_or_else(|| LibrateError::EigenFailure("frame is numerically singular".into()))?;
    let cinv: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| cinv_f[i][j]));
    let v0 = match &u2_candidate {
        Some(c) => std::array::from_fn(|i| c[i].mid()),
        None => {
            let target: [f64; DIM] = std::array::from_fn(|i| phi_pt[i].mid());
            seed_v0(chart, &cinv, target, v1)
        }
    };

    let g_ref: IVec4 = {
        let lam_v0 = [
            Interval::point(v0[0]).scale(chart.lambda),
            Interval::point(v0[1]),
            Interval::point(v0[2]),
            Interval::point(v0[3]),
        ];
        let img = chart.to_ambient(&lam_v0);
        std::array::from_fn(|i| phi_pt[i] - img[i])
    };

    let base: [f64; DIM] = match &u2_candidate {
        Some(c) => std::array::from_fn(|i| c[i].rad().max(1e-18)),
        None => std::array::from_fn(|i| 2.0 * b_box[i].mag() + 1e-14),
    };
    let mut u2: IVec4 = std::array::from_fn(|i| Interval::centered(v0[i], base[i]));
    for _ in 0..6 {
        let lam_u2 = chart.lam(&u2);
        let dpsi_l = psi_jacobian(chart, &lam_u2);
        // A(U2) = -[C Dpsi(lambda U2) Dlambda]
        let mut a_mat = imat_mul(&fmat(&chart.c), &dpsi_l);
        for row in a_mat.iter_mut() {
            row[0] = row[0].scale(chart.lambda);
            for e in row.iter_mut() {
                *e = -*e;
            }
        }
        let z = solve_linear(&to_imatrix(&a_mat), &IVector(ivec4(&g_ref)))
            .map_err(LibrateError::Interval)?;
        // W = Dlambda^-1 (Dpsi(lambda U2)^-1 C^-1 DPhi C Dpsi(U1)); the
        // expansion of DPhi cancels against the leading 1/lambda; dphi
        // already carries the C Dpsi(U1) factor from the seeded variational
        let p = imat_mul(&chart.c_inv, &dphi);
        let mut w = from_imatrix(
            &solve_linear_matrix(&to_imatrix(&dpsi_l), &to_imatrix(&p))
                .map_err(LibrateError::Interval)?,
        );
        for e in w[0].iter_mut() {
            *e = e.checked_div(&Interval::point(chart.lambda))?;
        }
        let wb = imat_vec(&w, &b_box);
        let n: IVec4 = std::array::from_fn(|i| Interval::point(v0[i]) - z[i] + wb[i]);
        if (0..DIM).all(|i| n[i].subset(&u2[i])) {
            return Ok(ImageEnclosure { u2: n, dphi });
        }
        u2 = std::array::from_fn(|i| {
            let h = n[i].hull(&u2[i]);
            h.inflate(h.rad() + 1e-18)
        });
    }
    Err(LibrateError::InclusionFailed(format!(
        "image candidate did not absorb the Newton step for u1 = {:?}",
        u1.map(|c| (c.lo(), c.hi()))
    )))
}

/// Derivative enclosure of the local map, given a certified image (`F(u1)`
/// inside `lambda(u2)`) and the variational enclosure from [`f_image`]
/// (which carries the `C Dpsi(u1)` factor); the leading `Dpsi` inverse is an
/// interval linear solve.
pub fn df_enclose(chart: &Chart, u2: &IVec4, dphi: &IMat4) -> Result<IMat4> {
    let lam_u2 = chart.lam(u2);
    let dpsi_t = psi_jacobian(chart, &lam_u2);
    let p = imat_mul(&chart.c_inv, dphi);
    let df = solve_linear_matrix(&to_imatrix(&dpsi_t), &to_imatrix(&p))
        .map_err(LibrateError::Interval)?;
    Ok(from_imatrix(&df))
}

/// The cone-union set `B = U_{v in B0} Q+(v) n {x in [x_lo, x_hi]}` and its
/// subdivision count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalBox {
    pub b0: IVec4,
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
}

impl LocalBox {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_lo < self.x_hi) || self.n == 0 {
            return Err(LibrateError::Config(format!(
                "degenerate local box: x in [{}, {}], n = {}",
                self.x_lo, self.x_hi, self.n
            )));
        }
        if !self.b0.iter().all(|c| c.contains(0.0)) {
            return Err(LibrateError::Config("B0 must contain the origin".into()));
        }
        Ok(())
    }

    /// Box hull of the `i`-th subdivision slab: the cone over `B0` widens
    /// the `y` components by `sqrt(alpha) |x - vx|` (Euclidean, boxed).
    pub fn part(&self, i: usize, alpha: f64) -> IVec4 {
        assert!(i < self.n);
        let step = (self.x_hi - self.x_lo) / self.n as f64;
        let xa = self.x_lo + i as f64 * step;
        let xb = if i + 1 == self.n { self.x_hi } else { self.x_lo + (i + 1) as f64 * step };
        let d = xa.abs().max(xb.abs()) + self.b0[0].mag();
        let ry = (Interval::point(alpha).sqrt() * Interval::point(d)).hi();
        [
            Interval::new(xa, xb),
            self.b0[1] + Interval::centered(0.0, ry),
            self.b0[2] + Interval::centered(0.0, ry),
            self.b0[3] + Interval::centered(0.0, ry),
        ]
    }
}

/// Certified unstable-fiber bound: the derivative hull of the local map over
/// the cone union, plus the cone conditions it satisfies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiberCertificate {
    pub local_box: LocalBox,
    pub alpha: f64,
    pub df_hull: [[Interval; DIM]; DIM],
    pub cone: ConeCertificate,
    pub verified: bool,
}

/// Hull of `[DF(B_i)]` over the subdivision, computed in parallel with a
/// fixed index-order reduction.  `refine` splits each part further along `x`
/// for the derivative evaluation (a strictly tighter hull of the same set).
pub fn enclose_df_hull(chart: &Chart, lb: &LocalBox, alpha: f64, refine: usize, mu: f64) -> Result<IMat4> {
    use rayon::prelude::*;
    lb.validate()?;
    if refine == 0 {
        return Err(LibrateError::Config("refinement factor must be positive".into()));
    }
    let fine = LocalBox {
        b0: lb.b0,
        x_lo: lb.x_lo,
        x_hi: lb.x_hi,
        n: lb.n * refine,
    };
    let dfs: Vec<IMat4> = (0..fine.n)
        .into_par_iter()
        .map(|i| {
            let u1 = fine.part(i, alpha);
            let img = f_image(chart, &u1, None, mu)?;
            df_enclose(chart, &img.u2, &img.dphi)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hull = dfs[0];
    for df in &dfs[1..] {
        for i in 0..DIM {
            for j in 0..DIM {
                hull[i][j] = hull[i][j].hull(&df[i][j]);
            }
        }
    }
    Ok(hull)
}

/// Full fiber pipeline: derivative hull over the subdivided cone union, then
/// the cone-condition certificate with expansion floor `m`.
pub fn certify_fibers(
    chart: &Chart,
    lb: &LocalBox,
    alpha: f64,
    m: f64,
    refine: usize,
    mu: f64,
) -> Result<FiberCertificate> {
    let df_hull = enclose_df_hull(chart, lb, alpha, refine, mu)?;
    let cone = certify_unstable_disc(&to_imatrix(&df_hull), &ConeForm::new(alpha, 3)?, m)?;
    let verified = cone.verified;
    Ok(FiberCertificate {
        local_box: lb.clone(),
        alpha,
        df_hull,
        cone,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MU_DEFAULT;

    fn published_b0() -> IVec4 {
        [
            Interval::centered(0.0, 7.91575e-12),
            Interval::centered(0.0, 7.91575e-12),
            Interval::centered(0.0, 9.29424e-19),
            Interval::centered(0.0, 4.50827e-8),
        ]
    }

    #[test]
    fn fitted_chart_matches_reference_polynomials() {
        let bx = FamilyBox::reference();
        let t = Interval::new(3.058882598, 3.058883224);
        let ch = fit_chart(&bx, t, MU_DEFAULT, 4, 0.1).unwrap();
        // normalization: K_0 linear term exactly sigma, K_1..3 start at x^2
        assert_eq!(ch.k[0][1], 0.1);
        for l in 1..4 {
            assert_eq!(ch.k[l][0], 0.0);
            assert_eq!(ch.k[l][1], 0.0);
        }
        // [PAPER] K_0 = 0.1x - 0.0621591x^2 + ...
        let quad = ch.k[0][2];
        assert!(
            (quad - -0.0621591).abs() < 0.1 * 0.0621591,
            "K0 quadratic coefficient = {quad}"
        );
        // [PAPER] lambda_1 in [1450.24, 1481.68]
        assert!(ch.lambda > 1450.24 && ch.lambda < 1481.68, "lambda = {}", ch.lambda);
        // [PAPER] the published frame, reproduced to its displayed digits
        let c_ref = Chart::reference().c;
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (ch.c[i][j] - c_ref[i][j]).abs() < 5e-6,
                    "C[{i}][{j}] = {} vs {}",
                    ch.c[i][j],
                    c_ref[i][j]
                );
            }
        }
    }

    #[test]
    fn cohomology_residual_vanishes_through_fitted_order() {
        // flow the fitted curve as a degree-5 jet and compare coefficients
        // with K(lambda x): orders 0..4 cancel, order 5 is the truncation
        let bx = FamilyBox::reference();
        let t = Interval::new(3.058882598, 3.058883224);
        let d = 4;
        let ch = fit_chart(&bx, t, MU_DEFAULT, d, 0.1).unwrap();
        let deg = d + 1;
        let q_jet: [PolyJet; 4] = std::array::from_fn(|i| {
            let mut coeffs = vec![0.0; deg + 1];
            coeffs[0] = ch.q0[i];
            for ord in 1..=d {
                coeffs[ord] = (0..4)
                    .map(|l| ch.c[i][l] * ch.k[l].get(ord).copied().unwrap_or(0.0))
                    .sum();
            }
            PolyJet::from_coeffs(coeffs)
        });
        let w = flow_jet(q_jet, MU_DEFAULT, ch.t.mid());
        let c_rows: Vec<Vec<f64>> = ch.c.iter().map(|r| r.to_vec()).collect();
        let cinv = f64_inverse(&c_rows).unwrap();
        for ord in 0..=deg {
            for i in 0..4 {
                let amb: f64 = (0..4).map(|l| cinv[i][l] * (w[l].coeff(ord)
                    - if ord == 0 { ch.q0[l] } else { 0.0 })).sum::<f64>();
                let k_side = ch.k[i].get(ord).copied().unwrap_or(0.0) * ch.lambda.powi(ord as i32);
                let res = amb - k_side;
                // scale of the cancelling terms at this order
                let scale = k_side.abs().max(ch.lambda.powi(ord as i32) * 0.1f64.powi(ord as i32));
                if ord <= d {
                    assert!(
                        res.abs() <= 1e-7 * scale.max(1e-9),
                        "order {ord} component {i}: residual {res:e} vs scale {scale:e}"
                    );
                }
            }
        }
    }

    #[test]
    fn psi_restricted_to_axis_is_k() {
        let ch = Chart::reference();
        for x in [-0.05, 1e-3, 0.02, 0.1] {
            let v = [x, 0.0, 0.0, 0.0];
            let p = psi_eval(&ch, &v);
            for i in 0..4 {
                let k = poly_eval(&ch.k[i], &x);
                assert!((p[i] - k).abs() < 1e-15, "x = {x}, component {i}");
            }
        }
        // psi(0) = 0 and Dpsi(0) = sigma I
        let p0 = psi_eval(&ch, &[0.0; 4]);
        assert_eq!(p0, [0.0; 4]);
        let j0 = psi_jacobian(&ch, &[0.0; 4]);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { ch.sigma() } else { 0.0 };
                assert_eq!(j0[i][j], expect, "Dpsi(0)[{i}][{j}]");
            }
        }
    }

    #[test]
    fn psi_jacobian_matches_finite_differences() {
        let ch = Chart::reference();
        let v = [1e-3, 1e-4, 1e-4, 1e-4];
        let jac = psi_jacobian(&ch, &v);
        let eps = 1e-6;
        for j in 0..4 {
            let mut vp = v;
            let mut vm = v;
            vp[j] += eps;
            vm[j] -= eps;
            let pp = psi_eval(&ch, &vp);
            let pm = psi_eval(&ch, &vm);
            for i in 0..4 {
                let fd = (pp[i] - pm[i]) / (2.0 * eps);
                assert!((jac[i][j] - fd).abs() < 1e-6, "({i},{j}): {} vs {fd}", jac[i][j]);
            }
        }
    }

    #[test]
    fn interval_psi_contains_f64_samples() {
        let ch = Chart::reference();
        let b: IVec4 = [
            Interval::new(-1e-3, 2e-3),
            Interval::centered(0.0, 1e-4),
            Interval::centered(0.0, 1e-4),
            Interval::centered(0.0, 1e-4),
        ];
        let pb = psi_eval(&ch, &b);
        let jb = psi_jacobian(&ch, &b);
        for corner in 0..16 {
            let v: [f64; 4] = std::array::from_fn(|i| {
                if corner >> i & 1 == 1 { b[i].hi() } else { b[i].lo() }
            });
            let p = psi_eval(&ch, &v);
            let j = psi_jacobian(&ch, &v);
            for i in 0..4 {
                assert!(pb[i].contains(p[i]), "psi component {i}");
                for jj in 0..4 {
                    assert!(jb[i][jj].contains(j[i][jj]), "Dpsi ({i},{jj})");
                }
            }
        }
    }

    #[test]
    fn period_enclosure_meets_reference() {
        // [PAPER] T = [3.058882598, 3.058883224]
        let t = period_enclosure(&FamilyBox::reference(), MU_DEFAULT).unwrap();
        let t_ref = Interval::new(3.058882598, 3.058883224);
        assert!(!t.meet(&t_ref).is_empty(), "T = {t}");
        assert!(t.width() < 1e-5, "width = {:e}", t.width());
    }

    #[test]
    fn b0_enclosure_matches_reference() {
        let ch = Chart::reference();
        let bx = FamilyBox::reference();
        let b0 = enclose_b0(&ch, &bx).unwrap();
        // [PAPER] componentwise within 1.05x of the published box
        let p = published_b0();
        for i in 0..4 {
            assert!(
                b0[i].subset(&p[i].scale(1.05)),
                "component {i}: {} vs {}",
                b0[i],
                p[i]
            );
            assert!(b0[i].contains(0.0));
        }
        // [PAPER] flat along the third coordinate, stretched along the last
        assert!(b0[2].mag() < 1e-8 * b0[3].mag());
    }

    #[test]
    fn b0_image_respects_reversing_symmetry() {
        // the enclosed curve lies on the section: y and px straddle zero
        let ch = Chart::reference();
        let b0 = enclose_b0(&ch, &FamilyBox::reference()).unwrap();
        let amb = ch.to_ambient(&b0);
        assert!(amb[1].contains(0.0), "y = {}", amb[1]);
        assert!(amb[2].contains(0.0), "px = {}", amb[2]);
        assert!(amb[0].contains(ch.q0[0]));
    }

    #[test]
    fn degenerate_family_box_collapses_b0() {
        let ch = Chart::reference();
        let mut bx = FamilyBox::reference();
        bx.rx = 1e-14;
        bx.r1 = 1e-16;
        bx.r0 = 1e-17;
        let b0 = enclose_b0(&ch, &bx).unwrap();
        for i in 0..4 {
            assert!(b0[i].mag() < 1e-12, "component {i} = {}", b0[i]);
        }
    }

    #[test]
    fn chart_self_test_near_jordan_form() {
        // C^-1 DPhi_T(q0) C at the midpoint is close to Jordan structure in
        // the first row and column
        let ch = Chart::reference();
        let fl = RigorousFlow::new(MU_DEFAULT);
        let (_, dphi) = flow_over_t(&fl, LohnerSet::point(ch.q0), &ch.t).unwrap();
        let j = imat_mul(&ch.c_inv, &imat_mul(&dphi, &fmat(&ch.c)));
        let lam = j[0][0].mid();
        assert!((lam - ch.lambda).abs() < 1e-2 * ch.lambda);
        for i in 1..4 {
            assert!(j[0][i].mid().abs() < 1e-2 * ch.lambda, "J[0][{i}] = {}", j[0][i]);
            assert!(j[i][0].mid().abs() < 1e-2 * ch.lambda, "J[{i}][0] = {}", j[i][0]);
        }
    }

    #[test]
    fn image_of_origin_stays_near_origin() {
        // the origin of the chart approximates the fixed point: its image
        // box must contain zero at B0 scale
        let ch = Chart::reference();
        let u1: IVec4 = [Interval::ZERO; 4];
        let img = f_image(&ch, &u1, None, MU_DEFAULT).unwrap();
        for i in 0..4 {
            assert!(img.u2[i].contains(0.0), "component {i}: {}", img.u2[i]);
            assert!(img.u2[i].mag() < 1e-6, "component {i}: {}", img.u2[i]);
        }
    }

    #[test]
    fn x_expansion_factor_matches_multiplier() {
        // [PAPER] lambda_1 in [1450.24, 1481.68]: pi_x lambda(U2) against
        // pi_x U1 for a thin slab on the x axis
        let ch = Chart::reference();
        let x_c = 1e-7;
        let u1: IVec4 = [
            Interval::centered(x_c, 1e-10),
            Interval::centered(0.0, 1e-12),
            Interval::centered(0.0, 1e-12),
            Interval::centered(0.0, 1e-12),
        ];
        let img = f_image(&ch, &u1, None, MU_DEFAULT).unwrap();
        let ratio = img.u2[0].mid() * ch.lambda / x_c;
        assert!(ratio > 1450.24 && ratio < 1481.68, "expansion = {ratio}");
    }

    #[test]
    fn bad_candidate_recovers_to_consistent_image() {
        // a hopeless candidate is absorbed by the inflation loop and lands
        // on the same certified image as the self-seeded call
        let ch = Chart::reference();
        let u1: IVec4 = [
            Interval::centered(1e-7, 1e-10),
            Interval::centered(0.0, 1e-12),
            Interval::centered(0.0, 1e-12),
            Interval::centered(0.0, 1e-12),
        ];
        let cand: IVec4 = [Interval::centered(0.0, 1e-30); 4];
        let img_bad = f_image(&ch, &u1, Some(cand), MU_DEFAULT).unwrap();
        let img = f_image(&ch, &u1, None, MU_DEFAULT).unwrap();
        for i in 0..4 {
            assert!(
                !img_bad.u2[i].meet(&img.u2[i]).is_empty(),
                "component {i}: {} vs {}",
                img_bad.u2[i],
                img.u2[i]
            );
        }
    }

    #[test]
    fn df_at_origin_is_near_jordan() {
        // [PAPER] DF(0) (1,1) entry approximates the unstable eigenvalue
        let ch = Chart::reference();
        let u1: IVec4 = [Interval::ZERO; 4];
        let img = f_image(&ch, &u1, None, MU_DEFAULT).unwrap();
        let df = df_enclose(&ch, &img.u2, &img.dphi).unwrap();
        let lam_ref = Interval::new(1450.24, 1481.68);
        assert!(!df[0][0].meet(&lam_ref).is_empty(), "DF[0][0] = {}", df[0][0]);
        for i in 1..4 {
            assert!(df[0][i].mag() < 1.0, "DF[0][{i}] = {}", df[0][i]);
            assert!(df[i][0].mag() < 1.0, "DF[{i}][0] = {}", df[i][0]);
        }
    }

    #[test]
    fn widening_the_box_never_shrinks_df() {
        let ch = Chart::reference();
        let thin: IVec4 = [
            Interval::centered(5e-8, 1e-10),
            Interval::centered(0.0, 1e-12),
            Interval::centered(0.0, 1e-12),
            Interval::centered(0.0, 1e-11),
        ];
        let wide: IVec4 = std::array::from_fn(|i| thin[i].inflate(thin[i].rad() + 1e-11));
        let img_t = f_image(&ch, &thin, None, MU_DEFAULT).unwrap();
        let df_t = df_enclose(&ch, &img_t.u2, &img_t.dphi).unwrap();
        let img_w = f_image(&ch, &wide, None, MU_DEFAULT).unwrap();
        let df_w = df_enclose(&ch, &img_w.u2, &img_w.dphi).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    df_t[i][j].inflate(1e-9 * df_t[i][j].mag().max(1.0)).subset(
                        &df_w[i][j].inflate(1e-9 * df_w[i][j].mag().max(1.0))
                    ),
                    "({i},{j}): {} vs {}",
                    df_t[i][j],
                    df_w[i][j]
                );
            }
        }
    }

    #[test]
    fn df_midpoint_predicts_image_displacement() {
        // first-order consistency: F(v + d) - F(v) ~ DF d for a small step
        // along x
        let ch = Chart::reference();
        let mk = |x: f64| -> IVec4 {
            [
                Interval::centered(x, 1e-12),
                Interval::centered(0.0, 1e-13),
                Interval::centered(0.0, 1e-13),
                Interval::centered(0.0, 1e-13),
            ]
        };
        let d = 1e-9;
        let u_a = mk(2e-8);
        let u_b = mk(2e-8 + d);
        let img_a = f_image(&ch, &u_a, None, MU_DEFAULT).unwrap();
        let img_b = f_image(&ch, &u_b, None, MU_DEFAULT).unwrap();
        let hull: IVec4 = std::array::from_fn(|i| u_a[i].hull(&u_b[i]));
        let img_h = f_image(&ch, &hull, None, MU_DEFAULT).unwrap();
        let df = df_enclose(&ch, &img_h.u2, &img_h.dphi).unwrap();
        // compare in the image scale lambda(u2)
        let fa = ch.lam(&img_a.u2);
        let fb = ch.lam(&img_b.u2);
        for i in 0..4 {
            let observed = fb[i].mid() - fa[i].mid();
            let lam_row = if i == 0 { 1.0 } else { 1.0 };
            let predicted = df[i][0].mid() * d * lam_row;
            let tol = 1e-2 * predicted.abs().max(1e-12);
            assert!(
                (observed - predicted).abs() < tol.max(2.0 * (fa[i].rad() + fb[i].rad())),
                "component {i}: observed {observed:e}, predicted {predicted:e}"
            );
        }
    }

    #[test]
    fn micro_fiber_pipeline_verifies() {
        // a thin slab of the reference cone union certifies the cone
        // conditions with a large expansion floor
        let ch = Chart::reference();
        let b0 = enclose_b0(&ch, &FamilyBox::reference()).unwrap();
        let lb = LocalBox {
            b0,
            x_lo: -1e-11,
            x_hi: 2e-9,
            n: 2,
        };
        let alpha = 2.56e-6;
        let cert = certify_fibers(&ch, &lb, alpha, 1000.0, 1, MU_DEFAULT).unwrap();
        assert!(cert.verified, "cert: {cert:#?}");
        // [PAPER] [DF(B)] (1,1) entry
        let ref11 = Interval::new(1465.6, 1466.5);
        assert!(
            !cert.df_hull[0][0].meet(&ref11).is_empty(),
            "DF[0][0] = {}",
            cert.df_hull[0][0]
        );
    }

    #[test]
    fn chart_serde_round_trip() {
        let ch = Chart::reference();
        let s = serde_json::to_string(&ch).unwrap();
        let back: Chart = serde_json::from_str(&s).unwrap();
        assert_eq!(ch.q0, back.q0);
        assert_eq!(ch.c, back.c);
        assert_eq!(ch.k, back.k);
        assert_eq!(ch.lambda, back.lambda);
        assert_eq!(ch.t, back.t);
    }

    #[test]
    fn malformed_chart_data_rejected() {
        let mut k = Chart::reference().k;
        k[1][1] = 0.5; // linear term forbidden in K_1
        let r = Chart::new(Chart::reference().q0, Chart::reference().c, k, 1466.0, Interval::point(3.0588));
        assert!(r.is_err());
    }
}
