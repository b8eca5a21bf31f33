//! Validated integration: first-order Lohner sets with QR frames, Taylor
//! remainders from Picard rough enclosures, and rigorous Poincare-section
//! crossings.
//!
//! A set is stored as `{ m + C r }` with `m`, `C` floating point and `r` an
//! interval box; the accumulated variational matrix is carried in the same
//! shape, `V = P + Q S`.  One step encloses
//!
//! ```text
//! Phi_h(x0)  in  Phi_h(m) + [DPhi_h(X)] (x0 - m)
//! ```
//!
//! where `Phi_h(m)` and `J = [DPhi_h(X)]` are Taylor sums through order `p`
//! with Lagrange remainders evaluated on a rough enclosure of the step.

use crate::error::{LibrateError, Result};
use crate::flow64::{identity4, Flow64, Mat4};
use crate::jets::TaylorExpansion;
use crate::model::{check_collision, vector_field, vector_field_jacobian, DIM};
use ivl::{enclose_inverse, IMatrix, Interval};

pub type IVec4 = [Interval; DIM];
pub type IMat4 = [[Interval; DIM]; DIM];

pub fn ivec4(v: &IVec4) -> Vec<Interval> {
    v.to_vec()
}

pub fn to_imatrix(a: &IMat4) -> IMatrix {
    IMatrix::from_rows(&a.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

pub fn from_imatrix(a: &IMatrix) -> IMat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[(i, j)]))
}

pub fn imat_identity() -> IMat4 {
    let mut m = [[Interval::ZERO; DIM]; DIM];
    for i in 0..DIM {
        m[i][i] = Interval::ONE;
    }
    m
}

pub fn imat_mul(a: &IMat4, b: &IMat4) -> IMat4 {
    let mut c = [[Interval::ZERO; DIM]; DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            let mut acc = Interval::ZERO;
            for k in 0..DIM {
                acc = acc + a[i][k] * b[k][j];
            }
            c[i][j] = acc;
        }
    }
    c
}

pub fn imat_vec(a: &IMat4, v: &IVec4) -> IVec4 {
    std::array::from_fn(|i| {
        let mut acc = Interval::ZERO;
        for k in 0..DIM {
            acc = acc + a[i][k] * v[k];
        }
        acc
    })
}

pub fn fmat_to_imat(a: &Mat4) -> IMat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| Interval::point(a[i][j])))
}

fn imat_mul_f64(a: &IMat4, b: &Mat4) -> IMat4 {
    imat_mul(a, &fmat_to_imat(b))
}

fn imat_sub_f64(a: &IMat4, b: &Mat4) -> IMat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - Interval::point(b[i][j])))
}

fn imat_mid(a: &IMat4) -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].mid()))
}

/// Householder QR of a 4x4 matrix after sorting columns by weighted norm;
/// returns the orthogonal factor, which is well-conditioned regardless of
/// the rank of `a`.
fn qr_frame(a: &Mat4, weights: &[f64; DIM]) -> Mat4 {
    let mut idx = [0usize, 1, 2, 3];
    let norm = |j: usize| -> f64 {
        (0..DIM).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt() * weights[j].max(1e-300)
    };
    idx.sort_by(|&p, &q| norm(q).total_cmp(&norm(p)));
    let mut w = [[0.0; DIM]; DIM];
    for (jn, &jo) in idx.iter().enumerate() {
        for i in 0..DIM {
            w[i][jn] = a[i][jo];
        }
    }
    // accumulate Q from Householder reflectors applied to w
    let mut q = identity4();
    for k in 0..DIM {
        let mut v = [0.0; DIM];
        let mut nrm = 0.0;
        for i in k..DIM {
            v[i] = w[i][k];
            nrm += v[i] * v[i];
        }
        let nrm = nrm.sqrt();
        if nrm < 1e-300 {
            continue;
        }
        v[k] += v[k].signum() * nrm;
        let vv: f64 = (k..DIM).map(|i| v[i] * v[i]).sum();
        if vv < 1e-300 {
            continue;
        }
        for j in 0..DIM {
            let dot: f64 = (k..DIM).map(|i| v[i] * w[i][j]).sum();
            let f = 2.0 * dot / vv;
            for i in k..DIM {
                w[i][j] -= f * v[i];
            }
        }
        for j in 0..DIM {
            let dot: f64 = (k..DIM).map(|i| v[i] * q[i][j]).sum();
            let f = 2.0 * dot / vv;
            for i in k..DIM {
                q[i][j] -= f * v[i];
            }
        }
    }
    // q now holds H_n .. H_1; Q = (H_n .. H_1)^T
    let mut out = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = q[j][i];
        }
    }
    out
}

/// Rigorous inverse of a floating-point matrix.
fn inv_enclosure(a: &Mat4) -> Result<IMat4> {
    let im = IMatrix::from_f64_rows(&a.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    Ok(from_imatrix(&enclose_inverse(&im).map_err(LibrateError::Interval)?))
}

/// `{ m + C r }` with accumulated variational matrix `V = P + Q S`.
#[derive(Clone, Debug)]
pub struct LohnerSet {
    pub m: [f64; DIM],
    pub c: Mat4,
    pub r: IVec4,
    pub vp: Mat4,
    pub vq: Mat4,
    pub vs: IMat4,
    /// Elapsed time enclosure.
    pub t: Interval,
}

impl LohnerSet {
    pub fn point(m: [f64; DIM]) -> LohnerSet {
        LohnerSet::affine(m, identity4(), [Interval::ZERO; DIM])
    }

    /// Axis-aligned box `m + [-rad, rad]`.
    pub fn cube(m: [f64; DIM], rad: [f64; DIM]) -> LohnerSet {
        LohnerSet::affine(m, identity4(), rad.map(|r| Interval::centered(0.0, r)))
    }

    /// `{ m + C r }`; `r` should be (approximately) centered at zero.
    pub fn affine(m: [f64; DIM], c: Mat4, r: IVec4) -> LohnerSet {
        LohnerSet {
            m,
            c,
            r,
            vp: identity4(),
            vq: identity4(),
            vs: [[Interval::ZERO; DIM]; DIM],
            t: Interval::ZERO,
        }
    }

    pub fn hull(&self) -> IVec4 {
        std::array::from_fn(|i| {
            let mut acc = Interval::point(self.m[i]);
            for j in 0..DIM {
                acc = acc + Interval::point(self.c[i][j]) * self.r[j];
            }
            acc
        })
    }

    /// Enclosure of the accumulated variational matrix.
    pub fn var_hull(&self) -> IMat4 {
        let mut out = [[Interval::ZERO; DIM]; DIM];
        let q = fmat_to_imat(&self.vq);
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = Interval::point(self.vp[i][j]);
                for k in 0..DIM {
                    acc = acc + q[i][k] * self.vs[k][j];
                }
                out[i][j] = acc;
            }
        }
        out
    }

    pub fn max_width(&self) -> f64 {
        self.hull().iter().fold(0.0, |w, c| w.max(c.width()))
    }
}

/// Result of resolving a transversal crossing of `{y = 0}`.
#[derive(Clone, Debug)]
pub struct SectionHit {
    /// Crossing-time enclosure, valid for every trajectory of the set.
    pub t: Interval,
    /// Crossing state; the `y` component is exactly zero.
    pub q: IVec4,
    /// Variational matrix at the crossing time.
    pub dphi: IMat4,
    /// Section-projected differential `(I - f e_y^T / f_y) DPhi`.
    pub dp: IMat4,
}

impl SectionHit {
    /// Restriction of `dp` to the section coordinates `(x, px, py)`.
    pub fn dp3(&self) -> IMatrix {
        to_imatrix(&self.dp).submatrix(&[0, 2, 3], &[0, 2, 3])
    }
}

struct StepData {
    h: f64,
    /// Rough enclosure of all trajectories over the step window.
    window: IVec4,
    phi_m: IVec4,
    j: IMat4,
}

#[derive(Clone, Copy, Debug)]
pub struct RigorousFlow {
    pub mu: f64,
    pub order: usize,
    pub tol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl RigorousFlow {
    pub fn new(mu: f64) -> RigorousFlow {
        RigorousFlow {
            mu,
            order: 20,
            tol: 1e-15,
            h_max: 0.02,
            max_steps: 200_000,
        }
    }

    fn heuristic_h(&self, m: [f64; DIM]) -> f64 {
        let mut te = TaylorExpansion::new(m, self.mu, None);
        te.extend_to(self.order);
        let p = te.order();
        let top = te.state[p].iter().fold(0.0f64, |w, c| w.max(c.abs()));
        let h = if top > 0.0 {
            0.8 * (self.tol / top).powf(1.0 / p as f64)
        } else {
            self.h_max
        };
        h.clamp(1e-9, self.h_max)
    }

    /// Picard rough enclosure: a box `Z` with `X + window f(Z)` contained in
    /// `Z`; the returned refinement contains every trajectory of `X` over
    /// the time window.
    fn rough_enclosure(&self, x: &IVec4, window: Interval) -> Result<IVec4> {
        let f0 = vector_field(x, self.mu);
        let mut z: IVec4 =
            std::array::from_fn(|i| (x[i] + window * f0[i]).inflate(1e-14 + 1e-3 * x[i].width()));
        for _ in 0..30 {
            check_collision(&z, self.mu)?;
            let fz = vector_field(&z, self.mu);
            let t: IVec4 = std::array::from_fn(|i| x[i] + window * fz[i]);
            if (0..DIM).all(|i| t[i].subset(&z[i])) {
                return Ok(t);
            }
            z = std::array::from_fn(|i| t[i].hull(&z[i]).inflate(1e-14 + 0.1 * t[i].width()));
        }
        Err(LibrateError::StepFailure(format!(
            "Picard enclosure did not stabilize over window {window}"
        )))
    }

    /// Rough enclosure for the one-step variational matrix: `W` with
    /// `I + window Df(Y) W` contained in `W`.
    fn rough_var(&self, y: &IVec4, window: Interval) -> Result<IMat4> {
        let df = vector_field_jacobian(y, self.mu);
        let mut w = imat_identity();
        for i in 0..DIM {
            for j in 0..DIM {
                w[i][j] = w[i][j].inflate(1e-12);
            }
        }
        for _ in 0..30 {
            let dfw = imat_mul(&df, &w);
            let mut t = imat_identity();
            let mut inside = true;
            for i in 0..DIM {
                for j in 0..DIM {
                    t[i][j] = t[i][j] + window * dfw[i][j];
                    inside &= t[i][j].subset(&w[i][j]);
                }
            }
            if inside {
                return Ok(t);
            }
            for i in 0..DIM {
                for j in 0..DIM {
                    w[i][j] = t[i][j].hull(&w[i][j]).inflate(1e-12 + 0.2 * t[i][j].width());
                }
            }
        }
        Err(LibrateError::StepFailure(
            "variational Picard enclosure did not stabilize".into(),
        ))
    }

    /// One validated Taylor step of size `h` from hull `x`; fails (so the
    /// caller can shrink `h`) if the rough enclosures do not stabilize.
    fn attempt(&self, m: [f64; DIM], x: &IVec4, h: f64) -> Result<StepData> {
        let window = Interval::new(0.0, h);
        let y = self.rough_enclosure(x, window)?;
        let w_rough = self.rough_var(&y, window)?;
        let p = self.order;
        let hi = Interval::point(h);
        let hp1 = hi.powi((p + 1) as i32);

        let mut te_y = TaylorExpansion::new(y, self.mu, Some(w_rough));
        te_y.extend_to(p + 1);

        let mut te_m = TaylorExpansion::new(m.map(Interval::point), self.mu, None);
        te_m.extend_to(p);
        let mut phi_m = te_m.eval_state(&hi);
        for i in 0..DIM {
            phi_m[i] = phi_m[i] + te_y.state[p + 1][i] * hp1;
        }

        let mut te_x = TaylorExpansion::new(*x, self.mu, Some(imat_identity()));
        te_x.extend_to(p);
        let mut j = te_x.eval_var(&hi);
        let vr = &te_y.var.as_ref().unwrap()[p + 1];
        for a in 0..DIM {
            for b in 0..DIM {
                j[a][b] = j[a][b] + vr[a][b] * hp1;
            }
        }
        Ok(StepData {
            h,
            window: y,
            phi_m,
            j,
        })
    }

    /// Commits a successful step to the set representation.
    fn commit(&self, set: &mut LohnerSet, sd: &StepData) -> Result<()> {
        let a = imat_mul_f64(&sd.j, &set.c);
        let m_new: [f64; DIM] = std::array::from_fn(|i| sd.phi_m[i].mid());
        let dm: IVec4 = std::array::from_fn(|i| sd.phi_m[i] - Interval::point(m_new[i]));
        let weights: [f64; DIM] = std::array::from_fn(|j| set.r[j].width().max(1e-300));
        let q_new = qr_frame(&imat_mid(&a), &weights);
        let binv = inv_enclosure(&q_new)?;
        let ba = imat_mul(&binv, &a);
        let mut r_new = imat_vec(&ba, &set.r);
        let bdm = imat_vec(&binv, &dm);
        for i in 0..DIM {
            r_new[i] = r_new[i] + bdm[i];
        }

        let jp = imat_mul_f64(&sd.j, &set.vp);
        let p_new = imat_mid(&jp);
        let jq = imat_mul_f64(&sd.j, &set.vq);
        let vweights: [f64; DIM] = std::array::from_fn(|j| {
            (0..DIM)
                .map(|k| set.vs[j][k].width())
                .fold(0.0f64, f64::max)
                .max(1e-300)
        });
        let vq_new = qr_frame(&imat_mid(&jq), &vweights);
        let bv = inv_enclosure(&vq_new)?;
        let term1 = imat_mul(&bv, &imat_sub_f64(&jp, &p_new));
        let term2 = imat_mul(&imat_mul(&bv, &jq), &set.vs);
        let mut vs_new = term1;
        for i in 0..DIM {
            for j in 0..DIM {
                vs_new[i][j] = vs_new[i][j] + term2[i][j];
            }
        }

        set.m = m_new;
        set.c = q_new;
        set.r = r_new;
        set.vp = p_new;
        set.vq = vq_new;
        set.vs = vs_new;
        set.t = set.t + Interval::point(sd.h);
        Ok(())
    }

    /// Takes one step of size at most `h_cap`; returns the step data (the
    /// set is already advanced).
    fn step(&self, set: &mut LohnerSet, h_cap: f64) -> Result<StepData> {
        let x = set.hull();
        check_collision(&x, self.mu)?;
        let mut h = self.heuristic_h(set.m).min(h_cap);
        let mut last_err = None;
        for _ in 0..40 {
            match self.attempt(set.m, &x, h) {
                Ok(sd) => {
                    self.commit(set, &sd)?;
                    return Ok(sd);
                }
                Err(e) => {
                    last_err = Some(e);
                    h *= 0.5;
                }
            }
        }
        Err(last_err.unwrap())
    }

    /// Flows the set for exactly time `t` (an f64, taken as an exact dyadic
    /// duration).
    pub fn flow_time(&self, set: &mut LohnerSet, t: f64) -> Result<()> {
        assert!(t >= 0.0);
        let mut remaining = t;
        for _ in 0..self.max_steps {
            if remaining == 0.0 {
                return Ok(());
            }
            let sd = self.step(set, remaining)?;
            remaining -= sd.h;
        }
        Err(LibrateError::StepFailure("step budget exhausted".into()))
    }

    /// Rough enclosure of the current set over `[-dt, dt]`, together with a
    /// rough variational enclosure on the same window.
    pub fn window_enclosure(&self, set: &LohnerSet, dt: f64) -> Result<(IVec4, IMat4)> {
        let x = set.hull();
        let window = Interval::centered(0.0, dt);
        let e = self.rough_enclosure(&x, window)?;
        let w = self.rough_var(&e, window)?;
        Ok((e, w))
    }

    /// Flows to the `n`-th transversal crossing of `{y = 0}`, advancing the
    /// set onto the section (the crossing is resolved by a mean-value
    /// correction; the returned hit carries the certified crossing time,
    /// state, and differentials).  Rigorous for the whole set: every step
    /// window either keeps `y` sign-definite or has sign-definite `ydot`.
    pub fn poincare(&self, set: &mut LohnerSet, n: usize) -> Result<SectionHit> {
        assert!(n >= 1);
        let fl = Flow64 {
            mu: self.mu,
            order: self.order,
            tol: 1e-14,
        };
        let mut crossings = 0usize;
        // strict sign of y for all trajectories; from the section, the sign
        // of ydot
        let start = set.hull();
        let mut cur_sign = if start[1].lo() > 0.0 {
            1
        } else if start[1].hi() < 0.0 {
            -1
        } else {
            let yd = start[3] - start[0];
            if yd.lo() > 0.0 {
                1
            } else if yd.hi() < 0.0 {
                -1
            } else {
                return Err(LibrateError::SectionFailure(
                    "start set is tangent to the section".into(),
                ));
            }
        };
        let mut landing: Option<f64> = None; // remaining time to predicted hit
        for _ in 0..self.max_steps {
            if landing.is_none() && crossings == n - 1 {
                let (t_rem, _, _) = fl.to_section(set.m, 1);
                landing = Some(t_rem);
            }
            if let Some(rem) = landing {
                if rem == 0.0 {
                    return self.resolve_crossing(set, crossings, n, cur_sign);
                }
            }
            let cap = landing.unwrap_or(f64::INFINITY);
            let sd = self.step(set, cap)?;
            if let Some(rem) = landing.as_mut() {
                *rem -= sd.h;
            }
            let y_win = sd.window[1];
            let y_end = set.hull()[1];
            if y_win.lo() > 0.0 || y_win.hi() < 0.0 {
                // no trajectory touches the section in this window
                continue;
            }
            let yd = sd.window[3] - sd.window[0];
            if !(yd.lo() > 0.0 || yd.hi() < 0.0) {
                return Err(LibrateError::SectionFailure(
                    "y and ydot both straddle zero over a step window".into(),
                ));
            }
            if y_end.lo() > 0.0 && cur_sign < 0 {
                crossings += 1;
                cur_sign = 1;
            } else if y_end.hi() < 0.0 && cur_sign > 0 {
                crossings += 1;
                cur_sign = -1;
            }
            if crossings > n {
                return Err(LibrateError::SectionFailure(
                    "overshot the requested crossing".into(),
                ));
            }
        }
        Err(LibrateError::StepFailure("step budget exhausted".into()))
    }

    /// The set's midpoint sits (approximately) on the section and every
    /// trajectory crosses within a small window around now.
    fn resolve_crossing(
        &self,
        set: &mut LohnerSet,
        crossings: usize,
        n: usize,
        cur_sign: i32,
    ) -> Result<SectionHit> {
        if crossings != n - 1 {
            return Err(LibrateError::SectionFailure(format!(
                "expected {} prior crossings, counted {crossings}",
                n - 1
            )));
        }
        let x1 = set.hull();
        let mut dt = (4.0 * x1[1].mag().max(x1[1].width())).max(1e-9);
        for _ in 0..60 {
            let (e, w) = match self.window_enclosure(set, dt) {
                Ok(v) => v,
                Err(_) => {
                    dt *= 0.5;
                    continue;
                }
            };
            let yd = e[3] - e[0];
            if !(yd.lo() > 0.0 || yd.hi() < 0.0) {
                return Err(LibrateError::SectionFailure(
                    "ydot not sign-definite at crossing".into(),
                ));
            }
            // the crossing must be in the direction the counter expects
            let expect = if cur_sign > 0 { -1.0 } else { 1.0 };
            let _ = expect; // direction is implied by yd's sign and y1
            let dtau = match (-x1[1]).checked_div(&yd) {
                Ok(v) => v,
                Err(_) => {
                    return Err(LibrateError::SectionFailure(
                        "degenerate ydot at crossing".into(),
                    ))
                }
            };
            if !dtau.subset(&Interval::centered(0.0, dt)) {
                dt *= 2.0;
                if dt > 1.0 {
                    return Err(LibrateError::SectionFailure(
                        "crossing window failed to bracket".into(),
                    ));
                }
                continue;
            }
            let f_e = vector_field(&e, self.mu);
            // q(xi) = x(xi) - (f(E)/ydot) y(xi) applied through the frame
            // {m + C r}: the set is elongated along the flow direction at the
            // crossing, and the near-cancellation between x(xi) and the time
            // correction must happen inside the matrix entries, not between
            // two wide hull intervals.
            let g: IVec4 = std::array::from_fn(|i| f_e[i] / yd);
            let mut q: IVec4 = std::array::from_fn(|i| {
                let mut acc = Interval::point(set.m[i]) - g[i].scale(set.m[1]);
                for j in 0..DIM {
                    let pij = Interval::point(set.c[i][j]) - g[i].scale(set.c[1][j]);
                    acc = acc + pij * set.r[j];
                }
                acc
            });
            q[1] = Interval::ZERO;
            // DPhi at the (point-dependent) crossing time:
            // DPhi_{t1+dtau} = (I + dtau Df(E) W) DPhi_{t1}
            let df_e = vector_field_jacobian(&e, self.mu);
            let dfw = imat_mul(&df_e, &w);
            let mut shift = imat_identity();
            for i in 0..DIM {
                for j in 0..DIM {
                    shift[i][j] = shift[i][j] + dtau * dfw[i][j];
                }
            }
            let dphi = imat_mul(&shift, &set.var_hull());
            let fq = vector_field(&q, self.mu);
            let fy = fq[1];
            if fy.contains(0.0) {
                return Err(LibrateError::SectionFailure(
                    "flow tangent to section at crossing point".into(),
                ));
            }
            let mut proj = imat_identity();
            for i in 0..DIM {
                proj[i][1] = proj[i][1] - fq[i] / fy;
            }
            // dp through the doubleton V = P + Q S: the projection collapses
            // the flow-aligned bulk of V, and the collapse must act on the
            // point factors P and Q before the wide S widths are multiplied
            // in, so dp = (proj shift) P + ((proj shift) Q) S.
            let ps = imat_mul(&proj, &shift);
            let psp = imat_mul_f64(&ps, &set.vp);
            let psq = imat_mul_f64(&ps, &set.vq);
            let psqs = imat_mul(&psq, &set.vs);
            let dp: IMat4 = std::array::from_fn(|i| {
                std::array::from_fn(|j| psp[i][j] + psqs[i][j])
            });
            return Ok(SectionHit {
                t: set.t + dtau,
                q,
                dphi,
                dp,
            });
        }
        Err(LibrateError::SectionFailure(
            "could not resolve crossing window".into(),
        ))
    }
}
