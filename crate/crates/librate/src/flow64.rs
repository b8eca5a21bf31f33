//! Non-rigorous adaptive Taylor integration.
//!
//! Fast floating-point flow used for seeding: locating approximate Lyapunov
//! orbits, return times, eigenvectors and chart data.  Nothing here carries
//! proof value; every quantity produced by this module is re-verified by the
//! interval machinery before it enters a certificate.

use crate::jets::TaylorExpansion;
use crate::model::{vector_field, DIM};

#[derive(Clone, Copy, Debug)]
pub struct Flow64 {
    pub mu: f64,
    pub order: usize,
    pub tol: f64,
}

pub type Mat4 = [[f64; DIM]; DIM];

pub fn identity4() -> Mat4 {
    let mut v = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        v[i][i] = 1.0;
    }
    v
}

pub fn matmul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            c[i][j] = (0..DIM).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

impl Flow64 {
    pub fn new(mu: f64) -> Flow64 {
        Flow64 {
            mu,
            order: 20,
            tol: 1e-14,
        }
    }

    fn expansion(&self, q: [f64; DIM], var: Option<Mat4>) -> TaylorExpansion<f64> {
        let mut te = TaylorExpansion::new(q, self.mu, var);
        te.extend_to(self.order);
        te
    }

    /// Step size from the magnitude of the top coefficient.
    fn step_size(&self, te: &TaylorExpansion<f64>) -> f64 {
        let p = te.order();
        let top = te.state[p].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let h = if top > 0.0 {
            0.8 * (self.tol / top).powf(1.0 / p as f64)
        } else {
            0.5
        };
        h.clamp(1e-6, 0.5)
    }

    /// Flows for exactly time `t` (sign of `t` must be positive).
    pub fn flow(&self, q0: [f64; DIM], t: f64) -> [f64; DIM] {
        self.flow_var_opt(q0, t, None).0
    }

    pub fn flow_var(&self, q0: [f64; DIM], t: f64) -> ([f64; DIM], Mat4) {
        let (q, v) = self.flow_var_opt(q0, t, Some(identity4()));
        (q, v.unwrap())
    }

    fn flow_var_opt(
        &self,
        mut q: [f64; DIM],
        t: f64,
        mut var: Option<Mat4>,
    ) -> ([f64; DIM], Option<Mat4>) {
        assert!(t >= 0.0);
        let mut remaining = t;
        while remaining > 0.0 {
            let te = self.expansion(q, var);
            let h = self.step_size(&te).min(remaining);
            q = te.eval_state(&h);
            if var.is_some() {
                var = Some(te.eval_var(&h));
            }
            remaining -= h;
        }
        (q, var)
    }

    /// Integrates to the `n`-th transversal crossing of `y = 0` (either
    /// direction), returning the crossing time, state, and accumulated
    /// variational matrix.  A start on the section does not count as a
    /// crossing.
    pub fn to_section(&self, q0: [f64; DIM], n: usize) -> (f64, [f64; DIM], Mat4) {
        assert!(n >= 1);
        let mut q = q0;
        let mut var = identity4();
        let mut t_total = 0.0;
        let mut sign = if q[1] != 0.0 {
            q[1].signum()
        } else {
            // leaving the section: sign of ydot = py - x
            (q[3] - q[0]).signum()
        };
        let mut crossings = 0;
        for _ in 0..200_000 {
            let te = self.expansion(q, Some(var));
            let h = self.step_size(&te);
            let q_next = te.eval_state(&h);
            let s_next = if q_next[1] != 0.0 {
                q_next[1].signum()
            } else {
                sign
            };
            if s_next != sign && q_next[1] != 0.0 {
                crossings += 1;
                if crossings == n {
                    // Newton in time on y(tau) within [0, h]
                    let mut tau = h * q[1].abs() / (q[1].abs() + q_next[1].abs());
                    for _ in 0..50 {
                        let qs = te.eval_state(&tau);
                        let yd = qs[3] - qs[0];
                        let step = qs[1] / yd;
                        tau -= step;
                        if step.abs() < 1e-16 {
                            break;
                        }
                    }
                    let mut q_hit = te.eval_state(&tau);
                    q_hit[1] = 0.0;
                    return (t_total + tau, q_hit, te.eval_var(&tau));
                }
            }
            sign = s_next;
            q = q_next;
            var = te.eval_var(&h);
            t_total += h;
        }
        panic!("no section crossing found from {q0:?}");
    }

    /// Differential of the `y = 0` Poincare map in the full 4d coordinates:
    /// `DP = (I - f e2^T / f_y) DPhi` evaluated at the crossing.
    pub fn section_jacobian(&self, q_hit: [f64; DIM], var: &Mat4) -> Mat4 {
        let f = vector_field(&q_hit, self.mu);
        let mut proj = identity4();
        for i in 0..DIM {
            proj[i][1] -= f[i] / f[1];
        }
        matmul4(&proj, var)
    }

    /// 3x3 restriction of [`Self::section_jacobian`] to `(x, px, py)`.
    pub fn section_jacobian3(&self, q_hit: [f64; DIM], var: &Mat4) -> [[f64; 3]; 3] {
        let dp = self.section_jacobian(q_hit, var);
        let keep = [0usize, 2, 3];
        let mut out = [[0.0; 3]; 3];
        for (i, &r) in keep.iter().enumerate() {
            for (j, &c) in keep.iter().enumerate() {
                out[i][j] = dp[r][c];
            }
        }
        out
    }

    /// Newton-solves for `py` so that `(x0, 0, 0, py)` hits `px = 0` at its
    /// `n`-th section crossing — an approximately symmetric periodic seed.
    pub fn solve_symmetric_py(&self, x0: f64, py_guess: f64, n: usize) -> Option<f64> {
        let mut py = py_guess;
        for _ in 0..50 {
            let (_, q_hit, var) = self.to_section([x0, 0.0, 0.0, py], n);
            let dp = self.section_jacobian(q_hit, &var);
            let d = dp[2][3]; // d px_hit / d py_0
            if d == 0.0 {
                return None;
            }
            let step = q_hit[2] / d;
            py -= step;
            if step.abs() < 1e-15 {
                return Some(py);
            }
        }
        None
    }

    /// Local slope of the symmetric family through `(x0, py0)` in the
    /// `(x, py)` plane: `dpy/dx = -dP_21 / dP_23` for the half-return map.
    pub fn family_slope(&self, x0: f64, py0: f64, n: usize) -> f64 {
        let (_, q_hit, var) = self.to_section([x0, 0.0, 0.0, py0], n);
        let dp = self.section_jacobian(q_hit, &var);
        -dp[2][0] / dp[2][3]
    }
}
