//! Taylor coefficients of the flow and of its variational equations.
//!
//! The solution of `qdot = f(q)` is expanded as `q(t) = sum_k X_k t^k`; the
//! coefficients satisfy `X_{k+1} = f(X)_k / (k+1)`, where `f(X)_k` is the
//! order-`k` coefficient of the vector field composed with the truncated
//! series.  The gravitational terms `u^(-3/2)`, `u^(-5/2)` are propagated
//! with the standard power recurrence
//!
//! ```text
//! k u_0 w_k = sum_{j<k} (p (k - j) - j) u_{k-j} w_j,   w = u^p.
//! ```
//!
//! Variational coefficients are transported alongside:
//! `V_{k+1} = (1/(k+1)) sum_{j<=k} Df_j V_{k-j}` with `Df_j` the series
//! coefficients of the Jacobian along the solution.

use crate::model::DIM;
use crate::scalar::Scalar;

fn conv_at<S: Scalar>(a: &[S], b: &[S], k: usize) -> S {
    let mut acc = S::zero();
    for j in 0..=k {
        acc = acc.add(&a[j].mul(&b[k - j]));
    }
    acc
}

/// Extends `w = u^p` by one order, given `u` known through order `w.len()`.
fn extend_pow<S: Scalar>(w: &mut Vec<S>, u: &[S], p: f64) {
    let k = w.len();
    if k == 0 {
        let u0 = &u[0];
        // u^(-3/2) = 1/(u sqrt u); u^(-5/2) = u^(-3/2)/u
        let w0 = if p == -1.5 {
            S::one().div(&u0.mul(&u0.sqrt()))
        } else if p == -2.5 {
            S::one().div(&u0.mul(&u0).mul(&u0.sqrt()))
        } else {
            unreachable!("unsupported exponent {p}")
        };
        w.push(w0);
        return;
    }
    let mut acc = S::zero();
    for j in 0..k {
        let coef = p * (k - j) as f64 - j as f64;
        acc = acc.add(&u[k - j].mul(&w[j]).scale(coef));
    }
    let next = acc.div(&u[0].scale(k as f64));
    w.push(next);
}

/// Incrementally built Taylor expansion of a trajectory, optionally together
/// with a set of transported tangent vectors (columns of `var`).
pub struct TaylorExpansion<S> {
    pub mu: f64,
    /// `state[k]` is the order-`k` coefficient of the solution.
    pub state: Vec<[S; DIM]>,
    /// `var[k][i][j]`: order-`k` coefficient of the variational matrix.
    pub var: Option<Vec<[[S; DIM]; DIM]>>,
    // Series of the shifted abscissae and squared distances to the primaries.
    dx1: Vec<S>,
    dx2: Vec<S>,
    u1: Vec<S>,
    u2: Vec<S>,
    w1: Vec<S>,
    w2: Vec<S>,
    w1_5: Vec<S>,
    w2_5: Vec<S>,
    // Series of the Jacobian's non-constant entries, kept for the
    // variational recurrence.
    oxx: Vec<S>,
    oxy: Vec<S>,
    oyy: Vec<S>,
}

impl<S: Scalar> TaylorExpansion<S> {
    pub fn new(q0: [S; DIM], mu: f64, var0: Option<[[S; DIM]; DIM]>) -> Self {
        TaylorExpansion {
            mu,
            state: vec![q0],
            var: var0.map(|v| vec![v]),
            dx1: Vec::new(),
            dx2: Vec::new(),
            u1: Vec::new(),
            u2: Vec::new(),
            w1: Vec::new(),
            w2: Vec::new(),
            w1_5: Vec::new(),
            w2_5: Vec::new(),
            oxx: Vec::new(),
            oxy: Vec::new(),
            oyy: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.state.len() - 1
    }

    /// Computes auxiliary series at order `k` (state must be known there).
    fn extend_aux(&mut self, k: usize) {
        let xk = &self.state[k][0];
        self.dx1.push(if k == 0 {
            xk.sub(&S::from_f64(self.mu))
        } else {
            xk.clone()
        });
        self.dx2.push(if k == 0 {
            xk.add(&S::from_f64(1.0 - self.mu))
        } else {
            xk.clone()
        });
        let y: Vec<S> = self.state.iter().map(|s| s[1].clone()).collect();
        let yy_k = conv_at(&y, &y, k);
        self.u1.push(conv_at(&self.dx1, &self.dx1, k).add(&yy_k));
        self.u2.push(conv_at(&self.dx2, &self.dx2, k).add(&yy_k));
        extend_pow(&mut self.w1, &self.u1, -1.5);
        extend_pow(&mut self.w2, &self.u2, -1.5);
        if self.var.is_some() {
            extend_pow(&mut self.w1_5, &self.u1, -2.5);
            extend_pow(&mut self.w2_5, &self.u2, -2.5);
            // Omega_xx = 1 - (1-mu) w1 - mu w2 + 3 (1-mu) dx1^2 w1_5 + 3 mu dx2^2 w2_5
            let dx1sq_w: S = {
                let mut acc = S::zero();
                for j in 0..=k {
                    acc = acc.add(&conv_at(&self.dx1, &self.dx1, j).mul(&self.w1_5[k - j]));
                }
                acc
            };
            let dx2sq_w: S = {
                let mut acc = S::zero();
                for j in 0..=k {
                    acc = acc.add(&conv_at(&self.dx2, &self.dx2, j).mul(&self.w2_5[k - j]));
                }
                acc
            };
            let one_k = if k == 0 { S::one() } else { S::zero() };
            let base = one_k
                .sub(&self.w1[k].scale(1.0 - self.mu))
                .sub(&self.w2[k].scale(self.mu));
            self.oxx.push(
                base.add(&dx1sq_w.scale(3.0 * (1.0 - self.mu)))
                    .add(&dx2sq_w.scale(3.0 * self.mu)),
            );
            let dx1y_w: S = {
                let mut acc = S::zero();
                for j in 0..=k {
                    acc = acc.add(&conv_at(&self.dx1, &y, j).mul(&self.w1_5[k - j]));
                }
                acc
            };
            let dx2y_w: S = {
                let mut acc = S::zero();
                for j in 0..=k {
                    acc = acc.add(&conv_at(&self.dx2, &y, j).mul(&self.w2_5[k - j]));
                }
                acc
            };
            self.oxy
                .push(dx1y_w.scale(3.0 * (1.0 - self.mu)).add(&dx2y_w.scale(3.0 * self.mu)));
            let yy_w1: S = {
                let mut acc = S::zero();
                for j in 0..=k {
                    acc = acc.add(&conv_at(&y, &y, j).mul(&self.w1_5[k - j]));
                }
                acc
            };
            let yy_w2: S = {
                let mut acc = S::zero();
                for j in 0..=k {
                    acc = acc.add(&conv_at(&y, &y, j).mul(&self.w2_5[k - j]));
                }
                acc
            };
            let base_y = one_k
                .sub(&self.w1[k].scale(1.0 - self.mu))
                .sub(&self.w2[k].scale(self.mu));
            self.oyy.push(
                base_y
                    .add(&yy_w1.scale(3.0 * (1.0 - self.mu)))
                    .add(&yy_w2.scale(3.0 * self.mu)),
            );
        }
    }

    /// Order-`k` coefficient of the vector field along the series.
    fn field_coeff(&self, k: usize) -> [S; DIM] {
        let s = &self.state[k];
        let [x, y, px, py] = s;
        // Omega_x = x - (1-mu) dx1 w1 - mu dx2 w2; Omega_y = y (1 - ...) analog
        let dx1_w1 = conv_at(&self.dx1, &self.w1, k);
        let dx2_w2 = conv_at(&self.dx2, &self.w2, k);
        let yv: Vec<S> = self.state.iter().map(|st| st[1].clone()).collect();
        let y_w1 = conv_at(&yv, &self.w1, k);
        let y_w2 = conv_at(&yv, &self.w2, k);
        let ox = x
            .sub(&dx1_w1.scale(1.0 - self.mu))
            .sub(&dx2_w2.scale(self.mu));
        let oy = y.sub(&y_w1.scale(1.0 - self.mu)).sub(&y_w2.scale(self.mu));
        [
            px.add(y),
            py.sub(x),
            py.sub(x).add(&ox),
            px.add(y).neg().add(&oy),
        ]
    }

    /// Jacobian series coefficient at order `k` (requires variational mode).
    fn jac_coeff(&self, k: usize) -> [[S; DIM]; DIM] {
        let z = S::zero;
        let o = S::one;
        let one_k = if k == 0 { o() } else { z() };
        [
            [z(), one_k.clone(), one_k.clone(), z()],
            [one_k.neg(), z(), z(), one_k.clone()],
            [self.oxx[k].sub(&one_k), self.oxy[k].clone(), z(), one_k.clone()],
            [self.oxy[k].clone(), self.oyy[k].sub(&one_k), one_k.neg(), z()],
        ]
    }

    /// Adds one Taylor order to the state (and, if present, the variational
    /// matrix).
    pub fn extend(&mut self) {
        let k = self.order();
        self.extend_aux(k);
        let f_k = self.field_coeff(k);
        let inv = 1.0 / (k + 1) as f64;
        self.state
            .push([0usize, 1, 2, 3].map(|i| f_k[i].scale(inv)));
        if self.var.is_some() {
            let mut next = [[0; DIM]; DIM].map(|row| row.map(|_| S::zero()));
            for j in 0..=k {
                let df = self.jac_coeff(j);
                let v = &self.var.as_ref().unwrap()[k - j];
                for r in 0..DIM {
                    for c in 0..DIM {
                        let mut acc = next[r][c].clone();
                        for m in 0..DIM {
                            acc = acc.add(&df[r][m].mul(&v[m][c]));
                        }
                        next[r][c] = acc;
                    }
                }
            }
            for row in next.iter_mut() {
                for e in row.iter_mut() {
                    *e = e.scale(inv);
                }
            }
            self.var.as_mut().unwrap().push(next);
        }
    }

    pub fn extend_to(&mut self, order: usize) {
        while self.order() < order {
            self.extend();
        }
    }

    /// Horner evaluation of the state series at time `t`.
    pub fn eval_state(&self, t: &S) -> [S; DIM] {
        let mut acc = self.state.last().unwrap().clone();
        for k in (0..self.state.len() - 1).rev() {
            for i in 0..DIM {
                acc[i] = acc[i].mul(t).add(&self.state[k][i]);
            }
        }
        acc
    }

    /// Time derivative of the state series at `t` (the vector field along
    /// the truncated solution, short of the dropped order).
    pub fn eval_state_deriv(&self, t: &S) -> [S; DIM] {
        let n = self.state.len();
        let mut acc = self.state[n - 1].clone().map(|c| c.scale((n - 1) as f64));
        for k in (1..n - 1).rev() {
            for i in 0..DIM {
                acc[i] = acc[i].mul(t).add(&self.state[k][i].scale(k as f64));
            }
        }
        acc
    }

    /// Horner evaluation of the variational series at time `t`.
    pub fn eval_var(&self, t: &S) -> [[S; DIM]; DIM] {
        let var = self.var.as_ref().expect("variational mode not enabled");
        let mut acc = var.last().unwrap().clone();
        for k in (0..var.len() - 1).rev() {
            for r in 0..DIM {
                for c in 0..DIM {
                    acc[r][c] = acc[r][c].mul(t).add(&var[k][r][c]);
                }
            }
        }
        acc
    }
}

/// Convenience: state coefficients through `order` at `q0`.
pub fn state_taylor<S: Scalar>(q0: [S; DIM], mu: f64, order: usize) -> Vec<[S; DIM]> {
    let mut te = TaylorExpansion::new(q0, mu, None);
    te.extend_to(order);
    te.state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hamiltonian, vector_field, vector_field_jacobian, MU_DEFAULT};
    use ivl::Interval;

    const Q0: [f64; 4] = [-0.9510055339445208, 0.0, 0.0, -0.836804179646973];

    fn identity4() -> [[f64; 4]; 4] {
        let mut v = [[0.0; 4]; 4];
        for i in 0..4 {
            v[i][i] = 1.0;
        }
        v
    }

    /// Classic fixed-step RK4, used only as an independent cross-check.
    fn rk4(mut q: [f64; 4], t: f64, steps: usize) -> [f64; 4] {
        let h = t / steps as f64;
        for _ in 0..steps {
            let k1 = vector_field(&q, MU_DEFAULT);
            let q2: [f64; 4] = std::array::from_fn(|i| q[i] + 0.5 * h * k1[i]);
            let k2 = vector_field(&q2, MU_DEFAULT);
            let q3: [f64; 4] = std::array::from_fn(|i| q[i] + 0.5 * h * k2[i]);
            let k3 = vector_field(&q3, MU_DEFAULT);
            let q4: [f64; 4] = std::array::from_fn(|i| q[i] + h * k3[i]);
            let k4 = vector_field(&q4, MU_DEFAULT);
            for i in 0..4 {
                q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        q
    }

    #[test]
    fn low_order_coefficients_match_model() {
        let coeffs = state_taylor(Q0, MU_DEFAULT, 3);
        let f = vector_field(&Q0, MU_DEFAULT);
        for i in 0..4 {
            assert!((coeffs[1][i] - f[i]).abs() < 1e-14, "X_1[{i}]");
        }
        // X_2 = Df(q0) f(q0) / 2
        let jac = vector_field_jacobian(&Q0, MU_DEFAULT);
        for i in 0..4 {
            let dff: f64 = (0..4).map(|j| jac[i][j] * f[j]).sum();
            assert!((coeffs[2][i] - 0.5 * dff).abs() < 1e-13, "X_2[{i}]");
        }
    }

    #[test]
    fn series_agrees_with_rk4_over_short_time() {
        let mut te = TaylorExpansion::new(Q0, MU_DEFAULT, None);
        te.extend_to(20);
        for t in [0.01, 0.05, 0.1] {
            let a = te.eval_state(&t);
            let b = rk4(Q0, t, 4000);
            for i in 0..4 {
                assert!((a[i] - b[i]).abs() < 1e-11, "t={t} component {i}: {} vs {}", a[i], b[i]);
            }
        }
    }

    #[test]
    fn series_preserves_energy() {
        let mut te = TaylorExpansion::new(Q0, MU_DEFAULT, None);
        te.extend_to(20);
        let h0 = hamiltonian(&Q0, MU_DEFAULT);
        for t in [0.02, 0.08, 0.12] {
            let h = hamiltonian(&te.eval_state(&t), MU_DEFAULT);
            assert!((h - h0).abs() < 1e-13, "t={t}: dH = {}", h - h0);
        }
    }

    #[test]
    fn state_deriv_is_field_along_series() {
        let mut te = TaylorExpansion::new(Q0, MU_DEFAULT, None);
        te.extend_to(20);
        let t = 0.07;
        let q = te.eval_state(&t);
        let d = te.eval_state_deriv(&t);
        let f = vector_field(&q, MU_DEFAULT);
        for i in 0..4 {
            assert!((d[i] - f[i]).abs() < 1e-12, "component {i}");
        }
    }

    #[test]
    fn variational_matches_flow_finite_differences() {
        let mut te = TaylorExpansion::new(Q0, MU_DEFAULT, Some(identity4()));
        te.extend_to(20);
        let t = 0.1;
        let v = te.eval_var(&t);
        let eps = 1e-7;
        for j in 0..4 {
            let mut qp = Q0;
            let mut qm = Q0;
            qp[j] += eps;
            qm[j] -= eps;
            let mut tp = TaylorExpansion::new(qp, MU_DEFAULT, None);
            let mut tm = TaylorExpansion::new(qm, MU_DEFAULT, None);
            tp.extend_to(20);
            tm.extend_to(20);
            let a = tp.eval_state(&t);
            let b = tm.eval_state(&t);
            for i in 0..4 {
                let fd = (a[i] - b[i]) / (2.0 * eps);
                assert!((v[i][j] - fd).abs() < 1e-6, "({i},{j}): {} vs {}", v[i][j], fd);
            }
        }
    }

    #[test]
    fn variational_determinant_is_one() {
        let mut te = TaylorExpansion::new(Q0, MU_DEFAULT, Some(identity4()));
        te.extend_to(20);
        let v = te.eval_var(&0.1);
        // 4x4 determinant by cofactor expansion via LU-free elimination
        let mut m = v;
        let mut det = 1.0;
        for c in 0..4 {
            let p = (c..4).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
            if p != c {
                m.swap(p, c);
                det = -det;
            }
            det *= m[c][c];
            for r in c + 1..4 {
                let f = m[r][c] / m[c][c];
                for k in c..4 {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        assert!((det - 1.0).abs() < 1e-12, "det = {det}");
    }

    #[test]
    fn interval_series_contains_f64_series() {
        let coeffs_f = state_taylor(Q0, MU_DEFAULT, 12);
        let coeffs_i = state_taylor(Q0.map(Interval::point), MU_DEFAULT, 12);
        for k in 0..=12 {
            for i in 0..4 {
                assert!(
                    coeffs_i[k][i].contains(coeffs_f[k][i]),
                    "order {k} component {i}"
                );
                assert!(coeffs_i[k][i].width() < 1e-9 * coeffs_i[k][i].mag().max(1.0));
            }
        }
    }

    #[test]
    fn polyjet_series_coefficient_matches_variational() {
        use crate::poly::PolyJet;
        // Transport q0 + s e_x through the series; the linear-in-s part of
        // the time evaluation must match the first variational column.
        let q0p: [PolyJet; 4] = [
            PolyJet::variable(Q0[0], 2),
            PolyJet::constant(Q0[1], 2),
            PolyJet::constant(Q0[2], 2),
            PolyJet::constant(Q0[3], 2),
        ];
        let mut tp = TaylorExpansion::new(q0p, MU_DEFAULT, None);
        tp.extend_to(20);
        let t = PolyJet::constant(0.1, 2);
        let qs = tp.eval_state(&t);
        let mut tv = TaylorExpansion::new(Q0, MU_DEFAULT, Some(identity4()));
        tv.extend_to(20);
        let v = tv.eval_var(&0.1);
        for i in 0..4 {
            assert!((qs[i].coeff(1) - v[i][0]).abs() < 1e-10, "component {i}");
        }
    }
}
