//! Truncated univariate power series with f64 coefficients.
//!
//! Used as the scalar type when transporting a polynomial curve of initial
//! conditions through the flow (chart fitting), and for the chart
//! polynomials themselves.

use crate::scalar::Scalar;

/// Power series truncated at a fixed degree: coefficients `c[0] + c[1] s + ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyJet {
    pub c: Vec<f64>,
}

impl PolyJet {
    pub fn constant(x: f64, deg: usize) -> PolyJet {
        let mut c = vec![0.0; deg + 1];
        c[0] = x;
        PolyJet { c }
    }

    /// The series `x0 + s`.
    pub fn variable(x0: f64, deg: usize) -> PolyJet {
        let mut c = vec![0.0; deg + 1];
        c[0] = x0;
        if deg >= 1 {
            c[1] = 1.0;
        }
        PolyJet { c }
    }

    pub fn from_coeffs(c: Vec<f64>) -> PolyJet {
        PolyJet { c }
    }

    pub fn deg(&self) -> usize {
        self.c.len() - 1
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &ck| acc * s + ck)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.c.get(k).copied().unwrap_or(0.0)
    }

    fn binop(&self, rhs: &PolyJet, f: impl Fn(f64, f64) -> f64) -> PolyJet {
        let n = self.c.len().max(rhs.c.len());
        let c = (0..n).map(|k| f(self.coeff(k), rhs.coeff(k))).collect();
        PolyJet { c }
    }
}

impl Scalar for PolyJet {
    fn from_f64(x: f64) -> Self {
        // Degree is fixed by context; a bare constant stays degree 0 and
        // broadcasts against any operand length.
        PolyJet { c: vec![x] }
    }

    fn zero() -> Self {
        PolyJet { c: vec![0.0] }
    }

    fn one() -> Self {
        PolyJet { c: vec![1.0] }
    }

    fn add(&self, rhs: &Self) -> Self {
        self.binop(rhs, |a, b| a + b)
    }

    fn sub(&self, rhs: &Self) -> Self {
        self.binop(rhs, |a, b| a - b)
    }

    fn mul(&self, rhs: &Self) -> Self {
        let n = self.c.len().max(rhs.c.len());
        let mut c = vec![0.0; n];
        for i in 0..self.c.len() {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..rhs.c.len() {
                if i + j < n {
                    c[i + j] += self.c[i] * rhs.c[j];
                }
            }
        }
        PolyJet { c }
    }

    fn div(&self, rhs: &Self) -> Self {
        let n = self.c.len().max(rhs.c.len());
        let b0 = rhs.coeff(0);
        assert!(b0 != 0.0, "series division by series with zero constant term");
        let mut c = vec![0.0; n];
        for k in 0..n {
            let mut s = self.coeff(k);
            for j in 0..k {
                s -= c[j] * rhs.coeff(k - j);
            }
            c[k] = s / b0;
        }
        PolyJet { c }
    }

    fn neg(&self) -> Self {
        PolyJet {
            c: self.c.iter().map(|x| -x).collect(),
        }
    }

    fn sqrt(&self) -> Self {
        let a0 = self.coeff(0);
        assert!(a0 > 0.0, "series sqrt needs positive constant term");
        let n = self.c.len();
        let mut s = vec![0.0; n];
        s[0] = a0.sqrt();
        for k in 1..n {
            let mut acc = self.coeff(k);
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / (2.0 * s[0]);
        }
        PolyJet { c: s }
    }

    fn scale(&self, k: f64) -> Self {
        PolyJet {
            c: self.c.iter().map(|x| x * k).collect(),
        }
    }

    fn approx(&self) -> f64 {
        self.coeff(0)
    }

    fn bound(&self) -> f64 {
        self.c.iter().map(|x| x.abs()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_div_round_trip() {
        let a = PolyJet::from_coeffs(vec![1.0, 2.0, 3.0, 4.0]);
        let b = PolyJet::from_coeffs(vec![2.0, -1.0, 0.5, 0.0]);
        let q = a.mul(&b).div(&b);
        for k in 0..4 {
            assert!((q.coeff(k) - a.coeff(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn sqrt_squares() {
        let a = PolyJet::from_coeffs(vec![4.0, 1.0, 0.3, -0.2]);
        let s = a.sqrt();
        let back = s.mul(&s);
        for k in 0..4 {
            assert!((back.coeff(k) - a.coeff(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_against_binomial() {
        // (1 + s)^(-3/2) = 1/( (1+s) * sqrt(1+s) ): check first coefficients
        let u = PolyJet::from_coeffs(vec![1.0, 1.0, 0.0, 0.0]);
        let w = PolyJet::one().div(&u.mul(&u.sqrt()));
        let expect = [1.0, -1.5, 15.0 / 8.0, -35.0 / 16.0];
        for k in 0..4 {
            assert!((w.coeff(k) - expect[k]).abs() < 1e-12, "k={k}: {}", w.coeff(k));
        }
    }
}
