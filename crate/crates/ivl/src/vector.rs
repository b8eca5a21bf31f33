//! Interval vectors and matrices (boxes and enclosures of matrix sets).

use crate::Interval;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IVector(pub Vec<Interval>);

impl IVector {
    pub fn zeros(n: usize) -> IVector {
        IVector(vec![Interval::ZERO; n])
    }

    pub fn from_points(xs: &[f64]) -> IVector {
        IVector(xs.iter().map(|&x| Interval::point(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mid(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.mid()).collect()
    }

    pub fn subset(&self, other: &IVector) -> bool {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).all(|(a, b)| a.subset(b))
    }

    pub fn interior_subset(&self, other: &IVector) -> bool {
        assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .all(|(a, b)| a.interior_subset(b))
    }

    pub fn hull(&self, other: &IVector) -> IVector {
        assert_eq!(self.len(), other.len());
        IVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.hull(b))
                .collect(),
        )
    }

    pub fn meet(&self, other: &IVector) -> Option<IVector> {
        assert_eq!(self.len(), other.len());
        let mut out = Vec::with_capacity(self.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            let m = a.meet(b);
            if m.is_empty() {
                return None;
            }
            out.push(m);
        }
        Some(IVector(out))
    }

    pub fn max_width(&self) -> f64 {
        self.0.iter().map(|x| x.width()).fold(0.0, f64::max)
    }

    /// Euclidean norm upper bound.
    pub fn norm_mag(&self) -> f64 {
        let mut s = Interval::ZERO;
        for x in &self.0 {
            s = s + x.sqr();
        }
        s.sqrt().hi()
    }

    pub fn inflate(&self, eps: f64) -> IVector {
        IVector(self.0.iter().map(|x| x.inflate(eps)).collect())
    }
}

impl Index<usize> for IVector {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl IndexMut<usize> for IVector {
    fn index_mut(&mut self, i: usize) -> &mut Interval {
        &mut self.0[i]
    }
}

impl Add for &IVector {
    type Output = IVector;
    fn add(self, rhs: &IVector) -> IVector {
        assert_eq!(self.len(), rhs.len());
        IVector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a + b).collect())
    }
}

impl Sub for &IVector {
    type Output = IVector;
    fn sub(self, rhs: &IVector) -> IVector {
        assert_eq!(self.len(), rhs.len());
        IVector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a - b).collect())
    }
}

impl Neg for &IVector {
    type Output = IVector;
    fn neg(self) -> IVector {
        IVector(self.0.iter().map(|&a| -a).collect())
    }
}

/// Dense interval matrix, row major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IMatrix {
    pub fn zeros(rows: usize, cols: usize) -> IMatrix {
        IMatrix {
            rows,
            cols,
            data: vec![Interval::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> IMatrix {
        let mut m = IMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Interval::ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Interval>]) -> IMatrix {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        IMatrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_f64_rows(rows: &[Vec<f64>]) -> IMatrix {
        IMatrix::from_rows(
            &rows
                .iter()
                .map(|r| r.iter().map(|&x| Interval::point(x)).collect())
                .collect::<Vec<_>>(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mid(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].mid()).collect())
            .collect()
    }

    pub fn transpose(&self) -> IMatrix {
        let mut out = IMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matvec(&self, v: &IVector) -> IVector {
        assert_eq!(self.cols, v.len());
        let mut out = IVector::zeros(self.rows);
        for i in 0..self.rows {
            let mut s = Interval::ZERO;
            for j in 0..self.cols {
                s = s + self[(i, j)] * v[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn matmul(&self, other: &IMatrix) -> IMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = IMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut s = Interval::ZERO;
                for k in 0..self.cols {
                    s = s + self[(i, k)] * other[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    pub fn hull(&self, other: &IMatrix) -> IMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        IMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.hull(b))
                .collect(),
        }
    }

    pub fn subset(&self, other: &IMatrix) -> bool {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .all(|(a, b)| a.subset(b))
    }

    pub fn max_width(&self) -> f64 {
        self.data.iter().map(|x| x.width()).fold(0.0, f64::max)
    }

    pub fn col(&self, j: usize) -> IVector {
        IVector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn row(&self, i: usize) -> IVector {
        IVector((0..self.cols).map(|j| self[(i, j)]).collect())
    }

    pub fn set_col(&mut self, j: usize, v: &IVector) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    /// Keep only the listed rows and columns.
    pub fn submatrix(&self, keep_rows: &[usize], keep_cols: &[usize]) -> IMatrix {
        let mut out = IMatrix::zeros(keep_rows.len(), keep_cols.len());
        for (a, &i) in keep_rows.iter().enumerate() {
            for (b, &j) in keep_cols.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for IMatrix {
    type Output = Interval;
    fn index(&self, (i, j): (usize, usize)) -> &Interval {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Interval {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &IMatrix {
    type Output = IMatrix;
    fn add(self, rhs: &IMatrix) -> IMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        IMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &IMatrix {
    type Output = IMatrix;
    fn sub(self, rhs: &IMatrix) -> IMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        IMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl Mul<&IVector> for &IMatrix {
    type Output = IVector;
    fn mul(self, rhs: &IVector) -> IVector {
        self.matvec(rhs)
    }
}

impl Mul<&IMatrix> for &IMatrix {
    type Output = IMatrix;
    fn mul(self, rhs: &IMatrix) -> IMatrix {
        self.matmul(rhs)
    }
}
