//! Exact rational linear algebra for the small integer systems behind the
//! affine parametrizations.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().expect("rational is finite")
}

/// A dense row-major rational matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Q>,
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Q::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Q) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, other: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, other.rows);
        QMatrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(Q::zero(), |acc, k| acc + &self[(i, k)] * &other[(k, j)])
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> QMatrix {
        QMatrix::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)].clone())
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| to_f64(&self[(i, j)]))
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            self.swap_rows(p, r);
            let inv = self[(r, c)].recip();
            for j in c..self.cols {
                let v = &self[(r, j)] * &inv;
                self[(r, j)] = v;
            }
            for i in 0..self.rows {
                if i == r || self[(i, c)].is_zero() {
                    continue;
                }
                let f = self[(i, c)].clone();
                for j in c..self.cols {
                    let v = &self[(r, j)] * &f;
                    self[(i, j)] -= v;
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of the right kernel as the columns of a `cols x k` matrix, one
    /// column per free variable (that variable set to 1, other free ones 0).
    pub fn nullspace(&self) -> QMatrix {
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut out = QMatrix::zeros(self.cols, free.len());
        for (k, &f) in free.iter().enumerate() {
            out[(f, k)] = Q::one();
            for (r, &p) in pivots.iter().enumerate() {
                out[(p, k)] = -m[(r, f)].clone();
            }
        }
        out
    }

    /// Inverse of a square matrix, `None` when singular.
    pub fn inverse(&self) -> Option<QMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = QMatrix::from_fn(n, 2 * n, |i, j| {
            if j < n {
                self[(i, j)].clone()
            } else if j - n == i {
                Q::one()
            } else {
                Q::zero()
            }
        });
        let pivots = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(QMatrix::from_fn(n, n, |i, j| aug[(i, j + n)].clone()))
    }

    /// Greedy row selection: scan rows in order and keep each row that
    /// raises the rank of the kept set.
    pub fn greedy_independent_rows(&self) -> Vec<usize> {
        let mut kept: Vec<usize> = Vec::new();
        let mut echelon = QMatrix::zeros(0, self.cols);
        for i in 0..self.rows {
            let mut trial = echelon.clone();
            trial.rows += 1;
            trial.data.extend_from_slice(self.row(i));
            let piv = trial.rref();
            if piv.len() > kept.len() {
                kept.push(i);
                trial.rows = piv.len();
                trial.data.truncate(piv.len() * self.cols);
                echelon = trial;
            }
        }
        kept
    }

    pub fn max_abs(&self) -> Q {
        self.data.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero)
    }
}

impl std::ops::Index<(usize, usize)> for QMatrix {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for QMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_ints(rows: usize, cols: usize, v: &[i64]) -> QMatrix {
        QMatrix::from_fn(rows, cols, |i, j| q(v[i * cols + j]))
    }

    #[test]
    fn rref_and_rank() {
        let m = from_ints(3, 3, &[1, 2, 3, 2, 4, 6, 1, 0, 1]);
        assert_eq!(m.rank(), 2);
        let mut r = m.clone();
        assert_eq!(r.rref(), vec![0, 1]);
        assert_eq!(r.row(0), &[q(1), q(0), q(1)]);
        assert_eq!(r.row(1), &[q(0), q(1), q(1)]);
    }

    #[test]
    fn nullspace_annihilates() {
        let m = from_ints(2, 4, &[1, 1, 1, 1, 0, 1, -1, 2]);
        let k = m.nullspace();
        assert_eq!(k.cols, 2);
        assert!(m.mul(&k).data.iter().all(|x| x.is_zero()));
        assert_eq!(from_ints(2, 2, &[1, 0, 0, 1]).nullspace().cols, 0);
    }

    #[test]
    fn inverse_exact() {
        let m = from_ints(2, 2, &[2, 1, 1, 1]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), QMatrix::identity(2));
        assert!(from_ints(2, 2, &[1, 2, 2, 4]).inverse().is_none());
        let third = QMatrix::from_fn(1, 1, |_, _| q_frac(1, 3));
        assert_eq!(third.inverse().unwrap()[(0, 0)], q(3));
    }

    #[test]
    fn greedy_rows() {
        let m = from_ints(4, 2, &[1, 1, 2, 2, 0, 1, 5, 5]);
        assert_eq!(m.greedy_independent_rows(), vec![0, 2]);
    }
}
