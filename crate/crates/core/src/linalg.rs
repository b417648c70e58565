//! Real sparse matrices and the linear solvers used by the Newton iteration.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Real matrix in compressed sparse row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            vals.push(v);
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out[i * self.cols + j] = v;
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot column {0})")]
    Singular(usize),
    #[error("dimension mismatch")]
    Dimension,
}

/// Solves `A x = b` in place. Implementations may keep factorization buffers
/// between calls.
pub trait LinearSolver {
    fn solve(&mut self, a: &SparseMatrix, b: &mut [f64]) -> Result<(), LinalgError>;
}

/// Dense LU with partial pivoting. Adequate for networks of a few hundred buses.
#[derive(Debug, Default, Clone)]
pub struct DenseLu {
    work: Vec<f64>,
}

impl LinearSolver for DenseLu {
    fn solve(&mut self, a: &SparseMatrix, b: &mut [f64]) -> Result<(), LinalgError> {
        let n = a.rows();
        if a.cols() != n || b.len() != n {
            return Err(LinalgError::Dimension);
        }
        self.work.clear();
        self.work.resize(n * n, 0.0);
        for i in 0..n {
            for (j, v) in a.row(i) {
                self.work[i * n + j] = v;
            }
        }
        let m = &mut self.work;
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, m[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pval > scale * 1e-14) {
                return Err(LinalgError::Singular(k));
            }
            if piv != k {
                for j in 0..n {
                    m.swap(k * n + j, piv * n + j);
                }
                b.swap(k, piv);
            }
            let d = m[k * n + k];
            for i in (k + 1)..n {
                let f = m[i * n + k] / d;
                if f == 0.0 {
                    continue;
                }
                m[i * n + k] = f;
                for j in (k + 1)..n {
                    m[i * n + j] -= f * m[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..n {
                s -= m[i * n + j] * b[j];
            }
            b[i] = s / m[i * n + i];
        }
        Ok(())
    }
}

/// Largest absolute entry; NaN if any entry is NaN.
pub fn norm_inf(x: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for v in x {
        if v.is_nan() {
            return f64::NAN;
        }
        m = m.max(v.abs());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn lu_solves_with_pivoting() {
        // first pivot is zero, forcing a row swap
        let a = SparseMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 1, 2.0),
                (0, 2, 1.0),
                (1, 0, 1.0),
                (1, 1, 1.0),
                (2, 0, 3.0),
                (2, 2, -1.0),
            ],
        );
        let x = [1.0, -2.0, 0.5];
        let mut b = a.mul_vec(&x);
        DenseLu::default().solve(&a, &mut b).unwrap();
        for (u, v) in b.iter().zip(x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_detected() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)]);
        let mut b = vec![1.0, 2.0];
        assert!(matches!(
            DenseLu::default().solve(&a, &mut b),
            Err(LinalgError::Singular(_))
        ));
    }

    #[test]
    fn norm_propagates_nan() {
        assert!(norm_inf(&[1.0, f64::NAN]).is_nan());
        assert_eq!(norm_inf(&[1.0, -3.0]), 3.0);
    }
}
