//! Dense symmetric linear algebra: the storage type for Gram and Hessian
//! matrices, a jittered Cholesky solve and a sorted eigendecomposition.
//!
//! The factorizations themselves are delegated to `nalgebra`; this module
//! owns the contracts around them (jitter escalation, eigenvalue ordering and
//! the eigenvector sign convention).

use std::ops::Index;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// Relative tolerance used when validating symmetry of caller-supplied data.
const SYMMETRY_TOL: f64 = 1e-10;

/// Jitter escalations attempted after the first factorization fails.
const MAX_JITTER_ESCALATIONS: usize = 3;

/// A dense symmetric `n x n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSymMatrix", into = "RawSymMatrix")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TryFrom<RawSymMatrix> for SymMatrix {
    type Error = Error;
    fn try_from(raw: RawSymMatrix) -> Result<Self> {
        SymMatrix::new(raw.n, raw.data)
    }
}

impl From<SymMatrix> for RawSymMatrix {
    fn from(m: SymMatrix) -> Self {
        RawSymMatrix { n: m.n, data: m.data }
    }
}

impl SymMatrix {
    /// Wraps row-major data, checking that it is finite and symmetric.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        ensure_dim(n * n, data.len())?;
        ensure_finite(&data)?;
        for i in 0..n {
            for j in (i + 1)..n {
                let a = data[i * n + j];
                let b = data[j * n + i];
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SymMatrix { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper triangle
    /// (`i <= j`) and mirrored, so the result is exactly symmetric.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        SymMatrix { n, data }
    }

    /// Builds from full rows, mirroring the upper triangle. Used by the
    /// parallel Gram path where each row is computed independently.
    pub(crate) fn from_upper_rows(n: usize, rows: Vec<Vec<f64>>) -> Self {
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                let j = i + k;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        SymMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entry `(i, j)` and its mirror.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match matrix dimension");
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += value;
        }
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.n, self.n), self.data.clone())
            .expect("square storage always matches its shape")
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

/// Default starting jitter: `1e-10` times the mean diagonal.
pub fn default_jitter(a: &SymMatrix) -> f64 {
    if a.dim() == 0 {
        return 0.0;
    }
    1e-10 * (a.trace() / a.dim() as f64).abs()
}

/// Lower Cholesky factor of `A + jitter·I`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: DMatrix<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factorizes `A + jitter·I`. If that fails the jitter is escalated by
    /// a factor of ten (starting from [`default_jitter`] when the caller
    /// passed zero), at most three times.
    pub fn factor(a: &SymMatrix, jitter: f64) -> Result<Self> {
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::InvalidParameter(format!("jitter must be >= 0, got {jitter}")));
        }
        let base = a.to_dmatrix();
        let fallback = default_jitter(a).max(f64::MIN_POSITIVE);
        let mut current = jitter;
        for attempt in 0..=MAX_JITTER_ESCALATIONS {
            let mut m = base.clone();
            for i in 0..a.dim() {
                m[(i, i)] += current;
            }
            if let Some(chol) = nalgebra::linalg::Cholesky::new(m) {
                let lower = chol.unpack();
                if lower.iter().all(|v| v.is_finite()) {
                    return Ok(Cholesky {
                        lower,
                        jitter: current,
                    });
                }
            }
            if attempt == MAX_JITTER_ESCALATIONS {
                break;
            }
            current = if current == 0.0 { fallback } else { current * 10.0 };
        }
        Err(Error::NotPositiveDefinite { jitter: current })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// The jitter that was finally added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Solves `(A + jitter·I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), b.len())?;
        let y = self.solve_lower(b)?;
        let x = self
            .lower
            .tr_solve_lower_triangular(&DVector::from_column_slice(&y))
            .ok_or(Error::NotPositiveDefinite { jitter: self.jitter })?;
        Ok(x.iter().copied().collect())
    }

    /// Solves `L y = b` with the lower factor.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), b.len())?;
        let y = self
            .lower
            .solve_lower_triangular(&DVector::from_column_slice(b))
            .ok_or(Error::NotPositiveDefinite { jitter: self.jitter })?;
        Ok(y.iter().copied().collect())
    }
}

/// Solves `(A + jitter·I) x = b`, escalating the jitter when the
/// factorization fails.
pub fn chol_solve(a: &SymMatrix, b: &[f64], jitter: f64) -> Result<Vec<f64>> {
    ensure_dim(a.dim(), b.len())?;
    ensure_finite(b)?;
    Cholesky::factor(a, jitter)?.solve(b)
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, in the same order as `values`.
    pub vectors: Array2<f64>,
}

impl SymEig {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).to_vec()
    }
}

/// Symmetric eigendecomposition. Each eigenvector is signed so that its
/// largest-magnitude component is positive.
pub fn sym_eig(a: &SymMatrix) -> Result<SymEig> {
    ensure_finite(a.as_slice())?;
    let n = a.dim();
    let eig = nalgebra::SymmetricEigen::new(a.to_dmatrix());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for r in 1..n {
            if v[r].abs() > v[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if n > 0 && v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, col)] = sign * v[r];
        }
    }
    Ok(SymEig { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_solve() {
        let x = chol_solve(&SymMatrix::identity(3), &[1.0, 2.0, 3.0], 0.0).unwrap();
        assert!(close(&x, &[1.0, 2.0, 3.0], 1e-14));
    }

    #[test]
    fn diagonal_solve() {
        let a = SymMatrix::new(2, vec![4.0, 0.0, 0.0, 9.0]).unwrap();
        let x = chol_solve(&a, &[8.0, 27.0], 0.0).unwrap();
        assert!(close(&x, &[2.0, 3.0], 1e-14));
    }

    #[test]
    fn two_by_two_solve() {
        // inverse of [[2,1],[1,2]] is [[2,-1],[-1,2]]/3
        let a = SymMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let x = chol_solve(&a, &[3.0, 3.0], 0.0).unwrap();
        assert!(close(&x, &[1.0, 1.0], 1e-14));
    }

    #[test]
    fn singular_matrix_gets_jitter() {
        let a = SymMatrix::new(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let chol = Cholesky::factor(&a, 0.0).unwrap();
        assert!(chol.jitter() > 0.0);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = SymMatrix::new(2, vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(
            chol_solve(&a, &[1.0, 1.0], 0.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        assert!(matches!(
            SymMatrix::new(2, vec![1.0, 2.0, 3.0, 1.0]),
            Err(Error::NotSymmetric { row: 0, col: 1 })
        ));
        assert_eq!(SymMatrix::new(1, vec![f64::NAN]), Err(Error::NonFiniteInput));
        assert!(matches!(SymMatrix::new(2, vec![1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn eig_identity() {
        let e = sym_eig(&SymMatrix::identity(2)).unwrap();
        assert!(close(&e.values, &[1.0, 1.0], 1e-14));
    }

    #[test]
    fn eig_diagonal_sorted() {
        let a = SymMatrix::new(2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert!(close(&e.values, &[2.0, 1.0], 1e-14));
        assert!(close(&e.vector(0), &[0.0, 1.0], 1e-14));
        assert!(close(&e.vector(1), &[1.0, 0.0], 1e-14));
    }

    #[test]
    fn eig_swap_matrix() {
        // characteristic polynomial λ² − 1
        let a = SymMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert!(close(&e.values, &[1.0, -1.0], 1e-14));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&e.vector(0), &[s, s], 1e-12));
    }

    #[test]
    fn eig_sign_convention() {
        let a = SymMatrix::new(3, vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]).unwrap();
        let e = sym_eig(&a).unwrap();
        for k in 0..3 {
            let v = e.vector(k);
            let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }
}
