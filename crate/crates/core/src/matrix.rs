//! Dense symmetric-matrix plumbing.
//!
//! [`CandidateMatrix`] is the object whose compatibility every other module
//! tests: symmetric, unit diagonal, entries in `[-1, 1]`. Positive
//! semi-definiteness is *not* part of the type; it is a property checked with
//! [`CandidateMatrix::is_psd`].

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for symmetry, unit-diagonal and PSD checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is not square ({rows} rows, {cols} columns)")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is empty")]
    Empty,
    #[error("entries ({i},{j}) and ({j},{i}) differ by {diff:e}, more than the tolerance")]
    AsymmetryExceedsTol { i: usize, j: usize, diff: f64 },
    #[error("diagonal entry {i} is {value}, expected 1")]
    DiagonalNotOne { i: usize, value: f64 },
    #[error("entry ({i},{j}) = {value} lies outside [-1, 1]")]
    EntryOutOfRange { i: usize, j: usize, value: f64 },
    #[error("entry ({i},{j}) is not a finite number")]
    NonFinite { i: usize, j: usize },
    #[error("matrix is not positive definite (pivot {index} is {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Rows of unequal length are rejected.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(MatrixError::Parse {
                    line: i + 1,
                    message: format!("row has {} values, expected {}", r.len(), n_cols),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: n_rows, cols: n_cols, data })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `A·Aᵀ`.
    pub fn gram(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let s: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    /// Largest absolute entrywise difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Simultaneous row/column permutation: `out[(i, j)] = self[(perm[i], perm[j])]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert!(self.is_square() && perm.len() == self.rows);
        Self::from_fn(self.rows, self.cols, |i, j| self[(perm[i], perm[j])])
    }

    /// Parses the matrix text format: one row per line, comma-separated
    /// decimal values, no header. Blank lines are skipped.
    pub fn parse_text(text: &str) -> Result<Self, MatrixError> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|e| MatrixError::Parse {
                        line: lineno + 1,
                        message: format!("invalid number {:?}: {e}", tok.trim()),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(MatrixError::Parse {
                        line: lineno + 1,
                        message: format!("row has {} values, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(MatrixError::Empty);
        }
        Self::from_rows(&rows)
    }

    /// Inverse of [`Matrix::parse_text`]; values are written in shortest
    /// round-trip form, so parsing the output reproduces the matrix exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = f.precision().unwrap_or(4);
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:>w$.prec$}", w = prec + 4)).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// A symmetric matrix with unit diagonal and entries in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct CandidateMatrix(Matrix);

impl CandidateMatrix {
    /// Validates `raw` and returns the symmetrized matrix.
    ///
    /// Entries must be symmetric and the diagonal equal to one, both within
    /// `tol`; the result is `(raw + rawᵀ)/2` with the diagonal snapped to 1.
    /// Values outside `[-1, 1]` by at most `tol` are clamped. A nonzero but
    /// tolerated asymmetry is reported through `log::warn!`.
    pub fn validate(raw: &Matrix, tol: f64) -> Result<Self, MatrixError> {
        if !raw.is_square() {
            return Err(MatrixError::NotSquare { rows: raw.rows(), cols: raw.cols() });
        }
        let d = raw.rows();
        if d == 0 {
            return Err(MatrixError::Empty);
        }
        let mut max_asym = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                if !raw[(i, j)].is_finite() {
                    return Err(MatrixError::NonFinite { i, j });
                }
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let diff = (raw[(i, j)] - raw[(j, i)]).abs();
                if diff > tol {
                    return Err(MatrixError::AsymmetryExceedsTol { i, j, diff });
                }
                max_asym = max_asym.max(diff);
            }
        }
        for i in 0..d {
            let v = raw[(i, i)];
            if (v - 1.0).abs() > tol {
                return Err(MatrixError::DiagonalNotOne { i, value: v });
            }
        }
        let mut m = Matrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.5 * (raw[(i, j)] + raw[(j, i)]) });
        for i in 0..d {
            for j in 0..d {
                let v = m[(i, j)];
                if v.abs() > 1.0 + tol {
                    return Err(MatrixError::EntryOutOfRange { i, j, value: v });
                }
                m[(i, j)] = v.clamp(-1.0, 1.0);
            }
        }
        if max_asym > 0.0 {
            log::warn!("input matrix asymmetric by up to {max_asym:e}; symmetrized by averaging");
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(Matrix::identity(d))
    }

    /// Builds a matrix from its strict upper triangle in row-major pair order
    /// `(0,1), (0,2), …, (d-2,d-1)`.
    pub fn from_upper(d: usize, upper: &[f64]) -> Result<Self, MatrixError> {
        let expected = d * d.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(MatrixError::DimensionMismatch { expected, found: upper.len() });
        }
        let mut m = Matrix::identity(d);
        let mut k = 0;
        for i in 0..d {
            for j in (i + 1)..d {
                m[(i, j)] = upper[k];
                m[(j, i)] = upper[k];
                k += 1;
            }
        }
        Self::validate(&m, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// True iff the smallest eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        is_psd(&self.0, tol)
    }

    pub fn cholesky(&self) -> Result<LowerTriangular, MatrixError> {
        cholesky(&self.0)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(self.0.permuted(perm))
    }
}

impl TryFrom<Matrix> for CandidateMatrix {
    type Error = MatrixError;

    fn try_from(m: Matrix) -> Result<Self, MatrixError> {
        Self::validate(&m, DEFAULT_TOL)
    }
}

impl From<CandidateMatrix> for Matrix {
    fn from(m: CandidateMatrix) -> Matrix {
        m.0
    }
}

impl fmt::Display for CandidateMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Lower-triangular factor with nonnegative diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    /// Wraps `m`, checking the triangular shape and diagonal sign.
    pub fn new(m: Matrix) -> Result<Self, MatrixError> {
        if !m.is_square() {
            return Err(MatrixError::NotSquare { rows: m.rows(), cols: m.cols() });
        }
        for i in 0..m.rows() {
            if m[(i, i)] < 0.0 {
                return Err(MatrixError::Parse { line: i + 1, message: "negative diagonal in factor".into() });
            }
            for j in (i + 1)..m.cols() {
                if m[(i, j)] != 0.0 {
                    return Err(MatrixError::Parse { line: i + 1, message: "factor is not lower triangular".into() });
                }
            }
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.0.gram()
    }

    /// `out = L·z`, exploiting the triangular shape.
    pub fn mul_vec(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let row = self.0.row(i);
            out[i] = row[..=i].iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
        }
    }
}

/// Dense Cholesky factorization `m = L·Lᵀ`.
///
/// Fails with [`MatrixError::NotPositiveDefinite`] as soon as a pivot is not
/// strictly positive.
pub fn cholesky(m: &Matrix) -> Result<LowerTriangular, MatrixError> {
    if !m.is_square() {
        return Err(MatrixError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) {
            return Err(MatrixError::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriangular(l))
}

/// `Γ_d(a, b) = a·I + b·(J − I)`: `a` on the diagonal, `b` elsewhere.
pub fn compound_symmetry(d: usize, a: f64, b: f64) -> Matrix {
    Matrix::from_fn(d, d, |i, j| if i == j { a } else { b })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn symmetric_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    assert!(m.is_square(), "eigen-decomposition needs a square matrix");
    let n = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale = m.as_slice().iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                // signum(+0.0) == 1.0, so theta == 0 rotates by 45 degrees
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// True iff the symmetric matrix `m` has smallest eigenvalue `>= -tol`.
pub fn is_psd(m: &Matrix, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol
}

/// Factor `A` with `A·Aᵀ = m` for a PSD matrix, from the eigen-decomposition
/// with eigenvalues in `[-tol, 0)` clamped to zero. The result is generally not
/// triangular.
pub fn psd_root(m: &Matrix, tol: f64) -> Option<Matrix> {
    let (values, vectors) = symmetric_eigen(m);
    if values.first().is_some_and(|&v| v < -tol) {
        return None;
    }
    let n = m.rows();
    Some(Matrix::from_fn(n, n, |i, j| vectors[(i, j)] * values[j].max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> Matrix {
        Matrix::from_rows(&[[1.0, -0.95, 0.5], [-0.95, 1.0, -0.4], [0.5, -0.4, 1.0]]).unwrap()
    }

    #[test]
    fn validate_accepts_paper_like_inputs() {
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        assert!(CandidateMatrix::validate(&m, DEFAULT_TOL).is_ok());
        assert!(CandidateMatrix::validate(&p1(), DEFAULT_TOL).is_ok());
    }

    #[test]
    fn validate_error_paths() {
        let m = Matrix::from_rows(&[[1.0, 1.2], [1.2, 1.0]]).unwrap();
        assert!(matches!(CandidateMatrix::validate(&m, DEFAULT_TOL), Err(MatrixError::EntryOutOfRange { .. })));
        let m = Matrix::from_rows(&[[1.0, 0.2, 0.1]]).unwrap();
        assert!(matches!(CandidateMatrix::validate(&m, DEFAULT_TOL), Err(MatrixError::NotSquare { .. })));
        let m = Matrix::from_rows(&[[1.0, 0.2], [0.3, 1.0]]).unwrap();
        assert!(matches!(CandidateMatrix::validate(&m, DEFAULT_TOL), Err(MatrixError::AsymmetryExceedsTol { .. })));
        let m = Matrix::from_rows(&[[0.9, 0.2], [0.2, 1.0]]).unwrap();
        assert!(matches!(CandidateMatrix::validate(&m, DEFAULT_TOL), Err(MatrixError::DiagonalNotOne { i: 0, .. })));
    }

    #[test]
    fn validate_symmetrizes_within_tolerance() {
        let m = Matrix::from_rows(&[[1.0, 0.3 + 1e-12], [0.3 - 1e-12, 1.0 + 1e-12]]).unwrap();
        let c = CandidateMatrix::validate(&m, DEFAULT_TOL).unwrap();
        assert_eq!(c.get(0, 1), c.get(1, 0));
        assert_eq!(c.get(1, 1), 1.0);
        assert!((c.get(0, 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn psd_of_equicorrelated_3x3() {
        let ok = CandidateMatrix::validate(&compound_symmetry(3, 1.0, -0.4), DEFAULT_TOL).unwrap();
        let bad = CandidateMatrix::validate(&compound_symmetry(3, 1.0, -0.6), DEFAULT_TOL).unwrap();
        assert!(ok.is_psd(DEFAULT_TOL));
        assert!(!bad.is_psd(DEFAULT_TOL));
        assert!(CandidateMatrix::identity(5).is_psd(DEFAULT_TOL));
        // boundary: eigenvalue exactly zero
        assert!(is_psd(&compound_symmetry(3, 1.0, -0.5), DEFAULT_TOL));
    }

    #[test]
    fn cholesky_small_cases() {
        let l = cholesky(&Matrix::identity(4)).unwrap();
        assert_eq!(l.as_matrix(), &Matrix::identity(4));

        let l = cholesky(&Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap()).unwrap();
        let expected = Matrix::from_rows(&[[1.0, 0.0], [0.5, 0.75_f64.sqrt()]]).unwrap();
        assert!(l.as_matrix().max_abs_diff(&expected) < 1e-15);

        let err = cholesky(&compound_symmetry(3, 1.0, -0.6)).unwrap_err();
        assert!(matches!(err, MatrixError::NotPositiveDefinite { .. }));
    }

    #[test]
    fn compound_symmetry_layout() {
        let g = compound_symmetry(2, 1.0, 0.3);
        assert_eq!(g.to_rows(), vec![vec![1.0, 0.3], vec![0.3, 1.0]]);
        let g = compound_symmetry(4, 1.0, 0.4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g[(i, j)], if i == j { 1.0 } else { 0.4 });
            }
        }
        // eigenvalues of Γ_3(1, -1/2) are {0, 3/2, 3/2}
        let (ev, _) = symmetric_eigen(&compound_symmetry(3, 1.0, -0.5));
        assert!(ev[0].abs() < 1e-14);
        assert!((ev[1] - 1.5).abs() < 1e-14 && (ev[2] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn jacobi_reconstructs() {
        let m = p1();
        let (vals, vecs) = symmetric_eigen(&m);
        let rebuilt = Matrix::from_fn(3, 3, |i, j| (0..3).map(|k| vecs[(i, k)] * vals[k] * vecs[(j, k)]).sum());
        assert!(rebuilt.max_abs_diff(&m) < 1e-13);
    }

    #[test]
    fn psd_root_handles_boundary() {
        let m = compound_symmetry(3, 1.0, -0.5);
        assert!(cholesky(&m).is_err());
        let a = psd_root(&m, DEFAULT_TOL).unwrap();
        assert!(a.gram().max_abs_diff(&m) < 1e-12);
        assert!(psd_root(&compound_symmetry(3, 1.0, -0.6), DEFAULT_TOL).is_none());
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let m = Matrix::from_rows(&[[1.0, 0.1 + 0.2], [0.1 + 0.2, 1.0]]).unwrap();
        assert_eq!(Matrix::parse_text(&m.to_text()).unwrap(), m);
        assert!(Matrix::parse_text("1,0.5\n0.5").is_err());
        assert!(Matrix::parse_text("1,x\n0.5,1").is_err());
        assert!(matches!(Matrix::parse_text("\n\n"), Err(MatrixError::Empty)));
    }
}
