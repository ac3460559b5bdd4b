//! Dense real symmetric linear algebra.
//!
//! Everything spectral in the crate goes through [`eigh`], a cyclic Jacobi
//! eigensolver. Matrix functions (`exp`, `log`) are evaluated by spectral
//! mapping `f(A) = Q f(Λ) Qᵀ`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Off-diagonal Frobenius threshold for Jacobi convergence, relative to `‖A‖_F`.
pub const JACOBI_TOLERANCE: f64 = 1e-13;
/// Sweep cap for the Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Largest asymmetry accepted at construction, relative to `‖M‖_max`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// Positive-definiteness gate for [`matrix_log`], relative to `max(1, ‖A‖)`.
pub const LOG_PD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix dimension must be positive")]
    EmptyDimension,
    #[error("expected {expected} entries for the given shape, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric: asymmetry {asymmetry:e} exceeds {limit:e}")]
    NotSymmetric { asymmetry: f64, limit: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("Jacobi eigensolver did not converge for a {dim}x{dim} matrix after {sweeps} sweeps")]
    NoConvergence { dim: usize, sweeps: usize },
    #[error("matrix not positive definite (lambda_min = {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },
}

/// Dense real symmetric matrix stored row-major with exact symmetry.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from row-major entries.
    ///
    /// The stored matrix is `(M + Mᵀ)/2`. Inputs whose asymmetry exceeds
    /// `1e-8 · ‖M‖_max` are rejected.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        if data.len() != dim * dim {
            return Err(LinalgError::ShapeMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let max_abs = data.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let limit = SYMMETRY_TOLERANCE * max_abs;
        let mut asymmetry = 0.0_f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                asymmetry = asymmetry.max((data[i * dim + j] - data[j * dim + i]).abs());
            }
        }
        if asymmetry > limit {
            return Err(LinalgError::NotSymmetric { asymmetry, limit });
        }
        let mut m = Self { dim, data };
        m.symmetrize();
        Ok(m)
    }

    /// Builds from nested rows; see [`SymMatrix::from_row_major`].
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(LinalgError::ShapeMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    /// Builds from an entry function. Only the upper triangle is sampled.
    pub fn from_fn(
        dim: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    /// `c · I`.
    pub fn scalar(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self, LinalgError> {
        let dim = diag.len();
        Self::from_fn(dim, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// `A²`, which is symmetric for symmetric `A`.
    pub fn square(&self) -> Self {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v: f64 = (0..d).map(|k| self.get(i, k) * self.get(k, j)).sum();
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
        Self { dim: d, data: out }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self + c · other`.
    pub fn try_axpy(&self, c: f64, other: &Self) -> Result<Self, LinalgError> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a + c * b))
    }

    pub fn check_dim(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (self.data[i * d + j] + self.data[j * d + i]);
                self.data[i * d + j] = v;
                self.data[j * d + i] = v;
            }
        }
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.dim).collect();
        f.debug_struct("SymMatrix")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.try_add(rhs)
            .expect("dimension mismatch in SymMatrix addition")
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.try_sub(rhs)
            .expect("dimension mismatch in SymMatrix subtraction")
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

/// Dense real `rows × cols` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RectMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `BᵀB`, a `cols × cols` PSD matrix.
    pub fn gram(&self) -> SymMatrix {
        let n = self.cols;
        SymMatrix::from_fn(n, |i, j| {
            (0..self.rows)
                .map(|k| self.get(k, i) * self.get(k, j))
                .sum()
        })
        .expect("gram matrix of finite entries is finite")
    }
}

/// `A = Q diag(λ) Qᵀ` with ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Row-major `d × d` matrix whose columns are the eigenvectors.
    pub eigenvectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Eigenvector `i` (column `i` of `Q`).
    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|r| self.eigenvectors[r * d + i]).collect()
    }

    /// `Q f(Λ) Qᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.dim();
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let q = &self.eigenvectors;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v: f64 = (0..d).map(|k| q[i * d + k] * fl[k] * q[j * d + k]).sum();
                data[i * d + j] = v;
                data[j * d + i] = v;
            }
        }
        SymMatrix { dim: d, data }
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|l| l)
    }

    /// `Qᵀ A Q`: `a` expressed in this eigenbasis.
    pub fn to_eigenbasis(&self, a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        let d = self.dim();
        if a.dim != d {
            return Err(LinalgError::DimensionMismatch {
                left: d,
                right: a.dim,
            });
        }
        let q = &self.eigenvectors;
        // aq = A Q
        let mut aq = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                aq[i * d + j] = (0..d).map(|k| a.data[i * d + k] * q[k * d + j]).sum();
            }
        }
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v: f64 = (0..d).map(|k| q[k * d + i] * aq[k * d + j]).sum();
                data[i * d + j] = v;
                data[j * d + i] = v;
            }
        }
        Ok(SymMatrix { dim: d, data })
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops to
/// `1e-13 · ‖A‖_F`; more than 100 sweeps is reported as non-convergence.
pub fn eigh(a: &SymMatrix) -> Result<EigenDecomposition, LinalgError> {
    jacobi(a, false)
}

/// Smallest eigenvalue, with Jacobi sweeps continued until every
/// off-diagonal entry satisfies `|a_pq| ≤ ε·sqrt(|a_pp a_qq|)`.
///
/// For graded matrices (diagonal entries spanning many orders of magnitude)
/// this resolves the small eigenvalues to high relative accuracy, where
/// [`eigh`]'s norm-relative stopping rule only gives `1e-13 · ‖A‖_F`.
pub fn lambda_min_graded(a: &SymMatrix) -> Result<f64, LinalgError> {
    Ok(jacobi(a, true)?.lambda_min())
}

fn jacobi(a: &SymMatrix, graded: bool) -> Result<EigenDecomposition, LinalgError> {
    let d = a.dim;
    let mut m = a.data.clone();
    let mut v = SymMatrix::identity(d).data;
    let threshold = JACOBI_TOLERANCE * a.frobenius_norm();

    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += m[i * d + j] * m[i * d + j];
                }
            }
        }
        s.sqrt()
    };
    let negligible = |m: &[f64], p: usize, q: usize| -> bool {
        let apq = m[p * d + q].abs();
        apq == 0.0 || (graded && apq <= f64::EPSILON * (m[p * d + p] * m[q * d + q]).abs().sqrt())
    };
    let converged = |m: &[f64]| -> bool {
        if graded {
            (0..d).all(|p| ((p + 1)..d).all(|q| negligible(m, p, q)))
        } else {
            off_norm(m) <= threshold
        }
    };

    let mut sweeps = 0;
    while !converged(&m) {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { dim: d, sweeps });
        }
        sweeps += 1;
        for p in 0..d {
            for q in (p + 1)..d {
                if negligible(&m, p, q) {
                    continue;
                }
                let apq = m[p * d + q];
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                m[p * d + p] = app - t * apq;
                m[q * d + q] = aqq + t * apq;
                m[p * d + q] = 0.0;
                m[q * d + p] = 0.0;
                for r in 0..d {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[r * d + p];
                    let arq = m[r * d + q];
                    let np = c * arp - s * arq;
                    let nq = s * arp + c * arq;
                    m[r * d + p] = np;
                    m[p * d + r] = np;
                    m[r * d + q] = nq;
                    m[q * d + r] = nq;
                }
                for r in 0..d {
                    let vrp = v[r * d + p];
                    let vrq = v[r * d + q];
                    v[r * d + p] = c * vrp - s * vrq;
                    v[r * d + q] = s * vrp + c * vrq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[i * d + i].total_cmp(&m[j * d + j]));
    let eigenvalues = order.iter().map(|&i| m[i * d + i]).collect();
    let mut eigenvectors = vec![0.0; d * d];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..d {
            eigenvectors[r * d + new_col] = v[r * d + old_col];
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

pub fn matrix_exp(a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    Ok(eigh(a)?.map(f64::exp))
}

/// Principal logarithm of a positive-definite matrix.
pub fn matrix_log(a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let eig = eigh(a)?;
    let lambda_min = eig.lambda_min();
    let norm = eig.lambda_max().abs().max(lambda_min.abs());
    if lambda_min <= LOG_PD_TOLERANCE * norm.max(1.0) {
        return Err(LinalgError::NotPositiveDefinite { lambda_min });
    }
    Ok(eig.map(f64::ln))
}

pub fn lambda_max(a: &SymMatrix) -> Result<f64, LinalgError> {
    Ok(eigh(a)?.lambda_max())
}

pub fn lambda_min(a: &SymMatrix) -> Result<f64, LinalgError> {
    Ok(eigh(a)?.lambda_min())
}

/// Spectral norm of a symmetric matrix: `max |λ_i|`.
pub fn sym_norm(a: &SymMatrix) -> Result<f64, LinalgError> {
    let eig = eigh(a)?;
    Ok(eig.lambda_max().abs().max(eig.lambda_min().abs()))
}

/// Self-adjoint dilation `[[0, B], [Bᵀ, 0]]`.
pub fn dilation(b: &RectMatrix) -> SymMatrix {
    let (r, c) = (b.rows, b.cols);
    let n = r + c;
    let mut data = vec![0.0; n * n];
    for i in 0..r {
        for j in 0..c {
            let v = b.get(i, j);
            data[i * n + (r + j)] = v;
            data[(r + j) * n + i] = v;
        }
    }
    SymMatrix { dim: n, data }
}

/// Largest singular value, computed as `λ_max(dilation(B))`.
pub fn spectral_norm(b: &RectMatrix) -> Result<f64, LinalgError> {
    // λ_max of a dilation is never negative; clamp away Jacobi noise around 0.
    Ok(lambda_max(&dilation(b))?.max(0.0))
}

/// Outcome of a semidefinite-order comparison `A ≼ B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdComparison {
    pub holds: bool,
    /// `λ_min(B − A)`.
    pub margin: f64,
}

/// Tests `A ≼ B`: holds iff `λ_min(B − A) ≥ −tol`.
pub fn psd_order_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<PsdComparison, LinalgError> {
    let margin = lambda_min(&b.try_sub(a)?)?;
    Ok(PsdComparison {
        holds: margin >= -tol,
        margin,
    })
}

/// `1e-9 · max(1, ‖A‖, ‖B‖)` in spectral norm.
pub fn default_psd_tolerance(a: &SymMatrix, b: &SymMatrix) -> Result<f64, LinalgError> {
    Ok(1e-9 * sym_norm(a)?.max(sym_norm(b)?).max(1.0))
}

/// `tr exp(A)`, evaluated as `exp(λ_max) · Σ exp(λ_i − λ_max)`.
pub fn trace_exp(a: &SymMatrix) -> Result<f64, LinalgError> {
    let eig = eigh(a)?;
    Ok(trace_exp_of_spectrum(&eig.eigenvalues))
}

pub(crate) fn trace_exp_of_spectrum(eigenvalues: &[f64]) -> f64 {
    let top = eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted: f64 = eigenvalues.iter().map(|&l| (l - top).exp()).sum();
    top.exp() * shifted
}
