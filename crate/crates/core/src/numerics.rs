//! Dense complex linear algebra.
//!
//! Every matrix in the crate is a [`DenseMatrix`] of complex doubles, even
//! when the geometry is real. Eigen- and singular-value decompositions are
//! delegated to `nalgebra`; the Cholesky factorization and the triangular
//! solves built on it are implemented here because the Gram–Schmidt gauge and
//! the failing-minor diagnostics depend on their exact form.

use std::fmt;
use std::ops::{Add, Deref, Index, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;
use thiserror::Error;

use crate::config::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("NonFiniteEntry: entry ({row}, {col}) is NaN or infinite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("NotSquare: matrix is {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("DimensionMismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("NonHermitianInput: max|H - H*| = {deviation:e} exceeds {threshold:e}")]
    NonHermitianInput { deviation: f64, threshold: f64 },
    #[error("NotPositiveDefinite: leading minor of order {minor} is not positive")]
    NotPositiveDefinite { minor: usize },
    #[error("SingularInput: smallest singular value {smallest:e} is below {threshold:e}")]
    SingularInput { smallest: f64, threshold: f64 },
    #[error("ConvergenceFailure: {0}")]
    ConvergenceFailure(String),
}

/// A dense complex matrix whose entries are all finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<Complex64>);

impl DenseMatrix {
    /// Wraps a `nalgebra` matrix after checking that every entry is finite.
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self, NumericsError> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(NumericsError::NonFiniteEntry { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    /// Internal constructor for results of arithmetic on finite matrices.
    pub(crate) fn wrap(m: DMatrix<Complex64>) -> Self {
        debug_assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Self(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self, NumericsError> {
        Self::from_matrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from real rows. All rows must have equal length.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, NumericsError> {
        let ncols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(NumericsError::DimensionMismatch {
                left: (rows.len(), ncols),
                right: (1, bad.len()),
            });
        }
        Self::from_fn(rows.len(), ncols, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    /// Builds a matrix from complex rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, NumericsError> {
        let ncols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(NumericsError::DimensionMismatch {
                left: (rows.len(), ncols),
                right: (1, bad.len()),
            });
        }
        Self::from_fn(rows.len(), ncols, |i, j| rows[i][j])
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self, NumericsError> {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self, NumericsError> {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn is_square(&self) -> bool {
        self.0.nrows() == self.0.ncols()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conjugate(&self) -> Self {
        Self(self.0.conjugate())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation `max|H_ij - conj(H_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.0.nrows().min(self.0.ncols());
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                dev = dev.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(H + H*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Copy of the `nr × nc` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self(self.0.view((r0, c0), (nr, nc)).into_owned())
    }

    /// Copy of the submatrix with the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.0[(rows[i], cols[j])]
        }))
    }

    /// Symmetric permutation `P^T M P` where row/column `k` of the result is
    /// row/column `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        self.select(perm, perm)
    }

    /// Real parts of the diagonal.
    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.0.nrows().min(self.0.ncols()))
            .map(|i| self.0[(i, i)].re)
            .collect()
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<Complex64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;

    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

/// Serialized as a list of rows, each entry a `[re, im]` pair.
impl serde::Serialize for DenseMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| [self[(i, j)].re, self[(i, j)].im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} ", self.0.nrows(), self.0.ncols())?;
        f.debug_list()
            .entries(self.0.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()))
            .finish()
    }
}

impl<'a> Add<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        DenseMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        DenseMatrix(&self.0 - &rhs.0)
    }
}

impl<'a> Mul<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        DenseMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        DenseMatrix(-&self.0)
    }
}

/// Ascending eigenvalues with the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

fn require_square(m: &DenseMatrix) -> Result<usize, NumericsError> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(NumericsError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Checks Hermiticity against `hermit_tol · ‖H‖_F` and returns `(H + H*)/2`.
pub fn checked_hermitian_part(h: &DenseMatrix, hermit_tol: f64) -> Result<DenseMatrix, NumericsError> {
    require_square(h)?;
    let deviation = h.hermitian_deviation();
    let threshold = hermit_tol * h.frobenius_norm();
    if deviation > threshold {
        return Err(NumericsError::NonHermitianInput { deviation, threshold });
    }
    Ok(h.hermitian_part())
}

/// Spectral decomposition of a Hermitian matrix.
pub fn hermitian_eigh(h: &DenseMatrix, tol: &Tolerances) -> Result<EigenResult, NumericsError> {
    let sym = checked_hermitian_part(h, tol.hermit_tol)?;
    let n = sym.nrows();
    if n == 0 {
        return Ok(EigenResult {
            eigenvalues: Vec::new(),
            eigenvectors: DenseMatrix::zeros(0, 0),
        });
    }
    let scale = sym.frobenius_norm();
    let eig = SymmetricEigen::try_new(sym.0.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| NumericsError::ConvergenceFailure("Hermitian eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);

    for (j, &lambda) in eigenvalues.iter().enumerate() {
        let v = vectors.column(j);
        let residual = (&sym.0 * v - v * Complex64::new(lambda, 0.0)).norm();
        if residual > tol.eig_tol * scale {
            return Err(NumericsError::ConvergenceFailure(format!(
                "eigenpair {j} has residual {residual:e} above {:e}",
                tol.eig_tol * scale
            )));
        }
    }

    Ok(EigenResult {
        eigenvalues,
        eigenvectors: DenseMatrix::from_matrix(vectors)?,
    })
}

/// Lower-triangular `L` with positive real diagonal and `L L* = G`.
///
/// Fails with the order of the first leading minor that is not positive.
pub fn cholesky_hpd(g: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix, NumericsError> {
    let g = checked_hermitian_part(g, tol.hermit_tol)?;
    let n = g.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(NumericsError::NotPositiveDefinite { minor: j + 1 });
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    DenseMatrix::from_matrix(l)
}

/// Solves `L X = B` for lower-triangular `L` by forward substitution.
pub fn solve_lower(l: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
    let n = require_square(l)?;
    if b.nrows() != n {
        return Err(NumericsError::DimensionMismatch {
            left: l.shape(),
            right: b.shape(),
        });
    }
    let mut x = b.0.clone();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    DenseMatrix::from_matrix(x)
}

/// Solves `L* X = B` for lower-triangular `L` by back substitution.
pub fn solve_lower_adjoint(l: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
    let n = require_square(l)?;
    if b.nrows() != n {
        return Err(NumericsError::DimensionMismatch {
            left: l.shape(),
            right: b.shape(),
        });
    }
    let mut x = b.0.clone();
    for c in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].conj();
        }
    }
    DenseMatrix::from_matrix(x)
}

/// Solves `G X = B` for Hermitian positive definite `G`.
pub fn solve_hpd(g: &DenseMatrix, b: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix, NumericsError> {
    let l = cholesky_hpd(g, tol)?;
    let y = solve_lower(&l, b)?;
    solve_lower_adjoint(&l, &y)
}

/// `G^{-1}` for Hermitian positive definite `G`, symmetrized.
pub fn inverse_hpd(g: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix, NumericsError> {
    let n = require_square(g)?;
    Ok(solve_hpd(g, &DenseMatrix::identity(n), tol)?.hermitian_part())
}

/// Spectral norm (largest singular value).
pub fn operator_norm(a: &DenseMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.0.clone().singular_values().iter().fold(0.0, |m, &s| m.max(s))
}

/// Spectral norm computed as `sqrt(λ_max(A* A))`; an independent route to
/// [`operator_norm`].
pub fn operator_norm_via_gram(a: &DenseMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = (a.0.adjoint() * &a.0 + (a.0.adjoint() * &a.0).adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v))
        .max(0.0)
        .sqrt()
}

/// Largest `|i - j|` over entries above `rel_tol · max|A|`.
pub fn bandwidth(a: &DenseMatrix, rel_tol: f64) -> usize {
    let cutoff = rel_tol * a.max_abs();
    let mut width = 0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)].norm() > cutoff {
                width = width.max(i.abs_diff(j));
            }
        }
    }
    width
}

/// Unitary factor `U = W (W*W)^{-1/2}` of the polar decomposition, i.e. the
/// unitary maximizing `Re tr(U* W)`.
pub fn polar_unitary(w: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix, NumericsError> {
    let n = require_square(w)?;
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let svd = SVD::try_new(w.0.clone(), true, true, f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| NumericsError::ConvergenceFailure("SVD did not converge".into()))?;
    let largest = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let smallest = svd.singular_values.iter().fold(f64::INFINITY, |m, &s| m.min(s));
    let threshold = tol.singular_tol * largest;
    if !(smallest > threshold) {
        return Err(NumericsError::SingularInput { smallest, threshold });
    }
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(NumericsError::ConvergenceFailure("SVD factors unavailable".into()));
    };
    DenseMatrix::from_matrix(u * v_t)
}
