//! Gram–Schmidt along the degree filtration, projectors, reproducing kernels
//! and multiplication (Jacobi) matrices.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{
    check_positive_definite, evaluate_basis, gram_matrix_in, to_monomial_matrix, BasisFamily, BasisLabel, Domain,
    GeometrySpec, GramMatrix,
};
use crate::numerics::{bandwidth, cholesky_hpd, solve_hpd, solve_lower_adjoint, DenseMatrix, NumericsError};
use crate::quadrature::{chebyshev_points, uniform_angles};

/// Orthonormal polynomials `p_0, …, p_{d-1}` as columns of `C` in canonical
/// coordinates.
///
/// The canonical basis is listed by degree (on the circle: `e_0, e_{-1}, e_1,
/// e_{-2}, …`), `C` is upper triangular in that order and has a positive
/// diagonal.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub coefficients: DenseMatrix,
    /// `C^{-1}`; equals `L*` for the Cholesky factor `G = LL*` in the
    /// positive-leading gauge.
    pub inverse: DenseMatrix,
    pub labels: Vec<BasisLabel>,
    /// The Gram matrix in the same (degree) order as `labels`.
    pub gram: GramMatrix,
    pub cutoff: usize,
}

impl OrthonormalBasis {
    pub fn dimension(&self) -> usize {
        self.labels.len()
    }

    pub fn domain(&self) -> Domain {
        self.gram.domain()
    }

    /// `p_k(x)` for every `k`.
    pub fn evaluate(&self, x: f64) -> Vec<Complex64> {
        let e = evaluate_basis(&self.labels, self.domain(), x);
        let c = &self.coefficients;
        (0..c.ncols())
            .map(|k| (0..c.nrows()).map(|i| c[(i, k)] * e[i]).sum())
            .collect()
    }

    /// Columns hold monomial coefficients `x^0..x^N` of each `p_k`
    /// (Fourier coefficients on the circle).
    pub fn monomial_coefficients(&self) -> DenseMatrix {
        let t = to_monomial_matrix(&self.labels, self.domain());
        &t * &self.coefficients
    }

    /// The gauge-transformed basis `p'_j = Σ_k V_{jk} p_k`, i.e. `C' = C Vᵀ`.
    ///
    /// The result is orthonormal for unitary `V` but in general no longer
    /// upper triangular.
    pub fn rotated(&self, v: &DenseMatrix) -> OrthonormalBasis {
        OrthonormalBasis {
            coefficients: &self.coefficients * &v.transpose(),
            inverse: &v.conjugate() * &self.inverse,
            ..self.clone()
        }
    }

    /// `max|C*GC - I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let c = &self.coefficients;
        let m = &(&c.adjoint() * &self.gram.entries) * c;
        (&m - &DenseMatrix::identity(m.nrows())).max_abs()
    }
}

/// Orthonormalizes the canonical basis of `gram` along the degree filtration.
pub fn orthonormalize(gram: &GramMatrix, tol: &Tolerances) -> Result<OrthonormalBasis> {
    let ordered = gram.select(&gram.degree_order());
    let l = match cholesky_hpd(&ordered.entries, tol) {
        Ok(l) => l,
        Err(NumericsError::NotPositiveDefinite { minor }) => {
            check_positive_definite(&ordered.entries, tol)?;
            return Err(NumericsError::NotPositiveDefinite { minor }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let c = solve_lower_adjoint(&l, &DenseMatrix::identity(l.nrows()))?;
    let basis = OrthonormalBasis {
        coefficients: c,
        inverse: l.adjoint(),
        labels: ordered.labels.clone(),
        cutoff: ordered.cutoff,
        gram: ordered,
    };
    let residual = basis.orthonormality_residual();
    if residual > tol.ortho_tol {
        return Err(Error::LossOfOrthogonality {
            residual,
            tolerance: tol.ortho_tol,
        });
    }
    Ok(basis)
}

/// Orthogonal projector onto the span of the canonical elements of degree
/// `≤ n`, in the canonical coordinates of `gram`.
pub fn projector(gram: &GramMatrix, n: usize, tol: &Tolerances) -> Result<DenseMatrix> {
    if n > gram.cutoff {
        return Err(Error::InvalidArgument(format!(
            "projection degree {n} exceeds the Gram cutoff {}",
            gram.cutoff
        )));
    }
    projector_onto(gram, &gram.indices_up_to_degree(n), tol)
}

/// `P = X (X*GX)^{-1} X* G` with `X` the coordinate columns in `indices`.
pub fn projector_onto(gram: &GramMatrix, indices: &[usize], tol: &Tolerances) -> Result<DenseMatrix> {
    let dim = gram.dimension();
    let x = DenseMatrix::from_fn(dim, indices.len(), |i, j| {
        if indices[j] == i {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })?;
    let g = &gram.entries;
    let inner = g.select(indices, indices);
    let rhs = &x.adjoint() * g;
    let y = solve_hpd(&inner, &rhs, tol)?;
    Ok(&x * &y)
}

/// Kernel values on a grid of point pairs.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[(i, j)] = K(xs[i], ys[j])`.
    pub values: DenseMatrix,
}

/// `K(x, y) = Σ_k p_k(x) conj p_k(y)`.
pub fn reproducing_kernel(basis: &OrthonormalBasis, xs: &[f64], ys: &[f64]) -> KernelGrid {
    let px: Vec<Vec<Complex64>> = xs.iter().map(|&x| basis.evaluate(x)).collect();
    let py: Vec<Vec<Complex64>> = ys.iter().map(|&y| basis.evaluate(y)).collect();
    let values = DenseMatrix::wrap(nalgebra::DMatrix::from_fn(xs.len(), ys.len(), |i, j| {
        px[i].iter().zip(&py[j]).map(|(a, b)| a * b.conj()).sum()
    }));
    KernelGrid {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        values,
    }
}

/// Default kernel sample points: 64 uniform angles, or 64 Chebyshev points.
pub fn default_kernel_points(domain: Domain) -> Vec<f64> {
    match domain {
        Domain::Circle => uniform_angles(64),
        Domain::Interval { a, b } => chebyshev_points(64, a, b),
    }
}

/// Matrix of multiplication by the coordinate (`x`, or `z = e^{iθ}` on the
/// analytic circle modes) on `p_0..p_n`: entry `(m, k) = ⟨x p_k, p_m⟩`.
///
/// Uses the orthonormal basis at cutoff `n + 1`, so that `x p_n` is
/// represented exactly before compression to degree `≤ n`.
pub fn multiplication_matrix(spec: &GeometrySpec, n: usize, tol: &Tolerances) -> Result<DenseMatrix> {
    let gram = match spec.domain() {
        Domain::Circle => gram_matrix_in(spec, n + 1, BasisFamily::Canonical, tol)?.analytic_section(n + 1)?,
        Domain::Interval { .. } => gram_matrix_in(spec, n + 1, BasisFamily::Stable, tol)?,
    };
    let basis = orthonormalize(&gram, tol)?;
    let s = coordinate_multiplication(&basis.labels, spec.domain());
    let full = &(&basis.inverse * &s) * &basis.coefficients;
    Ok(full.block(0, 0, n + 1, n + 1))
}

/// Multiplication by the coordinate on a degree-graded basis; the image of
/// the top-degree element is truncated.
pub(crate) fn coordinate_multiplication(labels: &[BasisLabel], domain: Domain) -> DenseMatrix {
    let dim = labels.len();
    let index: HashMap<BasisLabel, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut s = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    let mut put = |target: BasisLabel, col: usize, v: f64| {
        if let Some(&row) = index.get(&target) {
            s[(row, col)] += Complex64::new(v, 0.0);
        }
    };
    for (col, label) in labels.iter().enumerate() {
        match *label {
            BasisLabel::Monomial(k) => put(BasisLabel::Monomial(k + 1), col, 1.0),
            BasisLabel::Fourier(k) => put(BasisLabel::Fourier(k + 1), col, 1.0),
            BasisLabel::Legendre(k) => {
                let Domain::Interval { a, b } = domain else {
                    unreachable!()
                };
                // x = (ξ - β)/α with ξ = αx + β
                let alpha = 2.0 / (b - a);
                let beta = -(a + b) / (b - a);
                let c = |j: usize| ((2 * j + 1) as f64 / 2.0).sqrt();
                let kf = k as f64;
                put(
                    BasisLabel::Legendre(k + 1),
                    col,
                    c(k) * (kf + 1.0) / ((2.0 * kf + 1.0) * c(k + 1)) / alpha,
                );
                if k > 0 {
                    put(
                        BasisLabel::Legendre(k - 1),
                        col,
                        c(k) * kf / ((2.0 * kf + 1.0) * c(k - 1)) / alpha,
                    );
                }
                put(BasisLabel::Legendre(k), col, -beta / alpha);
            }
        }
    }
    DenseMatrix::wrap(s)
}

/// Three-term recurrence coefficients `x p_n = a_{n+1} p_{n+1} + b_n p_n + a_n p_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiData {
    /// `a_1, …, a_N`.
    pub a: Vec<f64>,
    /// `b_0, …, b_N`.
    pub b: Vec<f64>,
}

impl JacobiData {
    /// The symmetric tridiagonal matrix with diagonal `b` and off-diagonal `a`.
    pub fn matrix(&self) -> DenseMatrix {
        let n = self.b.len();
        DenseMatrix::wrap(nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let v = if i == j {
                self.b[i]
            } else if i == j + 1 {
                self.a[j]
            } else if j == i + 1 {
                self.a[i]
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        }))
    }
}

/// Reads `(a_n, b_n)` off a tridiagonal multiplication matrix.
pub fn jacobi_coefficients(mult: &DenseMatrix, tol: &Tolerances) -> Result<JacobiData> {
    let width = bandwidth(mult, tol.band_tol);
    if width > 1 {
        return Err(Error::NotTridiagonal { bandwidth: width });
    }
    let n = mult.nrows();
    let b = (0..n).map(|i| mult[(i, i)].re).collect();
    let mut a = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let v = mult[(i, i - 1)].re;
        if !(v > 0.0) {
            return Err(Error::NonpositiveRecurrence { index: i, value: v });
        }
        a.push(v);
    }
    Ok(JacobiData { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gram_matrix, FourierCoefficients, WeightRepr};
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn legendre() -> GeometrySpec {
        GeometrySpec::interval_uniform(-1.0, 1.0).unwrap()
    }

    fn custom_gram(diag: &[f64]) -> GramMatrix {
        let base = gram_matrix(&legendre(), diag.len() - 1).unwrap();
        GramMatrix {
            entries: DenseMatrix::from_real_diagonal(diag).unwrap(),
            ..base
        }
    }

    #[test]
    fn identity_gram_gives_identity_basis() {
        let b = orthonormalize(&custom_gram(&[1.0, 1.0, 1.0]), &tol()).unwrap();
        assert!((&b.coefficients - &DenseMatrix::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_gram() {
        let b = orthonormalize(&custom_gram(&[4.0, 9.0]), &tol()).unwrap();
        assert_abs_diff_eq!(b.coefficients[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.coefficients[(1, 1)].re, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(b.coefficients[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn legendre_polynomials() {
        let b = orthonormalize(&gram_matrix(&legendre(), 2).unwrap(), &tol()).unwrap();
        let c = b.monomial_coefficients();
        let expected = [
            [1.0 / 2f64.sqrt(), 0.0, 0.0],
            [0.0, 1.5f64.sqrt(), 0.0],
            [-0.5 * 2.5f64.sqrt(), 0.0, 1.5 * 2.5f64.sqrt()],
        ];
        for k in 0..3 {
            for i in 0..3 {
                assert_abs_diff_eq!(c[(i, k)].re, expected[k][i], epsilon = 1e-12);
                assert_abs_diff_eq!(c[(i, k)].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn projector_examples() {
        let g = gram_matrix(&legendre(), 2).unwrap();
        let full = projector(&g, 2, &tol()).unwrap();
        assert!((&full - &DenseMatrix::identity(3)).max_abs() < 1e-12);

        let p = projector(&g, 1, &tol()).unwrap();
        assert!((&(&p * &p) - &p).max_abs() < 1e-12);
        let gp = &g.entries * &p;
        assert!((&gp - &(&p.adjoint() * &g.entries)).max_abs() < 1e-12);
        let rank = p
            .as_matrix()
            .clone()
            .singular_values()
            .iter()
            .filter(|&&s| s > 1e-8)
            .count();
        assert_eq!(rank, 2);
        // x² ↦ 1/3 (its L² projection onto span{1, x})
        assert_abs_diff_eq!(p[(0, 2)].re, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(1, 2)].re, 0.0, epsilon = 1e-12);

        let d = custom_gram(&[2.0, 3.0, 5.0]);
        let p = projector(&d, 1, &tol()).unwrap();
        let trunc = DenseMatrix::from_real_diagonal(&[1.0, 1.0, 0.0]).unwrap();
        assert!((&p - &trunc).max_abs() < 1e-15);
    }

    #[test]
    fn kernel_examples() {
        let circle = GeometrySpec::circle_weighted(FourierCoefficients::constant(1.0)).unwrap();
        let g = gram_matrix(&circle, 1).unwrap().analytic_section(1).unwrap();
        let b = orthonormalize(&g, &tol()).unwrap();
        let pts = default_kernel_points(Domain::Circle);
        let k = reproducing_kernel(&b, &pts, &pts);
        for i in 0..pts.len() {
            assert_abs_diff_eq!(k.values[(i, i)].re, 2.0, epsilon = 1e-14);
        }

        let b = orthonormalize(&gram_matrix(&legendre(), 0).unwrap(), &tol()).unwrap();
        let k = reproducing_kernel(&b, &[-1.0, 0.3], &[0.0, 0.9]);
        for v in k.values.iter() {
            assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn legendre_jacobi() {
        let m = multiplication_matrix(&legendre(), 4, &tol()).unwrap();
        let j = jacobi_coefficients(&m, &tol()).unwrap();
        assert_abs_diff_eq!(j.a[0], 1.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(j.a[1], 2.0 / 15f64.sqrt(), epsilon = 1e-12);
        for b in &j.b {
            assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-12);
        }
        assert!((&j.matrix() - &m).max_abs() < 1e-12);
    }

    #[test]
    fn even_weight_has_zero_diagonal() {
        let spec = GeometrySpec::interval_weighted(-1.0, 1.0, WeightRepr::Polynomial(vec![2.0, 0.0, -1.0])).unwrap();
        let m = multiplication_matrix(&spec, 5, &tol()).unwrap();
        let j = jacobi_coefficients(&m, &tol()).unwrap();
        assert!(j.b.iter().all(|b| b.abs() < 1e-12));
        assert!(j.a.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn circle_multiplication_is_shift() {
        let circle = GeometrySpec::circle_weighted(FourierCoefficients::constant(1.0)).unwrap();
        let m = multiplication_matrix(&circle, 3, &tol()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j + 1 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m[(i, j)].norm(), expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn sobolev_is_not_tridiagonal() {
        let spec = GeometrySpec::interval_sobolev(-1.0, 1.0, vec![1.0, 1.0]).unwrap();
        let m = multiplication_matrix(&spec, 5, &tol()).unwrap();
        assert!(bandwidth(&m, tol().band_tol) > 1);
        assert!(matches!(
            jacobi_coefficients(&m, &tol()),
            Err(Error::NotTridiagonal { .. })
        ));
    }

    #[test]
    fn circle_basis_is_degree_ordered() {
        let circle = GeometrySpec::circle_weighted(FourierCoefficients::cosine(1.0, 0.5)).unwrap();
        let b = orthonormalize(&gram_matrix(&circle, 2).unwrap(), &tol()).unwrap();
        let degrees: Vec<usize> = b.labels.iter().map(BasisLabel::degree).collect();
        assert_eq!(degrees, vec![0, 1, 1, 2, 2]);
        let c = &b.coefficients;
        for i in 0..5 {
            assert!(c[(i, i)].re > 0.0 && c[(i, i)].im == 0.0);
            for j in 0..i {
                assert_eq!(c[(i, j)].norm(), 0.0);
            }
        }
    }
}
