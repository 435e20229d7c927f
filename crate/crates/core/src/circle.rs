//! The circle model: weighted `L²(w)` versus the regularized form
//! `⟨f,g⟩_{w,λ} = ∫ f ḡ w + λ ∫ f' ḡ'`, whose Fourier matrix is
//! `A_{w,λ} = M_w + λ diag(n²)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{
    circle_gram_entries, derivative_matrix, gram_matrix_in, BasisFamily, FourierCoefficients, GeometrySpec,
    WeightFunction,
};
use crate::laplacian::assemble_laplacian;
use crate::numerics::{operator_norm, solve_hpd, solve_lower, DenseMatrix, NumericsError};
use crate::ortho::{default_kernel_points, orthonormalize, OrthonormalBasis};
use crate::resolvent::{basis_alignment, default_padding, kernel_distance, PaddedGeometry};

/// A weighted circle with regularization `λ ≥ 0` at mode cutoff `N`.
#[derive(Debug, Clone)]
pub struct CircleModel {
    weight: WeightFunction,
    lambda: f64,
    cutoff: usize,
}

impl CircleModel {
    pub fn new(coefficients: FourierCoefficients, lambda: f64, cutoff: usize) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(crate::SpecError::InvalidRegularization(lambda).into());
        }
        Ok(Self {
            weight: WeightFunction::trigonometric(coefficients)?,
            lambda,
            cutoff,
        })
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coefficients(&self) -> &FourierCoefficients {
        self.weight.fourier().expect("circle weights are trigonometric")
    }

    pub fn spec(&self) -> GeometrySpec {
        GeometrySpec::circle(self.coefficients().clone(), self.lambda).expect("validated on construction")
    }

    /// `A_{w,λ}` on modes `-N..=N`.
    pub fn a_matrix(&self) -> DenseMatrix {
        circle_gram_entries(self.coefficients(), self.lambda, self.cutoff)
    }

    /// `(A^{(N)})^{-1} D* A^{(N)} D` on modes `-N..=N`.
    pub fn similarity_laplacian(&self, tol: &Tolerances) -> Result<DenseMatrix> {
        similarity_laplacian(&self.a_matrix(), self.cutoff, tol)
    }
}

fn similarity_laplacian(a: &DenseMatrix, n: usize, tol: &Tolerances) -> Result<DenseMatrix> {
    let d = fourier_derivative(n);
    let rhs = &(&d.adjoint() * a) * &d;
    Ok(solve_hpd(a, &rhs, tol)?)
}

fn fourier_derivative(n: usize) -> DenseMatrix {
    let modes: Vec<Complex64> = (-(n as i64)..=n as i64)
        .map(|k| Complex64::new(0.0, k as f64))
        .collect();
    DenseMatrix::from_diagonal(&modes).expect("finite")
}

fn analytic_basis(
    coefficients: &FourierCoefficients,
    lambda: f64,
    n: usize,
    tol: &Tolerances,
) -> Result<OrthonormalBasis> {
    let spec = GeometrySpec::circle(coefficients.clone(), lambda)?;
    let gram = gram_matrix_in(&spec, n, BasisFamily::Canonical, tol)?.analytic_section(n)?;
    orthonormalize(&gram, tol)
}

/// Orthonormal polynomials in `1, z, …, z^N` for `⟨·,·⟩_w`.
pub fn opuc_basis(coefficients: &FourierCoefficients, n: usize, tol: &Tolerances) -> Result<OrthonormalBasis> {
    analytic_basis(coefficients, 0.0, n, tol)
}

/// Orthonormal polynomials in `1, z, …, z^N` for `⟨·,·⟩_{w,λ}`.
pub fn sobolev_opuc_basis(
    coefficients: &FourierCoefficients,
    lambda: f64,
    n: usize,
    tol: &Tolerances,
) -> Result<OrthonormalBasis> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(crate::SpecError::InvalidRegularization(lambda).into());
    }
    analytic_basis(coefficients, lambda, n, tol)
}

/// `C_N(w) = N⁴ (w_+ / w_-² + 1 / w_-)`.
pub fn cn_constant(n: usize, w_minus: f64, w_plus: f64) -> f64 {
    (n as f64).powi(4) * (w_plus / (w_minus * w_minus) + 1.0 / w_minus)
}

/// `C_N(w)` from the certified bounds of `w`.
pub fn cn_bound(coefficients: &FourierCoefficients, n: usize) -> Result<f64> {
    let w = WeightFunction::trigonometric(coefficients.clone())?;
    let (lo, hi) = w.bounds();
    Ok(cn_constant(n, lo, hi))
}

/// `‖R_a^{(N)} - R_b^{(N)}‖` with `R^{(N)}_λ = (I + (A_λ^{(N)})^{-1} D* A_λ^{(N)} D)^{-1}`
/// acting on trigonometric polynomials of degree `≤ N`, normed by `L²(w)`.
pub fn weighted_truncated_distance(
    weight: &WeightFunction,
    lambda_a: f64,
    lambda_b: f64,
    n: usize,
    tol: &Tolerances,
) -> Result<f64> {
    let fourier = weight
        .fourier()
        .ok_or_else(|| Error::InvalidArgument("weight is not trigonometric".into()))?;
    let resolvent = |lambda: f64| -> Result<DMatrix<Complex64>> {
        let a = circle_gram_entries(fourier, lambda, n);
        let delta = similarity_laplacian(&a, n, tol)?;
        let dim = delta.nrows();
        (DMatrix::identity(dim, dim) + delta.as_matrix())
            .try_inverse()
            .ok_or_else(|| {
                NumericsError::SingularInput {
                    smallest: 0.0,
                    threshold: tol.singular_tol,
                }
                .into()
            })
    };
    let diff = DenseMatrix::from_matrix(resolvent(lambda_a)? - resolvent(lambda_b)?)?;
    // ‖X‖_w = ‖L* X L^{-*}‖₂ for M_w = L L*
    let l = crate::numerics::cholesky_hpd(&circle_gram_entries(fourier, 0.0, n), tol)?;
    let y = &l.adjoint() * &diff;
    let z = solve_lower(&l, &y.adjoint())?.adjoint();
    Ok(operator_norm(&z))
}

/// Agreement between `Δ` assembled in orthonormal coordinates and the
/// Fourier similarity form transported by the orthonormalizing change of basis.
#[derive(Debug, Clone, Serialize)]
pub struct SimilarityReport {
    pub max_deviation: f64,
    /// `max|T - T*|` of the transported similarity form.
    pub hermitian_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn delta_similarity_check(model: &CircleModel, tol: &Tolerances) -> Result<SimilarityReport> {
    let n = model.cutoff();
    let spec = model.spec();
    let gram = gram_matrix_in(&spec, n, BasisFamily::Canonical, tol)?;
    let basis = orthonormalize(&gram, tol)?;
    let delta = assemble_laplacian(&basis);
    let similarity = model.similarity_laplacian(tol)?;
    let order = gram.degree_order();
    let permuted = similarity.permuted(&order);
    let transported = &(&basis.inverse * &permuted) * &basis.coefficients;
    let max_deviation = (&transported - &delta.entries).max_abs();
    let tolerance = 1e-10 * delta.entries.max_abs().max(1.0);
    Ok(SimilarityReport {
        max_deviation,
        hermitian_deviation: transported.hermitian_deviation(),
        tolerance,
        passed: max_deviation <= tolerance,
    })
}

/// One `λ` of a scan, compared against the `λ = 0` geometry.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaScanRow {
    pub lambda: f64,
    /// Compressed resolvents in Gram–Schmidt coordinates, padded.
    pub d_res_compressed: f64,
    /// Truncated-operator resolvents on `𝒯_{≤N}` in the `L²(w)` norm.
    pub d_res_truncop: f64,
    /// Truncated-operator resolvents in Gram–Schmidt coordinates.
    pub d_res_truncop_gs: f64,
    /// `C_N(w) · λ`.
    pub cn_bound: f64,
    pub projector_diff: f64,
    pub basis_residual_g1: f64,
    pub basis_residual_g2: f64,
    pub kernel_sup_diff: f64,
    pub converged: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaScan {
    pub degree: usize,
    pub padding: usize,
    pub converged: bool,
    pub cn_constant: f64,
    pub rows: Vec<LambdaScanRow>,
    /// Least-squares slope of `log d_res_compressed` against `log λ`; `None`
    /// when fewer than two distances are above the rounding floor.
    pub slope: Option<f64>,
}

impl LambdaScan {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

pub const LAMBDA_CSV_HEADER: &str = "lambda,d_res_compressed,d_res_truncop,cn_bound,projector_diff,basis_residual_g1,basis_residual_g2,kernel_sup_diff,verdict";

impl LambdaScanRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.lambda,
            self.d_res_compressed,
            self.d_res_truncop,
            self.cn_bound,
            self.projector_diff,
            self.basis_residual_g1,
            self.basis_residual_g2,
            self.kernel_sup_diff,
            if self.pass { "pass" } else { "fail" }
        )
    }
}

/// Distances at or below this are rounding noise and excluded from slope fits.
pub const ROUNDING_FLOOR: f64 = 1e-14;

/// Least-squares slope of `log y` against `log x` over pairs with
/// `y > ROUNDING_FLOOR`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > ROUNDING_FLOOR)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn check_lambda_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 4 {
        return Err(Error::InvalidGrid(format!(
            "need at least 4 λ values, got {}",
            lambdas.len()
        )));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidGrid("λ values must be positive and finite".into()));
    }
    let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().copied().fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidGrid(format!(
            "λ grid must span at least two decades, got [{lo:e}, {hi:e}]"
        )));
    }
    Ok(())
}

/// Compares the `(ŵ, λ)` geometry with `(ŵ, 0)` for every `λ` in the grid.
///
/// `padding = Some(M)` fixes the padding (checked once against `2M`);
/// otherwise it starts at the default and doubles until every row converges.
pub fn lambda_scan(
    coefficients: &FourierCoefficients,
    n: usize,
    lambdas: &[f64],
    padding: Option<usize>,
    tol: &Tolerances,
) -> Result<LambdaScan> {
    check_lambda_grid(lambdas)?;
    let mut grid = lambdas.to_vec();
    grid.sort_by(f64::total_cmp);
    let weight = WeightFunction::trigonometric(coefficients.clone())?;
    let (w_minus, w_plus) = weight.bounds();
    let c_n = cn_constant(n, w_minus, w_plus);
    let reference_spec = GeometrySpec::circle_weighted(coefficients.clone())?;
    let reference_basis = opuc_basis(coefficients, n, tol)?;
    let points = default_kernel_points(reference_spec.domain());

    let mut m = padding.unwrap_or_else(|| default_padding(n)).max(n);
    loop {
        let reference = PaddedGeometry::build(&reference_spec, n, m, tol)?;
        let reference_doubled = PaddedGeometry::build(&reference_spec, n, 2 * m, tol)?;
        let reference_truncated = reference.truncated(tol)?;
        let reference_projector = crate::ortho::projector(&reference.basis.gram, n, tol)?;

        let rows: Vec<LambdaScanRow> = grid
            .par_iter()
            .map(|&lambda| -> Result<LambdaScanRow> {
                let spec = GeometrySpec::circle_sobolev(coefficients.clone(), lambda)?;
                let padded = PaddedGeometry::build(&spec, n, m, tol)?;
                let doubled = PaddedGeometry::build(&spec, n, 2 * m, tol)?;
                let change = operator_norm(&(&padded.compressed() - &doubled.compressed())).max(operator_norm(
                    &(&reference.compressed() - &reference_doubled.compressed()),
                ));
                let d_res_compressed = operator_norm(&(&padded.compressed() - &reference.compressed()));
                let d_res_truncop_gs = operator_norm(&(&padded.truncated(tol)? - &reference_truncated));
                let d_res_truncop = weighted_truncated_distance(&weight, lambda, 0.0, n, tol)?;
                let projector = crate::ortho::projector(&padded.basis.gram, n, tol)?;
                // both Gram matrices list modes in the same degree order
                let projector_diff = operator_norm(&(&projector - &reference_projector));
                let basis = sobolev_opuc_basis(coefficients, lambda, n, tol)?;
                let alignment = basis_alignment(&reference_basis, &basis, &reference_basis.gram.entries, tol)?;
                let kernel_sup_diff = kernel_distance(&reference_basis, &basis, &points);
                let bound = c_n * lambda;
                Ok(LambdaScanRow {
                    lambda,
                    d_res_compressed,
                    d_res_truncop,
                    d_res_truncop_gs,
                    cn_bound: bound,
                    projector_diff,
                    basis_residual_g1: alignment.residual_g1,
                    basis_residual_g2: alignment.residual_g2,
                    kernel_sup_diff,
                    converged: change < tol.pad_tol,
                    pass: d_res_truncop <= bound + tol.inequality_slack,
                })
            })
            .collect::<Result<_>>()?;

        let converged = rows.iter().all(|r| r.converged);
        if converged || padding.is_some() || 4 * m > tol.pad_cap {
            let slope = loglog_slope(&rows.iter().map(|r| (r.lambda, r.d_res_compressed)).collect::<Vec<_>>());
            return Ok(LambdaScan {
                degree: n,
                padding: m,
                converged,
                cn_constant: c_n,
                rows,
                slope,
            });
        }
        m *= 2;
    }
}

/// `max|Gram(ŵ, λ) - (Gram(ŵ, 0) + λ diag(n²))|`, zero in floating point as
/// well because each diagonal entry is formed by the same single addition.
pub fn riesz_identity_defect(coefficients: &FourierCoefficients, lambda: f64, n: usize) -> f64 {
    let a = circle_gram_entries(coefficients, lambda, n);
    let m = circle_gram_entries(coefficients, 0.0, n);
    let d = derivative_matrix(
        &GeometrySpec::circle_weighted(FourierCoefficients::constant(1.0)).unwrap(),
        n,
    )
    .entries;
    let delta0 = &d.adjoint() * &d;
    (&a - &(&m + &delta0.scale(lambda))).max_abs()
}
