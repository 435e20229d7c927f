//! Truncated resolvents, resolvent distance, and the stability certificate
//! comparing two geometries at fixed degree.
//!
//! Each geometry is represented in its own Gram–Schmidt coordinates: the
//! orthonormal polynomials `p_0, p_1, …` listed by degree. Identifying the
//! `k`-th orthonormal polynomial of one geometry with the `k`-th of the other
//! is a unitary identification of both spaces with the same coordinate space,
//! under which the degree projector `P_N` is the same leading coordinate block
//! for every geometry. Resolvent distances are operator norms there.
//! Projector differences are measured in flat coordinates (Fourier modes on
//! the circle, normalized Legendre polynomials on intervals).

use num_complex::Complex64;
use serde::Serialize;

use crate::circle;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{gram_matrix_in, BasisFamily, Domain, GeometrySpec, GramMatrix};
use crate::laplacian::{assemble_laplacian, LaplacianMatrix};
use crate::numerics::{hermitian_eigh, inverse_hpd, operator_norm, polar_unitary, DenseMatrix, NumericsError};
use crate::ortho::{default_kernel_points, orthonormalize, projector, reproducing_kernel, OrthonormalBasis};

/// Anything that produces Gram matrices of one fixed inner product at any cutoff.
pub trait GramSource: Sync {
    fn spec(&self) -> &GeometrySpec;
    fn gram(&self, n: usize, tol: &Tolerances) -> Result<GramMatrix>;
}

/// Interval geometries use the Legendre family, which stays well conditioned
/// at padding cutoffs.
impl GramSource for GeometrySpec {
    fn spec(&self) -> &GeometrySpec {
        self
    }

    fn gram(&self, n: usize, tol: &Tolerances) -> Result<GramMatrix> {
        gram_matrix_in(self, n, BasisFamily::Stable, tol)
    }
}

/// A geometry rescaled so that the constant function has unit norm.
#[derive(Debug, Clone)]
pub struct Normalized(pub GeometrySpec);

impl GramSource for Normalized {
    fn spec(&self) -> &GeometrySpec {
        &self.0
    }

    fn gram(&self, n: usize, tol: &Tolerances) -> Result<GramMatrix> {
        let g = self.0.gram(n, tol)?;
        let one = g
            .constant_norm_sqr()
            .ok_or_else(|| Error::InvalidArgument("constant function is not in the basis".into()))?;
        Ok(g.scaled(1.0 / one))
    }
}

/// Default padding cutoff for degree `n`.
pub fn default_padding(n: usize) -> usize {
    (4 * n).max(n + 16)
}

fn check_compatible(a: &GeometrySpec, b: &GeometrySpec) -> Result<()> {
    match (a.domain(), b.domain()) {
        (Domain::Circle, Domain::Circle) => Ok(()),
        (Domain::Interval { a: a1, b: b1 }, Domain::Interval { a: a2, b: b2 }) if a1 == a2 && b1 == b2 => Ok(()),
        (d1, d2) => Err(Error::IncompatibleGeometries(format!(
            "canonical bases differ: {d1:?} versus {d2:?}"
        ))),
    }
}

/// `(compressed, truncated)` for a Hermitian `Δ` and leading block size `k`:
/// the leading `k × k` block of `(I + Δ)^{-1}`, and `(I + Δ_kk)^{-1}`.
pub fn compress_and_truncate(delta: &DenseMatrix, k: usize, tol: &Tolerances) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = delta.nrows();
    if k > n {
        return Err(Error::InvalidArgument(format!("block size {k} exceeds dimension {n}")));
    }
    let full = inverse_hpd(&(&DenseMatrix::identity(n) + delta), tol)?;
    let block = delta.block(0, 0, k, k);
    let truncated = inverse_hpd(&(&DenseMatrix::identity(k) + &block), tol)?;
    Ok((full.block(0, 0, k, k), truncated))
}

/// One geometry at padding cutoff `M`, resolved to degree `N`.
#[derive(Debug, Clone)]
pub struct PaddedGeometry {
    pub basis: OrthonormalBasis,
    pub laplacian: LaplacianMatrix,
    /// `(I + Δ)^{-1}` at cutoff `M`.
    pub resolvent: DenseMatrix,
    /// Number of orthonormal polynomials of degree `≤ N`.
    pub block: usize,
    pub padding: usize,
}

impl PaddedGeometry {
    pub fn build(source: &dyn GramSource, n: usize, m: usize, tol: &Tolerances) -> Result<Self> {
        if n > m {
            return Err(Error::InvalidArgument(format!("degree {n} exceeds padding {m}")));
        }
        let basis = orthonormalize(&source.gram(m, tol)?, tol)?;
        let laplacian = assemble_laplacian(&basis);
        let dim = laplacian.dimension();
        let resolvent = inverse_hpd(&(&DenseMatrix::identity(dim) + &laplacian.entries), tol)?;
        let block = basis.labels.iter().filter(|l| l.degree() <= n).count();
        Ok(Self {
            basis,
            laplacian,
            resolvent,
            block,
            padding: m,
        })
    }

    /// `P_N (I + Δ)^{-1} P_N`.
    pub fn compressed(&self) -> DenseMatrix {
        self.resolvent.block(0, 0, self.block, self.block)
    }

    /// `(I + P_N Δ P_N)^{-1}`; independent of the padding since `D` does not raise degree.
    pub fn truncated(&self, tol: &Tolerances) -> Result<DenseMatrix> {
        let k = self.block;
        let block = self.laplacian.entries.block(0, 0, k, k);
        Ok(inverse_hpd(&(&DenseMatrix::identity(k) + &block), tol)?)
    }
}

/// Both truncations of the resolvent of one geometry.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventPair {
    pub compressed: DenseMatrix,
    pub truncated: DenseMatrix,
    pub padding: usize,
    /// Whether doubling the padding moved `compressed` by less than `pad_tol`.
    pub converged: bool,
    /// `‖R_compressed(2M) - R_compressed(M)‖`.
    pub padding_change: f64,
}

/// Padding outcome shared by one or more geometries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaddingStatus {
    pub padding: usize,
    pub converged: bool,
    pub change: f64,
}

/// Builds every source at `M` and `2M`. With `padding = Some(M)` that single
/// check is final; otherwise `M` starts at [`default_padding`] and doubles
/// until the compressed resolvents of all sources move less than `pad_tol`,
/// or `2M` would exceed `pad_cap`.
pub fn converge_padding(
    sources: &[&dyn GramSource],
    n: usize,
    padding: Option<usize>,
    tol: &Tolerances,
) -> Result<(Vec<PaddedGeometry>, PaddingStatus)> {
    let build_all = |m: usize| -> Result<Vec<PaddedGeometry>> {
        sources.iter().map(|s| PaddedGeometry::build(*s, n, m, tol)).collect()
    };
    let change_between = |a: &[PaddedGeometry], b: &[PaddedGeometry]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| operator_norm(&(&x.compressed() - &y.compressed())))
            .fold(0.0, f64::max)
    };
    let mut m = padding.unwrap_or_else(|| default_padding(n)).max(n);
    let mut current = build_all(m)?;
    loop {
        let doubled_m = (2 * m).max(m + 1);
        if padding.is_none() && doubled_m > tol.pad_cap {
            return Ok((
                current,
                PaddingStatus {
                    padding: m,
                    converged: false,
                    change: f64::NAN,
                },
            ));
        }
        let doubled = build_all(doubled_m)?;
        let change = change_between(&current, &doubled);
        let converged = change < tol.pad_tol;
        if converged || padding.is_some() {
            return Ok((
                current,
                PaddingStatus {
                    padding: m,
                    converged,
                    change,
                },
            ));
        }
        m = doubled_m;
        current = doubled;
    }
}

/// Compressed and truncated resolvents of one geometry at degree `n`.
pub fn truncated_resolvents(
    source: &dyn GramSource,
    n: usize,
    padding: Option<usize>,
    tol: &Tolerances,
) -> Result<ResolventPair> {
    let (geoms, status) = converge_padding(&[source], n, padding, tol)?;
    let g = &geoms[0];
    Ok(ResolventPair {
        compressed: g.compressed(),
        truncated: g.truncated(tol)?,
        padding: status.padding,
        converged: status.converged,
        padding_change: status.change,
    })
}

/// `‖P_N(I+Δ₁)^{-1}P_N - P_N(I+Δ₂)^{-1}P_N‖` at the fixed padding `m`.
pub fn resolvent_distance(
    g1: &dyn GramSource,
    g2: &dyn GramSource,
    n: usize,
    m: usize,
    tol: &Tolerances,
) -> Result<f64> {
    check_compatible(g1.spec(), g2.spec())?;
    let (a, b) = rayon::join(
        || PaddedGeometry::build(g1, n, m, tol),
        || PaddedGeometry::build(g2, n, m, tol),
    );
    let (a, b) = (a?, b?);
    Ok(operator_norm(&(&a.compressed() - &b.compressed())))
}

/// Largest gap between the sorted eigenvalues of two Hermitian matrices.
pub fn weyl_gap(r1: &DenseMatrix, r2: &DenseMatrix, tol: &Tolerances) -> Result<f64> {
    if r1.shape() != r2.shape() {
        return Err(NumericsError::DimensionMismatch {
            left: r1.shape(),
            right: r2.shape(),
        }
        .into());
    }
    let e1 = hermitian_eigh(r1, tol)?.eigenvalues;
    let e2 = hermitian_eigh(r2, tol)?.eigenvalues;
    Ok(e1.iter().zip(&e2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `‖P_N^{(1)} - P_N^{(2)}‖` in flat coordinates at padding `m`.
pub fn projector_stability(
    g1: &dyn GramSource,
    g2: &dyn GramSource,
    n: usize,
    m: usize,
    tol: &Tolerances,
) -> Result<f64> {
    check_compatible(g1.spec(), g2.spec())?;
    if n > m {
        return Err(Error::InvalidArgument(format!("degree {n} exceeds padding {m}")));
    }
    let p1 = projector(&g1.gram(m, tol)?, n, tol)?;
    let p2 = projector(&g2.gram(m, tol)?, n, tol)?;
    Ok(operator_norm(&(&p1 - &p2)))
}

/// Gauge unitary between two orthonormal bases and the remaining mismatch.
#[derive(Debug, Clone, Serialize)]
pub struct BasisAlignment {
    /// `U = polar(W)`, `W_{kj} = ⟨p_k^{(1)}, p_j^{(2)}⟩`.
    pub unitary: DenseMatrix,
    /// `max_k ‖p_k^{(1)} - Σ_j U_{kj} p_j^{(2)}‖` in the first geometry's norm.
    pub residual_g1: f64,
    /// The same in the second geometry's norm.
    pub residual_g2: f64,
    /// The same in flat coordinates.
    pub residual_flat: f64,
}

fn max_column_norm(r: &DenseMatrix, metric: &DenseMatrix) -> f64 {
    let gr = metric * r;
    (0..r.ncols())
        .map(|k| {
            let s: Complex64 = (0..r.nrows()).map(|i| r[(i, k)].conj() * gr[(i, k)]).sum();
            s.re.max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Aligns `b2` to `b1` with the polar factor of their cross-Gram matrix in `metric`.
pub fn basis_alignment(
    b1: &OrthonormalBasis,
    b2: &OrthonormalBasis,
    metric: &DenseMatrix,
    tol: &Tolerances,
) -> Result<BasisAlignment> {
    if b1.labels != b2.labels {
        return Err(Error::IncompatibleGeometries(
            "bases are expressed in different canonical coordinates".into(),
        ));
    }
    let c1 = &b1.coefficients;
    let c2 = &b2.coefficients;
    let w = (&(&c2.adjoint() * metric) * c1).transpose();
    let u = polar_unitary(&w, tol)?;
    let residual = c1 - &(c2 * &u.transpose());
    let flat = DenseMatrix::identity(metric.nrows());
    Ok(BasisAlignment {
        residual_g1: max_column_norm(&residual, &b1.gram.entries),
        residual_g2: max_column_norm(&residual, &b2.gram.entries),
        residual_flat: max_column_norm(&residual, &flat),
        unitary: u,
    })
}

/// `max |K^{(1)}(x, y) - K^{(2)}(x, y)|` over the grid `points × points`.
pub fn kernel_distance(b1: &OrthonormalBasis, b2: &OrthonormalBasis, points: &[f64]) -> f64 {
    let k1 = reproducing_kernel(b1, points, points);
    let k2 = reproducing_kernel(b2, points, points);
    (&k1.values - &k2.values).max_abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Not judged because padding did not converge.
    Withheld,
}

/// One checked inequality `lhs ≤ rhs + slack`.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub verdict: Verdict,
}

/// Flat-versus-geometry norm distortion `lower ≤ ‖f‖_G / ‖f‖_flat ≤ upper` on `𝒫_{≤N}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormEquivalence {
    pub lower: f64,
    pub upper: f64,
}

/// Full comparison of two geometries at degree `N`.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityCertificate {
    pub degree: usize,
    pub padding: PaddingStatus,
    /// `‖P_N(I+Δ₁)^{-1}P_N - P_N(I+Δ₂)^{-1}P_N‖`.
    pub d_res: f64,
    /// `‖(I+Δ₁)^{-1} - (I+Δ₂)^{-1}‖` at the padding cutoff.
    pub d_res_padded: f64,
    /// `‖(I+P_NΔ₁P_N)^{-1} - (I+P_NΔ₂P_N)^{-1}‖`.
    pub d_res_truncated: f64,
    pub weyl_gap: f64,
    pub projector_diff: f64,
    pub alignment: BasisAlignment,
    pub kernel_sup_diff: f64,
    /// Circle pairs differing only in `λ`: the explicit constant `C_N(w)`.
    pub bound_constant: Option<f64>,
    /// Circle pairs: truncated resolvent difference measured as in the
    /// finite-dimensional bound (operators on `𝒯_{≤N}` with the `L²(w)` norm).
    pub d_res_weighted: Option<f64>,
    pub norm_equivalence: [NormEquivalence; 2],
    pub checks: Vec<InequalityCheck>,
}

impl StabilityCertificate {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn any_fail(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == Verdict::Fail)
    }
}

fn norm_equivalence(gram: &GramMatrix, tol: &Tolerances) -> Result<NormEquivalence> {
    let ev = hermitian_eigh(&gram.entries, tol)?.eigenvalues;
    Ok(NormEquivalence {
        lower: ev.first().copied().unwrap_or(0.0).max(0.0).sqrt(),
        upper: ev.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
    })
}

/// The circle pair `(ŵ, λ)` versus `(ŵ, 0)` in either order, as `(weight, λ)`.
fn circle_lambda_pair(a: &GeometrySpec, b: &GeometrySpec) -> Option<(crate::geometry::WeightFunction, f64)> {
    let (wa, la) = (a.circle_weight()?, a.circle_lambda()?);
    let (wb, lb) = (b.circle_weight()?, b.circle_lambda()?);
    if wa.fourier() != wb.fourier() {
        return None;
    }
    match (la == 0.0, lb == 0.0) {
        (true, _) => Some((wa.clone(), lb)),
        (_, true) => Some((wa.clone(), la)),
        _ => None,
    }
}

/// Compares two geometries at degree `n`.
///
/// `padding = None` selects the padding adaptively; `kernel_points = None`
/// uses [`default_kernel_points`].
pub fn stability_certificate(
    g1: &dyn GramSource,
    g2: &dyn GramSource,
    n: usize,
    padding: Option<usize>,
    kernel_points: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<StabilityCertificate> {
    check_compatible(g1.spec(), g2.spec())?;
    let (padded, status) = converge_padding(&[g1, g2], n, padding, tol)?;
    let (p1, p2) = (&padded[0], &padded[1]);

    let r1 = p1.compressed();
    let r2 = p2.compressed();
    let d_res = operator_norm(&(&r1 - &r2));
    let d_res_padded = operator_norm(&(&p1.resolvent - &p2.resolvent));
    let d_res_truncated = operator_norm(&(&p1.truncated(tol)? - &p2.truncated(tol)?));
    let weyl = weyl_gap(&r1, &r2, tol)?;
    let projector_diff = projector_stability(g1, g2, n, status.padding, tol)?;

    let gram1 = g1.gram(n, tol)?;
    let gram2 = g2.gram(n, tol)?;
    let b1 = orthonormalize(&gram1, tol)?;
    let b2 = orthonormalize(&gram2, tol)?;
    let alignment = basis_alignment(&b1, &b2, &b1.gram.entries, tol)?;
    let default_points;
    let points = match kernel_points {
        Some(p) => p,
        None => {
            default_points = default_kernel_points(g1.spec().domain());
            &default_points
        }
    };
    let kernel_sup_diff = kernel_distance(&b1, &b2, points);
    let norm_eq = [norm_equivalence(&gram1, tol)?, norm_equivalence(&gram2, tol)?];

    let judge = |name: &str, lhs: f64, rhs: f64| {
        let slack = tol.inequality_slack;
        let verdict = if !status.converged {
            Verdict::Withheld
        } else if lhs <= rhs + slack {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        InequalityCheck {
            name: name.into(),
            lhs,
            rhs,
            slack,
            verdict,
        }
    };
    let mut checks = vec![
        judge("weyl_gap <= d_res", weyl, d_res),
        judge("d_res <= d_res_padded", d_res, d_res_padded),
    ];
    let unitary_defect = {
        let u = &alignment.unitary;
        (&(&u.adjoint() * u) - &DenseMatrix::identity(u.nrows())).max_abs()
    };
    checks.push(judge(
        "gauge unitary defect <= ortho_tol",
        unitary_defect,
        tol.ortho_tol,
    ));

    let (mut bound_constant, mut d_res_weighted) = (None, None);
    if let Some((weight, lambda)) = circle_lambda_pair(g1.spec(), g2.spec()) {
        let (w_minus, w_plus) = weight.bounds();
        let c_n = circle::cn_constant(n, w_minus, w_plus);
        let weighted = circle::weighted_truncated_distance(&weight, lambda, 0.0, n, tol)?;
        checks.push(judge("d_res <= C_N(w) lambda", d_res, c_n * lambda));
        checks.push(judge("d_res_weighted <= C_N(w) lambda", weighted, c_n * lambda));
        bound_constant = Some(c_n);
        d_res_weighted = Some(weighted);
    }

    Ok(StabilityCertificate {
        degree: n,
        padding: status,
        d_res,
        d_res_padded,
        d_res_truncated,
        weyl_gap: weyl,
        projector_diff,
        alignment,
        kernel_sup_diff,
        bound_constant,
        d_res_weighted,
        norm_equivalence: norm_eq,
        checks,
    })
}
