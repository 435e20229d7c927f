//! The Laplacian `Δ = D*D` in orthonormal coordinates, band structure, and
//! classical second-order operators.

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{derivative_matrix_for, gram_matrix_in, BasisFamily, BasisLabel, Domain, GeometrySpec};
use crate::numerics::{bandwidth, hermitian_eigh, DenseMatrix};
use crate::ortho::{coordinate_multiplication, orthonormalize, OrthonormalBasis};

/// `Δ` in the orthonormal basis `p_0, …` of a geometry.
#[derive(Debug, Clone)]
pub struct LaplacianMatrix {
    pub entries: DenseMatrix,
    /// Matrix of `D` between orthonormal coordinates; `entries = B̃* B̃`.
    pub derivative: DenseMatrix,
    pub labels: Vec<BasisLabel>,
    pub geometry: GeometrySpec,
    pub cutoff: usize,
}

impl LaplacianMatrix {
    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self, tol: &Tolerances) -> Result<Vec<f64>> {
        Ok(hermitian_eigh(&self.entries, tol)?.eigenvalues)
    }

    /// `max|Δ - B̃*B̃|`, zero by construction up to rounding.
    pub fn factorization_residual(&self) -> f64 {
        let bb = &self.derivative.adjoint() * &self.derivative;
        (&self.entries - &bb).max_abs()
    }
}

/// `Δ_{mn} = ⟨D p_n, D p_m⟩`.
///
/// The derivation in orthonormal coordinates is the similarity
/// `B̃ = C^{-1} Dc C` (`= L* Dc L^{-*}` with `G = LL*`), and
/// `Δ = B̃* B̃ = C* Dc* G Dc C`.
pub fn assemble_laplacian(basis: &OrthonormalBasis) -> LaplacianMatrix {
    let dc = derivative_matrix_for(&basis.labels, basis.domain()).entries;
    let b = &(&basis.inverse * &dc) * &basis.coefficients;
    let delta = (&b.adjoint() * &b).hermitian_part();
    LaplacianMatrix {
        entries: delta,
        derivative: b,
        labels: basis.labels.clone(),
        geometry: basis.gram.geometry.clone(),
        cutoff: basis.cutoff,
    }
}

/// Builds the Gram matrix in `family`, orthonormalizes it and assembles `Δ`.
pub fn laplacian(spec: &GeometrySpec, n: usize, family: BasisFamily, tol: &Tolerances) -> Result<LaplacianMatrix> {
    let gram = gram_matrix_in(spec, n, family, tol)?;
    Ok(assemble_laplacian(&orthonormalize(&gram, tol)?))
}

/// Band structure of a square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BandProfile {
    pub bandwidth: usize,
    /// `decay[d] = max |M_{ij}|` over `|i - j| = d`.
    pub decay: Vec<f64>,
}

pub fn band_profile(m: &DenseMatrix, tol: &Tolerances) -> BandProfile {
    let n = m.nrows();
    let mut decay = vec![0.0_f64; n.max(1)];
    for j in 0..m.ncols() {
        for i in 0..n {
            let d = i.abs_diff(j);
            decay[d] = decay[d].max(m[(i, j)].norm());
        }
    }
    BandProfile {
        bandwidth: bandwidth(m, tol.band_tol),
        decay,
    }
}

/// Largest off-diagonal magnitude.
pub fn off_diagonal_mass(m: &DenseMatrix) -> f64 {
    let mut mass = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                mass = mass.max(m[(i, j)].norm());
            }
        }
    }
    mass
}

/// `σ(x) f'' + τ(x) f'` with `deg σ ≤ 2`, `deg τ ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalOperatorSpec {
    sigma: [f64; 3],
    tau: [f64; 2],
}

impl ClassicalOperatorSpec {
    /// Coefficients in increasing powers of `x`; trailing entries beyond the
    /// degree bound must vanish.
    pub fn new(sigma: &[f64], tau: &[f64]) -> Result<Self> {
        let fit = |c: &[f64], len: usize, name: &str| -> Result<Vec<f64>> {
            if c.iter().skip(len).any(|&v| v != 0.0) {
                return Err(Error::InvalidArgument(format!("{name} exceeds degree {}", len - 1)));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} has non-finite coefficients")));
            }
            let mut out = vec![0.0; len];
            for (o, &v) in out.iter_mut().zip(c) {
                *o = v;
            }
            Ok(out)
        };
        let s = fit(sigma, 3, "σ")?;
        let t = fit(tau, 2, "τ")?;
        Ok(Self {
            sigma: [s[0], s[1], s[2]],
            tau: [t[0], t[1]],
        })
    }

    pub fn sigma(&self) -> [f64; 3] {
        self.sigma
    }

    pub fn tau(&self) -> [f64; 2] {
        self.tau
    }
}

/// `⟨σ p_n'' + τ p_n', p_m⟩` in the orthonormal basis of an interval geometry.
pub fn classical_operator_matrix(cspec: &ClassicalOperatorSpec, basis: &OrthonormalBasis) -> Result<DenseMatrix> {
    let domain = basis.domain();
    if !matches!(domain, Domain::Interval { .. }) {
        return Err(Error::InvalidArgument(
            "classical operators act on interval geometries".into(),
        ));
    }
    let d = derivative_matrix_for(&basis.labels, domain).entries;
    let x = coordinate_multiplication(&basis.labels, domain);
    let c = |v: f64| Complex64::new(v, 0.0);
    let d2 = &d * &d;
    let xd2 = &x * &d2;
    let xxd2 = &x * &xd2;
    let xd = &x * &d;
    let [s0, s1, s2] = cspec.sigma;
    let [t0, t1] = cspec.tau;
    let mut op = d2.as_matrix() * c(s0);
    op += xd2.as_matrix() * c(s1);
    op += xxd2.as_matrix() * c(s2);
    op += d.as_matrix() * c(t0);
    op += xd.as_matrix() * c(t1);
    let op = DenseMatrix::from_matrix(op)?;
    Ok(&(&basis.inverse * &op) * &basis.coefficients)
}

/// Outcome of an angular-mode decoupling check.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBlockReport {
    pub blocks: usize,
    pub max_cross: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Passes when every cross-mode inner product is below `block_tol`.
pub fn mode_block_check(blocks: &[LaplacianMatrix], cross_terms: &DenseMatrix, tol: &Tolerances) -> ModeBlockReport {
    let max_cross = cross_terms.max_abs();
    ModeBlockReport {
        blocks: blocks.len(),
        max_cross,
        tolerance: tol.block_tol,
        passed: max_cross <= tol.block_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gram_matrix, FourierCoefficients, WeightRepr};
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn circle_uniform_laplacian() {
        for lambda in [0.0, 0.3, 5.0] {
            let spec = GeometrySpec::circle(FourierCoefficients::constant(1.0), lambda).unwrap();
            let basis = orthonormalize(&gram_matrix(&spec, 2).unwrap(), &tol()).unwrap();
            let lap = assemble_laplacian(&basis);
            // listed in natural order −2..2
            let diag: Vec<f64> = lap.entries.real_diagonal();
            let mut by_label: Vec<(i64, f64)> = basis
                .labels
                .iter()
                .zip(&diag)
                .map(|(l, &v)| match *l {
                    BasisLabel::Fourier(n) => (n, v),
                    _ => unreachable!(),
                })
                .collect();
            by_label.sort_by_key(|p| p.0);
            let values: Vec<f64> = by_label.iter().map(|p| p.1).collect();
            let n2 = [4.0, 1.0, 0.0, 1.0, 4.0];
            for (v, e) in values.iter().zip(n2) {
                assert_abs_diff_eq!(*v, e, epsilon = 1e-14);
            }
            assert_abs_diff_eq!(off_diagonal_mass(&lap.entries), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn legendre_laplacian() {
        let spec = GeometrySpec::interval_uniform(-1.0, 1.0).unwrap();
        let lap = laplacian(&spec, 2, BasisFamily::Canonical, &tol()).unwrap();
        assert_abs_diff_eq!(lap.entries[(1, 1)].re, 3.0, epsilon = 1e-12);
        for k in 0..3 {
            assert_abs_diff_eq!(lap.entries[(0, k)].norm(), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(lap.entries[(k, 0)].norm(), 0.0, epsilon = 1e-14);
        }
        // p_2' = 3√(5/2) x, ‖p_2'‖² = 15
        assert_abs_diff_eq!(lap.entries[(2, 2)].re, 15.0, epsilon = 1e-11);
        assert!(lap.factorization_residual() < 1e-12);
    }

    #[test]
    fn band_examples() {
        let d = DenseMatrix::from_real_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(band_profile(&d, &tol()).bandwidth, 0);
        let t = DenseMatrix::from_real_rows(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
        let p = band_profile(&t, &tol());
        assert_eq!(p.bandwidth, 1);
        assert_eq!(p.decay, vec![1.0, 1.0, 0.0]);
        let b = DenseMatrix::from_real_rows(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0]]).unwrap();
        assert!(band_profile(&(&b.adjoint() * &b), &tol()).bandwidth <= 2);
    }

    #[test]
    fn legendre_operator_is_diagonal() {
        let spec = GeometrySpec::interval_uniform(-1.0, 1.0).unwrap();
        let cspec = ClassicalOperatorSpec::new(&[1.0, 0.0, -1.0], &[0.0, -2.0]).unwrap();
        let basis = orthonormalize(&gram_matrix(&spec, 6).unwrap(), &tol()).unwrap();
        let m = classical_operator_matrix(&cspec, &basis).unwrap();
        for n in 0..7 {
            assert_abs_diff_eq!(m[(n, n)].re, -((n * (n + 1)) as f64), epsilon = 1e-9);
        }
        assert!(off_diagonal_mass(&m) < 1e-9);

        let zero = ClassicalOperatorSpec::new(&[0.0], &[0.0]).unwrap();
        assert_eq!(classical_operator_matrix(&zero, &basis).unwrap().max_abs(), 0.0);
        assert!(ClassicalOperatorSpec::new(&[0.0, 0.0, 0.0, 1.0], &[]).is_err());
    }

    #[test]
    fn truncated_hermite_is_nearly_diagonal() {
        let spec = GeometrySpec::interval_weighted(-5.0, 5.0, WeightRepr::ExpPolynomial(vec![0.0, 0.0, -1.0])).unwrap();
        let cspec = ClassicalOperatorSpec::new(&[1.0], &[0.0, -2.0]).unwrap();
        let gram = gram_matrix_in(&spec, 6, BasisFamily::Stable, &tol()).unwrap();
        let basis = orthonormalize(&gram, &tol()).unwrap();
        let m = classical_operator_matrix(&cspec, &basis).unwrap();
        let mass = off_diagonal_mass(&m);
        // truncating the domain at ±5 leaves a small but visible coupling
        assert!(mass < 1e-3 && mass > 1e-12, "mass {mass}");
        for n in 0..7 {
            assert_abs_diff_eq!(m[(n, n)].re, -2.0 * n as f64, epsilon = 1e-3);
        }
    }

    #[test]
    fn mode_check_thresholds() {
        let spec = GeometrySpec::interval_uniform(-1.0, 1.0).unwrap();
        let lap = laplacian(&spec, 2, BasisFamily::Canonical, &tol()).unwrap();
        let small = DenseMatrix::from_real_rows(&[&[1e-13]]).unwrap();
        assert!(mode_block_check(std::slice::from_ref(&lap), &small, &tol()).passed);
        let big = DenseMatrix::from_real_rows(&[&[1e-3]]).unwrap();
        assert!(!mode_block_check(&[lap], &big, &tol()).passed);
    }

    #[test]
    fn sobolev_laplacian_is_psd() {
        let spec = GeometrySpec::interval_sobolev(-1.0, 2.0, vec![1.0, 0.5, 0.1]).unwrap();
        let lap = laplacian(&spec, 12, BasisFamily::Stable, &tol()).unwrap();
        let ev = lap.eigenvalues(&tol()).unwrap();
        assert!(ev[0] >= -1e-10 * ev.last().unwrap());
    }
}
