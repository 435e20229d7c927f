//! Thin annulus `1-ε ≤ r² ≤ 1+ε`: angular mode reduction and the collapse
//! of each radial mode geometry onto a Sobolev geometry on `[-1, 1]`.
//!
//! A mode-`m` polynomial is `r^{|m|} q(r²) e^{imθ}`. With `t = r² = 1 + εu`
//! the radial factor `q` becomes a polynomial in `u ∈ [-1, 1]` and the order-`s`
//! form reduces to an interval form in `u` (see [`GeometryKind::AnnulusRadialMode`]).
//! Distances to the limit are taken after dividing each Gram matrix by the
//! squared norm of the constant, which removes the vanishing volume factor.
//!
//! The radial weights follow the `t = r²` substitution; they are a
//! reconstruction and not a statement about any particular published form.
//!
//! [`GeometryKind::AnnulusRadialMode`]: crate::geometry::GeometryKind::AnnulusRadialMode

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{
    basis_derivatives, integer_order, BasisFamily, BasisLabel, Domain, FourierCoefficients, GeometrySpec,
};
use crate::laplacian::{laplacian, mode_block_check, LaplacianMatrix, ModeBlockReport};
use crate::numerics::{operator_norm, DenseMatrix};
use crate::ortho::{orthonormalize, projector};
use crate::quadrature::{uniform_angles, GaussLegendre};
use crate::resolvent::{basis_alignment, converge_padding, GramSource, Normalized};

/// Radial geometry of angular mode `m` for the order-`s` Sobolev form.
pub fn radial_mode_geometry(epsilon: f64, mode: i32, order: f64) -> Result<GeometrySpec> {
    let s = integer_order(order)?;
    Ok(GeometrySpec::annulus_radial_mode(epsilon, mode, s)?)
}

/// Order-`s` Sobolev geometry on `[-1, 1]` with unit coefficients.
pub fn limit_geometry(order: u32) -> GeometrySpec {
    GeometrySpec::interval_sobolev(-1.0, 1.0, vec![1.0; order as usize + 1])
        .expect("unit coefficients on [-1, 1] are valid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusScanRow {
    pub epsilon: f64,
    pub mode: i32,
    pub d_res: f64,
    pub projector_diff: f64,
    /// Gauge-aligned basis mismatch, the larger of the two geometry norms.
    pub basis_residual: f64,
    pub padding: usize,
    pub converged: bool,
    /// Converged, and `d_res` did not grow past the jitter allowance
    /// relative to the previous row.
    pub pass: bool,
}

pub const EPSILON_CSV_HEADER: &str = "epsilon,mode,d_res,projector_diff,basis_residual,verdict";

impl AnnulusScanRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{}",
            self.epsilon,
            self.mode,
            self.d_res,
            self.projector_diff,
            self.basis_residual,
            if self.pass { "pass" } else { "fail" }
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonScan {
    pub mode: i32,
    pub order: u32,
    pub degree: usize,
    pub rows: Vec<AnnulusScanRow>,
}

impl EpsilonScan {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// Relative growth allowed between consecutive distances.
pub const MONOTONE_JITTER: f64 = 0.1;
/// Distances below this are treated as equal for the monotonicity check.
pub const JITTER_FLOOR: f64 = 1e-12;

/// Whether `values` is nonincreasing up to [`MONOTONE_JITTER`] and [`JITTER_FLOOR`].
pub fn nonincreasing_with_jitter(values: &[f64]) -> bool {
    values
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + MONOTONE_JITTER) + JITTER_FLOOR)
}

fn check_epsilon_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::InvalidGrid(format!(
            "need at least 4 ε values, got {}",
            grid.len()
        )));
    }
    if let Some(bad) = grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::InvalidGrid(format!("ε must lie in (0, 1), got {bad}")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidGrid("ε grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// Distance from the normalized mode-`m` radial geometry to the normalized
/// limit geometry, for every `ε` in a strictly decreasing grid.
pub fn epsilon_scan(
    mode: i32,
    order: f64,
    n: usize,
    grid: &[f64],
    padding: Option<usize>,
    tol: &Tolerances,
) -> Result<EpsilonScan> {
    let s = integer_order(order)?;
    check_epsilon_grid(grid)?;
    let limit = Normalized(limit_geometry(s));
    let limit_basis = orthonormalize(&limit.gram(n, tol)?, tol)?;

    let mut rows: Vec<AnnulusScanRow> = grid
        .par_iter()
        .map(|&epsilon| -> Result<AnnulusScanRow> {
            let radial = Normalized(radial_mode_geometry(epsilon, mode, order)?);
            let (geoms, status) = converge_padding(&[&radial, &limit], n, padding, tol)?;
            let d_res = operator_norm(&(&geoms[0].compressed() - &geoms[1].compressed()));
            let m = status.padding;
            let projector_diff = operator_norm(
                &(&projector(&radial.gram(m, tol)?, n, tol)? - &projector(&limit.gram(m, tol)?, n, tol)?),
            );
            let basis = orthonormalize(&radial.gram(n, tol)?, tol)?;
            let alignment = basis_alignment(&limit_basis, &basis, &limit_basis.gram.entries, tol)?;
            Ok(AnnulusScanRow {
                epsilon,
                mode,
                d_res,
                projector_diff,
                basis_residual: alignment.residual_g1.max(alignment.residual_g2),
                padding: m,
                converged: status.converged,
                pass: status.converged,
            })
        })
        .collect::<Result<_>>()?;

    for i in 1..rows.len() {
        let ok = nonincreasing_with_jitter(&[rows[i - 1].d_res, rows[i].d_res]);
        rows[i].pass &= ok;
    }
    Ok(EpsilonScan {
        mode,
        order: s,
        degree: n,
        rows,
    })
}

/// Radial blocks for several angular modes and the inner products between
/// different modes, computed on a uniform angular grid.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub modes: Vec<i32>,
    pub blocks: Vec<LaplacianMatrix>,
    /// Rows and columns indexed by `(mode, degree)`, mode-major; same-mode
    /// blocks are zero.
    pub cross: DenseMatrix,
}

/// Builds the per-mode Laplacians and the cross-mode inner products on the
/// annulus of half-width `ε`. The angular measure is `a(θ) dθ/2π` with
/// `a ≡ 1` unless `angular_weight` is given; a non-constant `a` breaks
/// rotation invariance and couples modes.
///
/// Each cross entry is a radial integral times `∫ a(θ) e^{i(m'-m)θ} dθ/2π`,
/// with the angular integral done by the trapezoid rule, which is exact for
/// the trigonometric polynomials involved.
pub fn mode_decomposition(
    epsilon: f64,
    modes: &[i32],
    order: f64,
    n: usize,
    angular_weight: Option<&FourierCoefficients>,
    tol: &Tolerances,
) -> Result<ModeDecomposition> {
    let s = integer_order(order)? as usize;
    if modes.is_empty() {
        return Err(Error::InvalidArgument("no angular modes given".into()));
    }
    let blocks = modes
        .iter()
        .map(|&m| laplacian(&radial_mode_geometry(epsilon, m, order)?, n, BasisFamily::Stable, tol))
        .collect::<Result<Vec<_>>>()?;

    let max_mode = modes.iter().map(|m| m.unsigned_abs() as usize).max().unwrap_or(0);
    let a_degree = angular_weight.map_or(0, FourierCoefficients::degree);
    let angles = uniform_angles(2 * max_mode + a_degree + 8);
    let angular = |d: i64| -> Complex64 {
        let sum: Complex64 = angles
            .iter()
            .map(|&theta| {
                let a = angular_weight.map_or(1.0, |w| w.evaluate(theta));
                Complex64::from_polar(a, d as f64 * theta)
            })
            .sum();
        sum / angles.len() as f64
    };

    let labels: Vec<BasisLabel> = (0..=n).map(BasisLabel::Legendre).collect();
    let domain = Domain::Interval { a: -1.0, b: 1.0 };
    let rule = GaussLegendre::new(n + max_mode + s + 16);
    let tables: Vec<(f64, f64, Vec<Vec<f64>>)> = rule
        .mapped(-1.0, 1.0)
        .into_iter()
        .map(|(u, w)| (u, w, basis_derivatives(&labels, domain, u, s)))
        .collect();
    let radial = |m1: usize, m2: usize, i: usize, j: usize| -> f64 {
        tables
            .iter()
            .map(|(u, w, d)| {
                let t: f64 = 1.0 + epsilon * u;
                (0..=s)
                    .map(|k| 0.5 * epsilon * t.powf((m1 + m2) as f64 / 2.0 + k as f64) * d[k][i] * d[k][j])
                    .sum::<f64>()
                    * w
            })
            .sum()
    };

    let dim = n + 1;
    let total = modes.len() * dim;
    let phases: Vec<Vec<Complex64>> = modes
        .iter()
        .map(|&m1| modes.iter().map(|&m2| angular(i64::from(m2) - i64::from(m1))).collect())
        .collect();
    let cross = DenseMatrix::from_fn(total, total, |r, c| {
        let (p, i) = (r / dim, r % dim);
        let (q, j) = (c / dim, c % dim);
        if p == q {
            return Complex64::new(0.0, 0.0);
        }
        let m1 = modes[p].unsigned_abs() as usize;
        let m2 = modes[q].unsigned_abs() as usize;
        phases[p][q] * radial(m1, m2, i, j)
    })?;
    Ok(ModeDecomposition {
        modes: modes.to_vec(),
        blocks,
        cross,
    })
}

/// Block-diagonality check for the modes `-max_mode..=max_mode` on a
/// rotation-invariant annulus.
pub fn block_diagonalization_check(
    epsilon: f64,
    max_mode: i32,
    order: f64,
    n: usize,
    tol: &Tolerances,
) -> Result<ModeBlockReport> {
    let modes: Vec<i32> = (-max_mode..=max_mode).collect();
    let d = mode_decomposition(epsilon, &modes, order, n, None, tol)?;
    Ok(mode_block_check(&d.blocks, &d.cross, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::SpecError;
    use crate::resolvent::resolvent_distance;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    const GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

    #[test]
    fn fractional_order_rejected() {
        assert!(matches!(
            radial_mode_geometry(0.1, 0, 0.5),
            Err(Error::Spec(SpecError::UnsupportedOrder(_)))
        ));
        assert!(matches!(
            epsilon_scan(0, 1.5, 3, &GRID, None, &tol()),
            Err(Error::Spec(SpecError::UnsupportedOrder(_)))
        ));
    }

    #[test]
    fn grid_validation() {
        for grid in [
            &[1e-1, 1e-2, 1e-3][..],
            &[1e-1, 1e-3, 1e-2, 1e-4],
            &[2.0, 1e-1, 1e-2, 1e-3],
            &[1e-1, 1e-1, 1e-2, 1e-3],
        ] {
            assert!(matches!(
                epsilon_scan(0, 0.0, 3, grid, None, &tol()),
                Err(Error::InvalidGrid(_))
            ));
        }
    }

    #[test]
    fn zero_order_zero_mode_is_flat() {
        let scan = epsilon_scan(0, 0.0, 6, &GRID, None, &tol()).unwrap();
        assert!(scan.all_pass());
        assert!(scan.rows.iter().all(|r| r.d_res <= 1e-6), "{:?}", scan.rows);
    }

    #[test]
    fn first_order_collapse() {
        let scan = epsilon_scan(0, 1.0, 6, &GRID, None, &tol()).unwrap();
        assert!(scan.all_pass(), "{:?}", scan.rows);
        let d: Vec<f64> = scan.rows.iter().map(|r| r.d_res).collect();
        assert!(nonincreasing_with_jitter(&d));
        assert!(d[3] <= 1e-4 && d[0] > d[3], "{d:?}");
        let b: Vec<f64> = scan.rows.iter().map(|r| r.basis_residual).collect();
        assert!(b.windows(2).all(|w| w[1] < w[0]), "{b:?}");
        assert!(scan.rows.iter().map(|r| r.epsilon).collect::<Vec<_>>() == GRID);
    }

    #[test]
    fn nonzero_mode_scan() {
        let scan = epsilon_scan(2, 1.0, 4, &GRID, None, &tol()).unwrap();
        assert!(scan.all_pass(), "{:?}", scan.rows);
        assert!(scan.rows[3].d_res < 1e-3);
    }

    #[test]
    fn triangle_through_limit() {
        let (n, m) = (5, 32);
        let a = Normalized(radial_mode_geometry(0.1, 0, 1.0).unwrap());
        let b = Normalized(radial_mode_geometry(0.01, 0, 1.0).unwrap());
        let limit = Normalized(limit_geometry(1));
        let ab = resolvent_distance(&a, &b, n, m, &tol()).unwrap();
        let al = resolvent_distance(&a, &limit, n, m, &tol()).unwrap();
        let bl = resolvent_distance(&b, &limit, n, m, &tol()).unwrap();
        assert!(ab <= al + bl + 1e-12);
        assert!(al <= ab + bl + 1e-12);
    }

    #[test]
    fn modes_decouple() {
        for order in [0.0, 1.0, 2.0] {
            let r = block_diagonalization_check(0.2, 3, order, 4, &tol()).unwrap();
            assert!(r.passed && r.blocks == 7, "{r:?}");
        }
    }

    #[test]
    fn tilted_angular_weight_couples_neighbours() {
        let a = FourierCoefficients::cosine(1.0, 0.4);
        let d = mode_decomposition(0.2, &[0, 1, 3], 0.0, 2, Some(&a), &tol()).unwrap();
        let r = mode_block_check(&d.blocks, &d.cross, &tol());
        assert!(!r.passed);
        // modes 0 and 1 differ by the weight's degree; 1 and 3 do not
        assert!(d.cross[(0, 3)].norm() > 1e-3);
        assert!(d.cross[(3, 6)].norm() < 1e-12);
    }
}
