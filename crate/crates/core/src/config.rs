//! Numerical tolerances shared by every pipeline.

use serde::{Deserialize, Serialize};

/// Tolerances and caps used throughout the crate.
///
/// Every field has a default; a partial TOML/JSON document overrides only the
/// keys it names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Admissible `max|H - H*|` relative to `‖H‖_F` for Hermitian inputs.
    pub hermit_tol: f64,
    /// Admissible eigen-residual `‖Hv - λv‖` relative to `‖H‖_F`.
    pub eig_tol: f64,
    /// Smallest admissible singular value relative to the largest one.
    pub singular_tol: f64,
    /// Smallest admissible Gram eigenvalue relative to the largest one.
    pub pd_tol: f64,
    /// Admissible `max|C*GC - I|` for an orthonormalized basis.
    pub ortho_tol: f64,
    /// Entries below `band_tol · max|M|` count as zero in band detection.
    pub band_tol: f64,
    /// Padding is converged once doubling moves the compressed resolvent less than this.
    pub pad_tol: f64,
    /// Largest padding cutoff the doubling loop may reach.
    pub pad_cap: usize,
    /// Smallest admissible weight value.
    pub weight_floor: f64,
    /// Relative stopping threshold for composite quadrature refinement.
    pub quad_tol: f64,
    /// Cross-mode inner products below this count as vanishing.
    pub block_tol: f64,
    /// Absolute slack granted to every certified inequality.
    pub inequality_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermit_tol: 1e-10,
            eig_tol: 1e-10,
            singular_tol: 1e-12,
            pd_tol: 1e-14,
            ortho_tol: 1e-10,
            band_tol: 1e-9,
            pad_tol: 1e-9,
            pad_cap: 256,
            weight_floor: 1e-12,
            quad_tol: 1e-12,
            block_tol: 1e-10,
            inequality_slack: 1e-10,
        }
    }
}
