//! Finite-degree matrix data of the supported polynomial geometries.
//!
//! A geometry is a polynomial space, a positive definite inner product on it
//! and a degree-non-increasing derivation. At cutoff `N` it is described by
//! the Gram matrix of a canonical basis together with the matrix of the
//! derivation in that basis.
//!
//! Two basis families are available. [`BasisFamily::Canonical`] uses
//! monomials on intervals and Fourier modes on the circle. Monomial Gram
//! matrices lose positive definiteness in double precision beyond degree ten
//! or so, so [`BasisFamily::Stable`] replaces them with normalized Legendre
//! polynomials of the affinely rescaled variable. Both families are
//! degree-graded with positive leading coefficients, hence Gram–Schmidt
//! produces the same orthonormal polynomials from either.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result, SpecError};
use crate::numerics::{hermitian_eigh, DenseMatrix};
use crate::quadrature::{legendre_derivatives, GaussLegendre};

/// Underlying domain of a geometry's polynomials.
///
/// Annulus radial modes live on the rescaled radial variable `u ∈ [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Circle,
}

/// One element of a canonical basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisLabel {
    /// `x^k` (or `u^k` for annulus modes).
    Monomial(usize),
    /// `sqrt((2k+1)/2) P_k(ξ)` with `ξ` the affine image of the interval on `[-1, 1]`.
    Legendre(usize),
    /// `e^{inθ}`.
    Fourier(i64),
}

impl BasisLabel {
    pub fn degree(&self) -> usize {
        match *self {
            BasisLabel::Monomial(k) | BasisLabel::Legendre(k) => k,
            BasisLabel::Fourier(n) => n.unsigned_abs() as usize,
        }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Monomial(k) => write!(f, "x^{k}"),
            BasisLabel::Legendre(k) => write!(f, "L{k}"),
            BasisLabel::Fourier(n) => write!(f, "e{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisFamily {
    #[default]
    Canonical,
    Stable,
}

/// Fourier coefficients `ŵ(0), ŵ(1), …, ŵ(r)` of a real trigonometric
/// polynomial; `ŵ(-k) = conj ŵ(k)` is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct FourierCoefficients(Vec<Complex64>);

impl FourierCoefficients {
    pub fn new(nonnegative: Vec<Complex64>) -> Result<Self, SpecError> {
        let Some(first) = nonnegative.first() else {
            return Err(SpecError::InvalidCoefficients("at least ŵ(0) is required".into()));
        };
        if first.im != 0.0 {
            return Err(SpecError::NonHermitianWeight(first.im));
        }
        if nonnegative.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(SpecError::InvalidCoefficients(
                "Fourier coefficients must be finite".into(),
            ));
        }
        Ok(Self(nonnegative))
    }

    /// Real coefficients `ŵ(0), ŵ(1), …`.
    pub fn real(coefficients: &[f64]) -> Result<Self, SpecError> {
        Self::new(coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// `w(θ) = mean + amplitude·cos θ`.
    pub fn cosine(mean: f64, amplitude: f64) -> Self {
        Self(vec![Complex64::new(mean, 0.0), Complex64::new(0.5 * amplitude, 0.0)])
    }

    pub fn constant(value: f64) -> Self {
        Self(vec![Complex64::new(value, 0.0)])
    }

    /// `ŵ(k)` for any integer `k`.
    pub fn coefficient(&self, k: i64) -> Complex64 {
        match self.0.get(k.unsigned_abs() as usize) {
            Some(&z) if k >= 0 => z,
            Some(&z) => z.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Largest `r` with `ŵ(r) ≠ 0`.
    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|z| z.norm() != 0.0).unwrap_or(0)
    }

    pub fn nonnegative(&self) -> &[Complex64] {
        &self.0
    }

    pub fn evaluate(&self, theta: f64) -> f64 {
        let mut value = self.0[0].re;
        for (k, z) in self.0.iter().enumerate().skip(1) {
            let e = Complex64::from_polar(1.0, k as f64 * theta);
            value += 2.0 * (z * e).re;
        }
        value
    }
}

impl TryFrom<Vec<[f64; 2]>> for FourierCoefficients {
    type Error = SpecError;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, SpecError> {
        Self::new(v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<FourierCoefficients> for Vec<[f64; 2]> {
    fn from(f: FourierCoefficients) -> Self {
        f.0.into_iter().map(|z| [z.re, z.im]).collect()
    }
}

/// How a weight is represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coefficients", rename_all = "snake_case")]
pub enum WeightRepr {
    /// `w(x) = Σ c_k x^k`.
    Polynomial(Vec<f64>),
    /// `w(x) = exp(Σ c_k x^k)`.
    ExpPolynomial(Vec<f64>),
    /// `w(θ) = Σ ŵ(k) e^{ikθ}`.
    Trigonometric(FourierCoefficients),
}

impl WeightRepr {
    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            WeightRepr::Polynomial(c) => horner(c, t),
            WeightRepr::ExpPolynomial(c) => horner(c, t).exp(),
            WeightRepr::Trigonometric(f) => f.evaluate(t),
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

/// A strictly positive weight with certified bounds `w_minus ≤ w ≤ w_plus`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    repr: WeightRepr,
    domain: Domain,
    w_minus: f64,
    w_plus: f64,
}

impl WeightFunction {
    pub fn new(repr: WeightRepr, domain: Domain) -> Result<Self, SpecError> {
        Self::with_floor(repr, domain, Tolerances::default().weight_floor)
    }

    pub fn with_floor(repr: WeightRepr, domain: Domain, floor: f64) -> Result<Self, SpecError> {
        match (&repr, domain) {
            (WeightRepr::Trigonometric(_), Domain::Circle) => {}
            (WeightRepr::Polynomial(c) | WeightRepr::ExpPolynomial(c), Domain::Interval { .. }) => {
                if c.is_empty() || c.iter().any(|x| !x.is_finite()) {
                    return Err(SpecError::InvalidCoefficients(
                        "weight coefficients must be a nonempty list of finite numbers".into(),
                    ));
                }
            }
            _ => {
                return Err(SpecError::WeightDomainMismatch(
                    "circle geometries need trigonometric weights, intervals need polynomial or exp_polynomial weights"
                        .into(),
                ))
            }
        }
        let (w_minus, w_plus) = weight_bounds(&repr, domain)?;
        if !(w_minus > floor) {
            return Err(SpecError::NonpositiveWeight {
                minimum: w_minus,
                floor,
            });
        }
        Ok(Self {
            repr,
            domain,
            w_minus,
            w_plus,
        })
    }

    pub fn trigonometric(coefficients: FourierCoefficients) -> Result<Self, SpecError> {
        Self::new(WeightRepr::Trigonometric(coefficients), Domain::Circle)
    }

    pub fn repr(&self) -> &WeightRepr {
        &self.repr
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.repr.evaluate(t)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.w_minus, self.w_plus)
    }

    pub fn fourier(&self) -> Option<&FourierCoefficients> {
        match &self.repr {
            WeightRepr::Trigonometric(f) => Some(f),
            _ => None,
        }
    }
}

const BOUND_GRID: usize = 4096;
const REFINE_POINTS: usize = 64;

/// Certified enclosure `(w_minus, w_plus)` of a weight over its domain.
///
/// Samples a uniform grid of 4096 cells, refines twice around the discrete
/// extrema, and widens the result by the largest change between neighbouring
/// samples of the final refinement.
pub fn weight_bounds(repr: &WeightRepr, domain: Domain) -> Result<(f64, f64), SpecError> {
    let (lo, hi, periodic) = match domain {
        Domain::Interval { a, b } => (a, b, false),
        Domain::Circle => (0.0, 2.0 * PI, true),
    };
    let h0 = (hi - lo) / BOUND_GRID as f64;
    let count = if periodic { BOUND_GRID } else { BOUND_GRID + 1 };
    let samples: Vec<(f64, f64)> = (0..count)
        .map(|k| {
            let t = if k == BOUND_GRID { hi } else { lo + h0 * k as f64 };
            (t, repr.evaluate(t))
        })
        .collect();
    if samples.iter().any(|(_, v)| !v.is_finite()) {
        return Err(SpecError::InvalidCoefficients(
            "weight is not finite on its domain".into(),
        ));
    }

    let refine = |start: (f64, f64), pick_min: bool| -> (f64, f64) {
        let (mut best_t, mut best_v) = start;
        let mut h = h0;
        let mut margin = 0.0_f64;
        for _ in 0..2 {
            let left = if periodic { best_t - h } else { (best_t - h).max(lo) };
            let right = if periodic { best_t + h } else { (best_t + h).min(hi) };
            let step = (right - left) / REFINE_POINTS as f64;
            margin = 0.0;
            let mut prev = repr.evaluate(left);
            for i in 0..=REFINE_POINTS {
                let t = left + step * i as f64;
                let v = repr.evaluate(t);
                margin = margin.max((v - prev).abs());
                prev = v;
                if (pick_min && v < best_v) || (!pick_min && v > best_v) {
                    best_t = t;
                    best_v = v;
                }
            }
            h = step;
        }
        (best_v, margin)
    };

    let min_sample = samples
        .iter()
        .copied()
        .fold((lo, f64::INFINITY), |m, s| if s.1 < m.1 { s } else { m });
    let max_sample = samples
        .iter()
        .copied()
        .fold((lo, f64::NEG_INFINITY), |m, s| if s.1 > m.1 { s } else { m });
    let (w_min, min_margin) = refine(min_sample, true);
    let (w_max, max_margin) = refine(max_sample, false);
    let w_minus = w_min - min_margin;
    let w_plus = w_max + max_margin;
    if !(w_min > 0.0) {
        return Err(SpecError::NonpositiveWeight {
            minimum: w_min,
            floor: 0.0,
        });
    }
    Ok((w_minus, w_plus))
}

/// A validated polynomial geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryKind {
    /// `∫_a^b f g w dx` with `D = d/dx`.
    IntervalWeighted { a: f64, b: f64, weight: WeightFunction },
    /// `Σ_k λ_k ∫_a^b f^{(k)} g^{(k)} dx` with `D = d/dx`.
    IntervalSobolev { a: f64, b: f64, coefficients: Vec<f64> },
    /// `∫ f ḡ w dθ/2π` with `D = ∂_θ`.
    CircleWeighted { weight: WeightFunction },
    /// `∫ f ḡ w dθ/2π + λ ∫ f' ḡ' dθ/2π` with `D = ∂_θ`.
    CircleSobolev { weight: WeightFunction, lambda: f64 },
    /// Radial reduction of the order-`s` Sobolev form on the annulus
    /// `1 - ε ≤ r² ≤ 1 + ε` at angular mode `m`, in `u = (r² - 1)/ε`, with `D = d/du`.
    AnnulusRadialMode { epsilon: f64, mode: i32, order: u32 },
}

/// A geometry whose invariants have been checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryConfig", into = "GeometryConfig")]
pub struct GeometrySpec {
    kind: GeometryKind,
}

fn check_interval(a: f64, b: f64) -> Result<(), SpecError> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(SpecError::InvalidInterval { a, b })
    }
}

impl GeometrySpec {
    pub fn new(kind: GeometryKind) -> Result<Self, SpecError> {
        match &kind {
            GeometryKind::IntervalWeighted { a, b, weight } => {
                check_interval(*a, *b)?;
                if weight.domain() != (Domain::Interval { a: *a, b: *b }) {
                    return Err(SpecError::WeightDomainMismatch(
                        "weight was certified on a different interval".into(),
                    ));
                }
            }
            GeometryKind::IntervalSobolev { a, b, coefficients } => {
                check_interval(*a, *b)?;
                match coefficients.split_first() {
                    Some((&l0, rest)) if l0 > 0.0 && l0.is_finite() => {
                        if rest.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
                            return Err(SpecError::InvalidCoefficients(
                                "Sobolev coefficients λ_1..λ_s must be finite and nonnegative".into(),
                            ));
                        }
                    }
                    _ => {
                        return Err(SpecError::InvalidCoefficients(
                            "Sobolev coefficient λ_0 must be finite and positive".into(),
                        ))
                    }
                }
            }
            GeometryKind::CircleWeighted { weight } => {
                if weight.fourier().is_none() {
                    return Err(SpecError::WeightDomainMismatch(
                        "circle weight must be trigonometric".into(),
                    ));
                }
            }
            GeometryKind::CircleSobolev { weight, lambda } => {
                if weight.fourier().is_none() {
                    return Err(SpecError::WeightDomainMismatch(
                        "circle weight must be trigonometric".into(),
                    ));
                }
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(SpecError::InvalidRegularization(*lambda));
                }
            }
            GeometryKind::AnnulusRadialMode { epsilon, .. } => {
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(SpecError::InvalidThickness(*epsilon));
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn interval_weighted(a: f64, b: f64, weight: WeightRepr) -> Result<Self, SpecError> {
        check_interval(a, b)?;
        let weight = WeightFunction::new(weight, Domain::Interval { a, b })?;
        Self::new(GeometryKind::IntervalWeighted { a, b, weight })
    }

    /// Lebesgue measure on `[a, b]`.
    pub fn interval_uniform(a: f64, b: f64) -> Result<Self, SpecError> {
        Self::interval_weighted(a, b, WeightRepr::Polynomial(vec![1.0]))
    }

    pub fn interval_sobolev(a: f64, b: f64, coefficients: Vec<f64>) -> Result<Self, SpecError> {
        Self::new(GeometryKind::IntervalSobolev { a, b, coefficients })
    }

    pub fn circle_weighted(weight: FourierCoefficients) -> Result<Self, SpecError> {
        Self::new(GeometryKind::CircleWeighted {
            weight: WeightFunction::trigonometric(weight)?,
        })
    }

    pub fn circle_sobolev(weight: FourierCoefficients, lambda: f64) -> Result<Self, SpecError> {
        Self::new(GeometryKind::CircleSobolev {
            weight: WeightFunction::trigonometric(weight)?,
            lambda,
        })
    }

    /// Circle geometry with regularization `λ ≥ 0`; `λ = 0` is the weighted geometry.
    pub fn circle(weight: FourierCoefficients, lambda: f64) -> Result<Self, SpecError> {
        if lambda == 0.0 {
            Self::circle_weighted(weight)
        } else {
            Self::circle_sobolev(weight, lambda)
        }
    }

    pub fn annulus_radial_mode(epsilon: f64, mode: i32, order: u32) -> Result<Self, SpecError> {
        Self::new(GeometryKind::AnnulusRadialMode { epsilon, mode, order })
    }

    pub fn kind(&self) -> &GeometryKind {
        &self.kind
    }

    pub fn domain(&self) -> Domain {
        match self.kind {
            GeometryKind::IntervalWeighted { a, b, .. } | GeometryKind::IntervalSobolev { a, b, .. } => {
                Domain::Interval { a, b }
            }
            GeometryKind::CircleWeighted { .. } | GeometryKind::CircleSobolev { .. } => Domain::Circle,
            GeometryKind::AnnulusRadialMode { .. } => Domain::Interval { a: -1.0, b: 1.0 },
        }
    }

    /// Circle weight, when the geometry lives on the circle.
    pub fn circle_weight(&self) -> Option<&WeightFunction> {
        match &self.kind {
            GeometryKind::CircleWeighted { weight } | GeometryKind::CircleSobolev { weight, .. } => Some(weight),
            _ => None,
        }
    }

    /// Circle regularization `λ` (zero for the weighted circle).
    pub fn circle_lambda(&self) -> Option<f64> {
        match self.kind {
            GeometryKind::CircleWeighted { .. } => Some(0.0),
            GeometryKind::CircleSobolev { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    /// True when the inner product is an `L²` inner product of a measure.
    pub fn is_measure(&self) -> bool {
        match &self.kind {
            GeometryKind::IntervalWeighted { .. } | GeometryKind::CircleWeighted { .. } => true,
            GeometryKind::IntervalSobolev { coefficients, .. } => coefficients.iter().skip(1).all(|&l| l == 0.0),
            GeometryKind::CircleSobolev { .. } => false,
            GeometryKind::AnnulusRadialMode { order, .. } => *order == 0,
        }
    }

    /// Canonical basis up to degree `n` in the requested family.
    pub fn labels(&self, n: usize, family: BasisFamily) -> Vec<BasisLabel> {
        match (self.domain(), family) {
            (Domain::Circle, _) => (-(n as i64)..=n as i64).map(BasisLabel::Fourier).collect(),
            (Domain::Interval { .. }, BasisFamily::Canonical) => (0..=n).map(BasisLabel::Monomial).collect(),
            (Domain::Interval { .. }, BasisFamily::Stable) => (0..=n).map(BasisLabel::Legendre).collect(),
        }
    }
}

/// Raw, unvalidated geometry description used for (de)serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    IntervalWeighted { a: f64, b: f64, weight: WeightRepr },
    IntervalSobolev { a: f64, b: f64, coefficients: Vec<f64> },
    CircleWeighted { weight: WeightRepr },
    CircleSobolev { weight: WeightRepr, lambda: f64 },
    AnnulusRadialMode { epsilon: f64, mode: i32, order: f64 },
}

/// Converts a floating Sobolev order to an integer one.
pub fn integer_order(order: f64) -> Result<u32, SpecError> {
    if order >= 0.0 && order.fract() == 0.0 && order <= u32::MAX as f64 {
        Ok(order as u32)
    } else {
        Err(SpecError::UnsupportedOrder(order))
    }
}

fn trig_weight(repr: WeightRepr) -> Result<WeightFunction, SpecError> {
    WeightFunction::new(repr, Domain::Circle)
}

impl TryFrom<GeometryConfig> for GeometrySpec {
    type Error = SpecError;

    fn try_from(c: GeometryConfig) -> Result<Self, SpecError> {
        match c {
            GeometryConfig::IntervalWeighted { a, b, weight } => Self::interval_weighted(a, b, weight),
            GeometryConfig::IntervalSobolev { a, b, coefficients } => Self::interval_sobolev(a, b, coefficients),
            GeometryConfig::CircleWeighted { weight } => Self::new(GeometryKind::CircleWeighted {
                weight: trig_weight(weight)?,
            }),
            GeometryConfig::CircleSobolev { weight, lambda } => Self::new(GeometryKind::CircleSobolev {
                weight: trig_weight(weight)?,
                lambda,
            }),
            GeometryConfig::AnnulusRadialMode { epsilon, mode, order } => {
                Self::annulus_radial_mode(epsilon, mode, integer_order(order)?)
            }
        }
    }
}

impl From<GeometrySpec> for GeometryConfig {
    fn from(s: GeometrySpec) -> Self {
        match s.kind {
            GeometryKind::IntervalWeighted { a, b, weight } => GeometryConfig::IntervalWeighted {
                a,
                b,
                weight: weight.repr,
            },
            GeometryKind::IntervalSobolev { a, b, coefficients } => {
                GeometryConfig::IntervalSobolev { a, b, coefficients }
            }
            GeometryKind::CircleWeighted { weight } => GeometryConfig::CircleWeighted { weight: weight.repr },
            GeometryKind::CircleSobolev { weight, lambda } => GeometryConfig::CircleSobolev {
                weight: weight.repr,
                lambda,
            },
            GeometryKind::AnnulusRadialMode { epsilon, mode, order } => GeometryConfig::AnnulusRadialMode {
                epsilon,
                mode,
                order: order as f64,
            },
        }
    }
}

/// Gram matrix `G_{mn} = ⟨e_n, e_m⟩` of a canonical basis.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: DenseMatrix,
    pub labels: Vec<BasisLabel>,
    pub geometry: GeometrySpec,
    pub cutoff: usize,
}

impl GramMatrix {
    pub fn dimension(&self) -> usize {
        self.labels.len()
    }

    pub fn domain(&self) -> Domain {
        self.geometry.domain()
    }

    /// Indices of basis elements of degree at most `n`.
    pub fn indices_up_to_degree(&self, n: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i].degree() <= n)
            .collect()
    }

    /// Permutation listing the basis by degree; within a degree, by original position.
    pub fn degree_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by_key(|&i| self.labels[i].degree());
        order
    }

    /// The same inner product on a reordered or restricted basis.
    pub fn select(&self, indices: &[usize]) -> GramMatrix {
        let labels: Vec<BasisLabel> = indices.iter().map(|&i| self.labels[i]).collect();
        let cutoff = labels.iter().map(BasisLabel::degree).max().unwrap_or(0);
        GramMatrix {
            entries: self.entries.permuted(indices),
            labels,
            geometry: self.geometry.clone(),
            cutoff,
        }
    }

    /// Gram matrix of the analytic modes `1, z, …, z^n` of a circle geometry.
    pub fn analytic_section(&self, n: usize) -> Result<GramMatrix> {
        let index: HashMap<BasisLabel, usize> = self.labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let picks = (0..=n as i64)
            .map(|k| {
                index
                    .get(&BasisLabel::Fourier(k))
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("analytic mode {k} is not in this Gram matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select(&picks))
    }

    /// The inner product multiplied by a positive constant.
    pub fn scaled(&self, factor: f64) -> GramMatrix {
        GramMatrix {
            entries: self.entries.scale(factor),
            ..self.clone()
        }
    }

    /// Squared norm of the constant function 1, when it is representable.
    pub fn constant_norm_sqr(&self) -> Option<f64> {
        let coeffs = constant_coordinates(&self.labels)?;
        let g = &self.entries;
        let mut s = Complex64::new(0.0, 0.0);
        for &(i, ci) in &coeffs {
            for &(j, cj) in &coeffs {
                s += g[(j, i)] * ci * cj;
            }
        }
        Some(s.re)
    }
}

fn constant_coordinates(labels: &[BasisLabel]) -> Option<Vec<(usize, f64)>> {
    labels.iter().enumerate().find_map(|(i, l)| match *l {
        BasisLabel::Monomial(0) | BasisLabel::Fourier(0) => Some(vec![(i, 1.0)]),
        BasisLabel::Legendre(0) => Some(vec![(i, 2f64.sqrt())]),
        _ => None,
    })
}

/// Matrix of the derivation in canonical coordinates: column `j` holds the
/// coordinates of `D e_j`.
#[derive(Debug, Clone)]
pub struct DerivativeMatrix {
    pub entries: DenseMatrix,
    pub labels: Vec<BasisLabel>,
    pub cutoff: usize,
}

/// Gram matrix of the canonical basis (monomials / Fourier modes) at cutoff `n`.
pub fn gram_matrix(spec: &GeometrySpec, n: usize) -> Result<GramMatrix> {
    gram_matrix_in(spec, n, BasisFamily::Canonical, &Tolerances::default())
}

/// Gram matrix at cutoff `n` in the requested basis family.
pub fn gram_matrix_in(spec: &GeometrySpec, n: usize, family: BasisFamily, tol: &Tolerances) -> Result<GramMatrix> {
    let labels = spec.labels(n, family);
    let entries = match spec.kind() {
        GeometryKind::CircleWeighted { weight } => circle_gram(weight, 0.0, &labels)?,
        GeometryKind::CircleSobolev { weight, lambda } => circle_gram(weight, *lambda, &labels)?,
        GeometryKind::IntervalSobolev { a, b, coefficients } if family == BasisFamily::Canonical => {
            exact_sobolev_monomial_gram(*a, *b, coefficients, n)?
        }
        _ => {
            let form = interval_form(spec).expect("interval geometry");
            quadrature_gram(&form, &labels, spec.domain(), tol)?
        }
    };
    let gram = GramMatrix {
        entries,
        labels,
        geometry: spec.clone(),
        cutoff: n,
    };
    check_positive_definite(&gram.entries, tol)?;
    Ok(gram)
}

/// Fails with `DegenerateInnerProduct` when the smallest eigenvalue is not
/// above `pd_tol` times the largest.
pub fn check_positive_definite(g: &DenseMatrix, tol: &Tolerances) -> Result<()> {
    let eig = hermitian_eigh(g, tol)?;
    let largest = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let smallest = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let threshold = tol.pd_tol * largest.abs();
    if eig.eigenvalues.is_empty() || smallest > threshold {
        Ok(())
    } else {
        Err(Error::DegenerateInnerProduct { smallest, threshold })
    }
}

/// `A[m, n] = ŵ(m - n) + λ n² δ_{mn}` on modes `-n..=n`, without checking the weight.
pub fn circle_gram_entries(fourier: &FourierCoefficients, lambda: f64, n: usize) -> DenseMatrix {
    let labels: Vec<BasisLabel> = (-(n as i64)..=n as i64).map(BasisLabel::Fourier).collect();
    toeplitz_plus_diagonal(fourier, lambda, &labels)
}

fn circle_gram(weight: &WeightFunction, lambda: f64, labels: &[BasisLabel]) -> Result<DenseMatrix> {
    let fourier = weight.fourier().expect("validated circle weight");
    Ok(toeplitz_plus_diagonal(fourier, lambda, labels))
}

fn toeplitz_plus_diagonal(fourier: &FourierCoefficients, lambda: f64, labels: &[BasisLabel]) -> DenseMatrix {
    let modes: Vec<i64> = labels
        .iter()
        .map(|l| match *l {
            BasisLabel::Fourier(n) => n,
            _ => unreachable!("circle bases are Fourier modes"),
        })
        .collect();
    DenseMatrix::wrap(nalgebra::DMatrix::from_fn(modes.len(), modes.len(), |i, j| {
        let (m, n) = (modes[i], modes[j]);
        let mut z = fourier.coefficient(m - n);
        if m == n {
            z += lambda * (n * n) as f64;
        }
        z
    }))
}

/// Density of one term of an interval form.
#[derive(Clone)]
pub(crate) enum Density {
    /// Polynomial coefficients in the domain variable.
    Polynomial(Vec<f64>),
    Smooth(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Density {
    fn evaluate(&self, x: f64) -> f64 {
        match self {
            Density::Polynomial(c) => horner(c, x),
            Density::Smooth(f) => f(x),
        }
    }
}

/// `Σ_k ∫ (d^k f)(d^k g) ρ_k dx` over an interval.
#[derive(Clone)]
pub(crate) struct IntervalForm {
    pub terms: Vec<(usize, Density)>,
}

impl IntervalForm {
    fn max_order(&self) -> usize {
        self.terms.iter().map(|(k, _)| *k).max().unwrap_or(0)
    }

    fn polynomial_degree(&self) -> Option<usize> {
        self.terms.iter().try_fold(0, |acc, (_, d)| match d {
            Density::Polynomial(c) => Some(acc.max(c.len().saturating_sub(1))),
            Density::Smooth(_) => None,
        })
    }
}

/// Coefficients of `scale · (1 + ε u)^p` in powers of `u`.
fn scaled_binomial(scale: f64, epsilon: f64, p: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; p + 1];
    let mut binom = 1.0;
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = scale * binom * epsilon.powi(i as i32);
        binom = binom * (p - i) as f64 / (i as f64 + 1.0);
    }
    coeffs
}

pub(crate) fn interval_form(spec: &GeometrySpec) -> Option<IntervalForm> {
    match spec.kind() {
        GeometryKind::IntervalWeighted { weight, .. } => {
            let density = match weight.repr() {
                WeightRepr::Polynomial(c) => Density::Polynomial(c.clone()),
                other => {
                    let repr = other.clone();
                    Density::Smooth(Arc::new(move |x| repr.evaluate(x)))
                }
            };
            Some(IntervalForm {
                terms: vec![(0, density)],
            })
        }
        GeometryKind::IntervalSobolev { coefficients, .. } => Some(IntervalForm {
            terms: coefficients
                .iter()
                .enumerate()
                .filter(|(_, &l)| l != 0.0)
                .map(|(k, &l)| (k, Density::Polynomial(vec![l])))
                .collect(),
        }),
        GeometryKind::AnnulusRadialMode { epsilon, mode, order } => {
            let eps = *epsilon;
            let m = mode.unsigned_abs() as usize;
            let s = *order as usize;
            let jacobian = 0.5 * eps;
            let angular = (m as f64).powi(2) * eps * eps / 4.0;
            let zeroth = if s == 0 || m == 0 {
                Density::Polynomial(scaled_binomial(jacobian, eps, m))
            } else {
                Density::Smooth(Arc::new(move |u: f64| {
                    let t = 1.0 + eps * u;
                    let folded: f64 = (1..=s).map(|k| (angular / t).powi(k as i32)).sum();
                    jacobian * t.powi(m as i32) * (1.0 + folded)
                }))
            };
            let mut terms = vec![(0, zeroth)];
            for k in 1..=s {
                terms.push((k, Density::Polynomial(scaled_binomial(jacobian, eps, m + k))));
            }
            Some(IntervalForm { terms })
        }
        _ => None,
    }
}

/// `d^k/dx^k` of every basis element at `x`, indexed `[k][i]`.
pub(crate) fn basis_derivatives(labels: &[BasisLabel], domain: Domain, x: f64, max_order: usize) -> Vec<Vec<f64>> {
    let (a, b) = match domain {
        Domain::Interval { a, b } => (a, b),
        Domain::Circle => panic!("real derivative tables are only defined on intervals"),
    };
    let max_degree = labels.iter().map(BasisLabel::degree).max().unwrap_or(0);
    let needs_legendre = labels.iter().any(|l| matches!(l, BasisLabel::Legendre(_)));
    let legendre = needs_legendre.then(|| {
        let xi = (2.0 * x - a - b) / (b - a);
        legendre_derivatives(xi, max_degree, max_order)
    });
    let dxi = 2.0 / (b - a);
    (0..=max_order)
        .map(|k| {
            labels
                .iter()
                .map(|l| match *l {
                    BasisLabel::Monomial(j) => {
                        if j < k {
                            0.0
                        } else {
                            falling_factorial(j, k) * x.powi((j - k) as i32)
                        }
                    }
                    BasisLabel::Legendre(j) => {
                        let table = legendre.as_ref().expect("computed above");
                        legendre_norm(j) * dxi.powi(k as i32) * table[k][j]
                    }
                    BasisLabel::Fourier(_) => panic!("Fourier modes on an interval"),
                })
                .collect()
        })
        .collect()
}

fn legendre_norm(j: usize) -> f64 {
    ((2 * j + 1) as f64 / 2.0).sqrt()
}

fn falling_factorial(j: usize, k: usize) -> f64 {
    (0..k).map(|i| (j - i) as f64).product()
}

fn accumulate_gram(form: &IntervalForm, labels: &[BasisLabel], domain: Domain, nodes: &[(f64, f64)]) -> Vec<f64> {
    let dim = labels.len();
    let max_order = form.max_order();
    let mut g = vec![0.0; dim * dim];
    for &(x, wq) in nodes {
        let table = basis_derivatives(labels, domain, x, max_order);
        for (k, density) in &form.terms {
            let rho = wq * density.evaluate(x);
            let row = &table[*k];
            for i in 0..dim {
                let ri = rho * row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    g[i * dim + j] += ri * row[j];
                }
            }
        }
    }
    g
}

/// Gram matrix of an interval form by Gauss–Legendre quadrature.
///
/// Polynomial densities use a single rule that is exact up to rounding.
/// Other densities use composite rules, doubling the panel count until two
/// successive matrices agree to `quad_tol` relative.
pub(crate) fn quadrature_gram(
    form: &IntervalForm,
    labels: &[BasisLabel],
    domain: Domain,
    tol: &Tolerances,
) -> Result<DenseMatrix> {
    let Domain::Interval { a, b } = domain else {
        return Err(Error::InvalidArgument("quadrature Gram needs an interval".into()));
    };
    let dim = labels.len();
    let n = labels.iter().map(BasisLabel::degree).max().unwrap_or(0);
    let to_matrix = |g: &[f64]| DenseMatrix::from_fn(dim, dim, |i, j| Complex64::new(g[i * dim + j], 0.0));

    if let Some(deg_w) = form.polynomial_degree() {
        let points = (2 * n + deg_w).div_ceil(2) + 4;
        let rule = GaussLegendre::new(points);
        let g = accumulate_gram(form, labels, domain, &rule.mapped(a, b));
        return Ok(to_matrix(&g)?);
    }

    let rule = GaussLegendre::new(n + form.max_order() + 8);
    let mut previous = accumulate_gram(form, labels, domain, &rule.composite(a, b, 1));
    let mut panels = 2;
    while panels <= 4096 {
        let current = accumulate_gram(form, labels, domain, &rule.composite(a, b, panels));
        let scale = current.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let change = current
            .iter()
            .zip(&previous)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        if change <= tol.quad_tol * scale {
            return Ok(to_matrix(&current)?);
        }
        previous = current;
        panels *= 2;
    }
    Err(crate::numerics::NumericsError::ConvergenceFailure(
        "composite quadrature did not settle within 4096 panels".into(),
    )
    .into())
}

/// Sobolev Gram matrix on `[a, b]` from closed-form monomial moments:
/// `G_{ij} = Σ_k λ_k ∫_a^b (x^i)^{(k)} (x^j)^{(k)} dx`.
pub fn sobolev_gram_interval(a: f64, b: f64, coefficients: &[f64], n: usize) -> Result<GramMatrix> {
    let spec = GeometrySpec::interval_sobolev(a, b, coefficients.to_vec())?;
    let entries = exact_sobolev_monomial_gram(a, b, coefficients, n)?;
    let gram = GramMatrix {
        entries,
        labels: spec.labels(n, BasisFamily::Canonical),
        geometry: spec,
        cutoff: n,
    };
    check_positive_definite(&gram.entries, &Tolerances::default())?;
    Ok(gram)
}

fn exact_sobolev_monomial_gram(a: f64, b: f64, coefficients: &[f64], n: usize) -> Result<DenseMatrix> {
    let moment = |p: usize| (b.powi(p as i32 + 1) - a.powi(p as i32 + 1)) / (p as f64 + 1.0);
    Ok(DenseMatrix::from_fn(n + 1, n + 1, |i, j| {
        let mut s = 0.0;
        for (k, &lambda) in coefficients.iter().enumerate() {
            if lambda == 0.0 || i < k || j < k {
                continue;
            }
            s += lambda * falling_factorial(i, k) * falling_factorial(j, k) * moment(i + j - 2 * k);
        }
        Complex64::new(s, 0.0)
    })?)
}

/// Matrix of the geometry's derivation on the canonical basis at cutoff `n`.
pub fn derivative_matrix(spec: &GeometrySpec, n: usize) -> DerivativeMatrix {
    let labels = spec.labels(n, BasisFamily::Canonical);
    derivative_matrix_for(&labels, spec.domain())
}

/// Matrix of `d/dx` (intervals) or `∂_θ` (circle) on an arbitrary labelled basis.
pub fn derivative_matrix_for(labels: &[BasisLabel], domain: Domain) -> DerivativeMatrix {
    let dim = labels.len();
    let index: HashMap<BasisLabel, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut d = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    for (col, label) in labels.iter().enumerate() {
        match *label {
            BasisLabel::Monomial(k) if k > 0 => {
                let row = index[&BasisLabel::Monomial(k - 1)];
                d[(row, col)] = Complex64::new(k as f64, 0.0);
            }
            BasisLabel::Monomial(_) => {}
            BasisLabel::Legendre(j) => {
                let Domain::Interval { a, b } = domain else {
                    panic!("Legendre basis on the circle");
                };
                let dxi = 2.0 / (b - a);
                for k in (0..j).rev().step_by(2) {
                    let row = index[&BasisLabel::Legendre(k)];
                    let v = dxi * legendre_norm(j) * (2 * k + 1) as f64 / legendre_norm(k);
                    d[(row, col)] = Complex64::new(v, 0.0);
                }
            }
            BasisLabel::Fourier(m) => {
                d[(col, col)] = Complex64::new(0.0, m as f64);
            }
        }
    }
    DerivativeMatrix {
        entries: DenseMatrix::wrap(d),
        labels: labels.to_vec(),
        cutoff: labels.iter().map(BasisLabel::degree).max().unwrap_or(0),
    }
}

/// Values of every basis element at a point (`x` on intervals, `θ` on the circle).
pub fn evaluate_basis(labels: &[BasisLabel], domain: Domain, x: f64) -> Vec<Complex64> {
    match domain {
        Domain::Circle => labels
            .iter()
            .map(|l| match *l {
                BasisLabel::Fourier(n) => Complex64::from_polar(1.0, n as f64 * x),
                _ => panic!("non-Fourier label on the circle"),
            })
            .collect(),
        Domain::Interval { .. } => basis_derivatives(labels, domain, x, 0)
            .swap_remove(0)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect(),
    }
}

/// Column `i` holds the monomial coefficients (degrees `0..=n`) of basis element `i`.
///
/// Fourier labels are returned unchanged (identity), as they are already canonical.
pub fn to_monomial_matrix(labels: &[BasisLabel], domain: Domain) -> DenseMatrix {
    let dim = labels.len();
    let n = labels.iter().map(BasisLabel::degree).max().unwrap_or(0);
    if matches!(domain, Domain::Circle) {
        return DenseMatrix::identity(dim);
    }
    let Domain::Interval { a, b } = domain else {
        unreachable!()
    };
    // ξ = α x + β
    let alpha = 2.0 / (b - a);
    let beta = -(a + b) / (b - a);
    // Legendre coefficients in ξ by recurrence
    let mut p_xi: Vec<Vec<f64>> = vec![vec![1.0]];
    if n >= 1 {
        p_xi.push(vec![0.0, 1.0]);
    }
    for j in 1..n {
        let jf = j as f64;
        let mut next = vec![0.0; j + 2];
        for (i, &c) in p_xi[j].iter().enumerate() {
            next[i + 1] += (2.0 * jf + 1.0) * c / (jf + 1.0);
        }
        for (i, &c) in p_xi[j - 1].iter().enumerate() {
            next[i] -= jf * c / (jf + 1.0);
        }
        p_xi.push(next);
    }
    let substitute = |coeffs: &[f64]| -> Vec<f64> {
        // Σ c_i (αx + β)^i
        let mut out = vec![0.0; n + 1];
        let mut power = vec![1.0];
        for &c in coeffs {
            for (d, &p) in power.iter().enumerate() {
                out[d] += c * p;
            }
            let mut next = vec![0.0; power.len() + 1];
            for (d, &p) in power.iter().enumerate() {
                next[d + 1] += alpha * p;
                next[d] += beta * p;
            }
            power = next;
        }
        out
    };
    let mut t = nalgebra::DMatrix::<Complex64>::zeros(n + 1, dim);
    for (col, label) in labels.iter().enumerate() {
        match *label {
            BasisLabel::Monomial(k) => t[(k, col)] = Complex64::new(1.0, 0.0),
            BasisLabel::Legendre(j) => {
                for (d, v) in substitute(&p_xi[j]).into_iter().enumerate() {
                    t[(d, col)] = Complex64::new(legendre_norm(j) * v, 0.0);
                }
            }
            BasisLabel::Fourier(_) => unreachable!(),
        }
    }
    DenseMatrix::wrap(t)
}
