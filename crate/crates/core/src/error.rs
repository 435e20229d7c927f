use thiserror::Error;

use crate::numerics::NumericsError;

/// A geometry description that violates its own invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("NonpositiveWeight: weight lower bound {minimum:e} is not above {floor:e}")]
    NonpositiveWeight { minimum: f64, floor: f64 },
    #[error("InvalidInterval: endpoints a = {a}, b = {b} must be finite with a < b")]
    InvalidInterval { a: f64, b: f64 },
    #[error("InvalidCoefficients: {0}")]
    InvalidCoefficients(String),
    #[error("NonHermitianWeight: ŵ(0) must be real, found imaginary part {0:e}")]
    NonHermitianWeight(f64),
    #[error("InvalidRegularization: λ = {0} must be finite and positive")]
    InvalidRegularization(f64),
    #[error("InvalidThickness: ε = {0} must lie strictly between 0 and 1")]
    InvalidThickness(f64),
    #[error("UnsupportedOrder: Sobolev order {0} is not a nonnegative integer")]
    UnsupportedOrder(f64),
    #[error("WeightDomainMismatch: {0}")]
    WeightDomainMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("DegenerateInnerProduct: smallest Gram eigenvalue {smallest:e} is not above {threshold:e}")]
    DegenerateInnerProduct { smallest: f64, threshold: f64 },
    #[error("LossOfOrthogonality: max|C*GC - I| = {residual:e} exceeds {tolerance:e}")]
    LossOfOrthogonality { residual: f64, tolerance: f64 },
    #[error("NotTridiagonal: multiplication matrix has bandwidth {bandwidth}")]
    NotTridiagonal { bandwidth: usize },
    #[error("NonpositiveRecurrence: off-diagonal coefficient a_{index} = {value:e} is not positive")]
    NonpositiveRecurrence { index: usize, value: f64 },
    #[error("IncompatibleGeometries: {0}")]
    IncompatibleGeometries(String),
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by arithmetic.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Spec(_) | Error::IncompatibleGeometries(_) | Error::InvalidGrid(_) | Error::InvalidArgument(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
