//! Finite-dimensional stability analysis of polynomial Hilbert geometries.
//!
//! A geometry is a polynomial space with a positive definite inner product and
//! a degree-non-increasing derivation. This crate builds Gram and derivative
//! matrices for weighted and Sobolev geometries on intervals, the circle and
//! thin annuli, orthonormalizes them, assembles the associated Laplacians
//! `Δ = D*D`, and compares geometries through their truncated resolvents
//! `(I + Δ)^{-1}`, projectors, orthonormal bases and reproducing kernels.

// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annulus;
pub mod circle;
pub mod config;
pub mod error;
pub mod geometry;
pub mod laplacian;
pub mod numerics;
pub mod ortho;
pub mod quadrature;
pub mod resolvent;

pub use config::Tolerances;
pub use error::{Error, Result, SpecError};
