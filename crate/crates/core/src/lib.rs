//! Exact and asymptotic degree profiles of random Pólya trees (unlabelled
//! rooted trees).
//!
//! The crate is layered: [`powerseries`] provides truncated series arithmetic
//! over any [`Scalar`] ring, [`enumeration`] counts trees and degree classes,
//! [`profile`] builds the marking recurrences for exact finite-size laws,
//! [`constants`] extracts the singular constants numerically, [`sampling`]
//! draws exactly uniform trees, and [`limits`] evaluates the limit laws.

pub mod constants;
pub mod enumeration;
pub mod error;
pub mod limits;
pub mod powerseries;
pub mod profile;
pub mod sampling;
pub mod scalar;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use powerseries::{MarkBasis, MarkPoly, MarkedSeries, TruncatedSeries};
pub use scalar::Scalar;

/// Series with exact rational coefficients.
pub type ExactSeries = TruncatedSeries<num_rational::BigRational>;
/// Series with double precision coefficients.
pub type FloatSeries = TruncatedSeries<f64>;
/// Marked series with exact rational coefficients.
pub type ExactMarkedSeries = MarkedSeries<num_rational::BigRational>;
/// Marked series with double precision coefficients.
pub type FloatMarkedSeries = MarkedSeries<f64>;
