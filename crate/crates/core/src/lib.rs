//! Numerical laboratory for bilinear Bochner–Riesz means.
//!
//! The crate discretizes `ℝ^d` (`d = 1, 2`) by a periodic grid and evaluates
//! the linear and bilinear multiplier operators that appear in the
//! `L^p × L^q → L^r` theory of
//! `ℬ^α(f,g)(x) = ∬ e^{2πix·(ξ+η)} (1 − |ξ|² − |η|²)^α_+ f̂(ξ) ĝ(η) dξ dη`:
//! shell operators, square functions, dyadic pieces, and the Taylor expansion
//! that splits the dyadic pieces into products of shell operators. It also
//! holds the exponent arithmetic and the empirical norm and slope fits.

pub mod bilinear;
pub mod bump;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod io;
pub mod linear;
pub mod par;
pub mod spectral;

pub use error::{Error, Result};

/// Version of this crate, embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
