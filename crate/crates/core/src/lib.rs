//! Asymptotic secret-key rates of one-way continuous-variable QKD under
//! Gaussian two-mode coherent attacks.
//!
//! Covariance matrices are in shot-noise units with quadratures ordered
//! `(q1, p1, q2, p2, ...)`. Entropies are in bits.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod landscape;
pub mod rates;

pub use attack::{AttackParams, Constraint};
pub use error::{Error, Result};
pub use gaussian::{CovMat, Spectrum};
pub use rates::{Protocol, ProtocolSpec, RateReport};
