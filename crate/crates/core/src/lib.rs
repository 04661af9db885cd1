//! Functional partial linear regression with Bayesian bandwidth estimation.
//!
//! The crate fits `y = ∫X(t)β(t)dt + m(Z) + ε` with a least-squares
//! coefficient function, a Nadaraya–Watson smoother for `m`, and a Gaussian
//! kernel-mixture error density. Bandwidths are sampled jointly by an
//! adaptive random-walk Metropolis chain, semi-metrics are ranked by their
//! Chib marginal likelihood, and prediction intervals come from the
//! estimated error density.

pub mod bayes;
pub mod dataset;
pub mod density;
pub mod error;
pub mod fda;
pub mod par;
pub mod regress;
pub mod semimetric;
pub mod sim;
pub mod tecator;

pub use error::{FplmError, Result};
