//! Kernel ridge regression, kernel spectra and generalization-bound machinery.

pub mod eigenbounds;
pub mod error;
pub mod kernels;
pub mod krr;
pub mod quadrature;
pub mod rng;
pub mod sphere;
pub mod spectrum;

pub use error::{Error, Result};
