//! Gaussian integrals over centered Euclidean balls, the spherical truncation
//! operator on covariance spectra, and its inversion by fixed-point iteration.

pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod oracles;
pub mod reconstruction;
pub mod ruben;
pub mod specfun;
pub mod truncation;

pub use error::{Error, Result};
