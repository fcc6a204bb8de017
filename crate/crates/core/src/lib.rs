//! Exact completion of low-rank symmetric 3-mode tensors.
//!
//! The pipeline is: Bernoulli-sample a symmetric tensor ([`sampling`]),
//! initialize with a robust tensor power method and incoherence clipping
//! ([`rtpm`]), then refine every component by closed-form alternating least
//! squares ([`altmin`]). [`spectral`] and [`max3lin`] hold the supporting
//! empirical studies and [`harness`] the reproducible experiment drivers.

pub mod altmin;
pub mod error;
pub mod harness;
pub mod io;
pub mod max3lin;
pub mod pipeline;
pub mod rtpm;
pub mod sampling;
pub mod seed;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{FactorModel, SparseSymmetricTensor, Triple};
