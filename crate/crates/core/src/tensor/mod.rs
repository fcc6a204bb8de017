//! Symmetric sparse tensors, rank-`r` factor models and the quantities
//! measured on them (entries, norms, incoherence, alignment, distances).

mod align;
mod distance;
mod factor;
mod generate;
mod operator;
mod sparse;

pub use align::{align_factors, AlignmentReport};
pub use distance::{frobenius_distance, frobenius_error_bound_check, rmse};
pub use factor::FactorModel;
pub use generate::{generate_correlated_model, generate_orthogonal_model};
pub use operator::{operator_norm_estimate, CombinedTensor, SymmetricOperator, Trilinear};
pub use sparse::{canonical_count, SparseSymmetricTensor, Triple};

pub(crate) use factor::norm2;
#[cfg(test)]
pub(crate) use factor::dot;
pub(crate) use operator::random_unit;
