//! Hierarchical logistic model: parameter layout, linear predictor,
//! Bernoulli likelihood, priors and the unnormalized log-posterior.
//!
//! For crash `i` in level-2 unit `j` the log-odds are
//!
//! ```text
//! eta_ij = g00 + sum_q g0q Z_qj + u0j
//!        + sum_p gp0 X_pij + sum_p sum_q gpq Z_qj X_pij
//!        + sum_{p in slopes} upj X_pij   (+ v0l for a level-3 group l)
//! ```
//!
//! with `u0j ~ N(0, s0^2)`, `upj ~ N(0, sp^2)`, coefficients `~ N(0, 1000)` and
//! every variance `~ InvGamma(0.001, 0.001)` by default. There is no
//! row-level disturbance term: a Bernoulli response cannot identify one.

mod likelihood;
mod params;
mod prior;
mod spec;
mod target;

pub use likelihood::{linear_predictor, log_likelihood, LogLikelihood, Prediction};
pub use params::{Level3Effects, ParameterLayout, ParameterRole, ParameterVector};
pub use prior::{inv_gamma_log_pdf, log_prior, normal_log_pdf};
pub use spec::{resolve_terms, term_matches, HierarchicalModelSpec, Nesting, PriorConfig, Structure};
pub use target::ModelTarget;

use thiserror::Error;

use crate::dataset::CodedDataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("term `{0}` does not match any design column")]
    UnknownTerm(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("response must be 0 or 1, row {row} has {value}")]
    NonBinaryResponse { row: usize, value: f64 },
    #[error("variance `{name}` must be positive, got {value}")]
    NonPositiveVariance { name: String, value: f64 },
    #[error("three-level nesting needs level-3 group indices in the data")]
    MissingLevel3,
}

/// Unnormalized log-posterior on the natural parameter scale (variances, not
/// log-variances; no Jacobian).
pub fn log_posterior(
    spec: &HierarchicalModelSpec,
    params: &ParameterVector,
    data: &CodedDataset,
) -> Result<f64, ModelError> {
    let pred = linear_predictor(spec, params, data)?;
    let ll = log_likelihood(&pred, &data.response)?;
    Ok(ll.total + log_prior(spec, params)?)
}
