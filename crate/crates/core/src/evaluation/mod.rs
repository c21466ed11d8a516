//! Posterior summaries, information criteria and model ranking.

mod compare;
mod loo;
mod report;
mod summary;
mod waic;

pub use compare::{compare_models, ComparisonReport, ComparisonRow, FitScore};
pub use loo::{fit_generalized_pareto, psis_loo, GeneralizedPareto, LooResult, BAD_K_THRESHOLD};
pub use report::{plot_data_csv, FitReport};
pub use summary::{effect_magnitude, summarize, EffectMagnitude, ParameterSummary, MIN_SUMMARY_DRAWS};
pub use waic::{waic, WaicResult};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("need at least {needed} draws, have {have}")]
    InsufficientDraws { needed: usize, have: usize },
    #[error("need at least 2 draws per observation, have {0}")]
    DegenerateDraws(usize),
    #[error("pointwise log-likelihood matrix is ragged or empty")]
    Shape,
    #[error("non-finite log-likelihood at draw {draw}, observation {obs}")]
    NonFinite { draw: usize, obs: usize },
    #[error("need at least 5 tail exceedances to fit a generalized Pareto, have {0}")]
    TooFewTailSamples(usize),
    #[error("exceedances must be non-negative and finite")]
    InvalidExceedances,
    #[error("fits `{0}` and `{1}` were computed on different datasets")]
    MismatchedDataset(String, String),
    #[error("need at least 2 fits to compare, have {0}")]
    InsufficientModels(usize),
}

/// Check a `[draw][observation]` matrix and return `(S, n)`.
pub(crate) fn check_matrix(loglik: &[Vec<f64>]) -> Result<(usize, usize), EvaluationError> {
    let s = loglik.len();
    if s < 2 {
        return Err(EvaluationError::DegenerateDraws(s));
    }
    let n = loglik[0].len();
    if loglik.iter().any(|r| r.len() != n) {
        return Err(EvaluationError::Shape);
    }
    for (draw, row) in loglik.iter().enumerate() {
        if let Some(obs) = row.iter().position(|v| !v.is_finite()) {
            return Err(EvaluationError::NonFinite { draw, obs });
        }
    }
    Ok((s, n))
}

/// Column `i` of a `[draw][observation]` matrix.
pub(crate) fn column(loglik: &[Vec<f64>], i: usize) -> Vec<f64> {
    loglik.iter().map(|r| r[i]).collect()
}
