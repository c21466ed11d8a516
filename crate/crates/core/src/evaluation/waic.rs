use serde::{Deserialize, Serialize};

use super::{check_matrix, column, EvaluationError};
use crate::stats::sample_variance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub lppd: f64,
    pub p_waic: f64,
    /// Deviance scale: `-2 (lppd - p_waic)`.
    pub waic: f64,
    pub pointwise_lppd: Vec<f64>,
    pub pointwise_p_waic: Vec<f64>,
}

/// `ln(mean(exp(xs)))`, exact when every entry is equal.
pub(crate) fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + (xs.iter().map(|x| (x - m).exp()).sum::<f64>() / xs.len() as f64).ln()
}

/// WAIC from a `[draw][observation]` pointwise log-likelihood matrix.
pub fn waic(loglik: &[Vec<f64>]) -> Result<WaicResult, EvaluationError> {
    let (_, n) = check_matrix(loglik)?;
    let mut pointwise_lppd = Vec::with_capacity(n);
    let mut pointwise_p_waic = Vec::with_capacity(n);
    for i in 0..n {
        let col = column(loglik, i);
        pointwise_lppd.push(log_mean_exp(&col));
        pointwise_p_waic.push(sample_variance(&col));
    }
    let lppd: f64 = pointwise_lppd.iter().sum();
    let p_waic: f64 = pointwise_p_waic.iter().sum();
    Ok(WaicResult {
        lppd,
        p_waic,
        waic: -2.0 * (lppd - p_waic),
        pointwise_lppd,
        pointwise_p_waic,
    })
}
