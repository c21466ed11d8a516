//! Blocked adaptive random-walk Metropolis over several independent chains,
//! and the interval-width convergence check.
//!
//! Each block gets a Gaussian proposal `theta_b + lambda_b * L_b z`. During
//! burn-in `ln lambda_b` follows a Robbins-Monro recursion toward the target
//! acceptance rate and `L_b` is re-estimated from the draws of doubling
//! windows; both are frozen for every kept iteration.

mod diagnostics;
mod draws;
mod metropolis;

pub use diagnostics::{
    interval_ratio_diagnostic, mcse_mean, mcse_sd, ConvergenceReport, ParameterConvergence,
    DEFAULT_INTERVAL_PROB, DEFAULT_RATIO_TOL, MIN_DRAWS_PER_CHAIN,
};
pub use draws::{ChainDraws, PosteriorDraws, SamplerWarning};
pub use metropolis::{run_chain, run_chain_target, run_mcmc, run_mcmc_target};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("log-posterior is not finite at the initial point (chain {chain})")]
    NonFiniteLogPosterior { chain: usize },
    #[error("need at least {needed} draws per chain, have {have}")]
    InsufficientDraws { needed: usize, have: usize },
    #[error("need at least 2 chains, have {0}")]
    InsufficientChains(usize),
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub n_burnin: usize,
    /// Kept draws per chain.
    pub n_keep: usize,
    pub seed: u64,
    /// First covariance-estimation window; later windows double.
    pub adapt_window: usize,
    pub target_accept: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_chains: 2,
            n_burnin: 5000,
            n_keep: 10000,
            seed: 20_210_601,
            adapt_window: 100,
            target_accept: 0.35,
        }
    }
}

impl McmcConfig {
    pub fn reduced(n_burnin: usize, n_keep: usize, seed: u64) -> Self {
        Self {
            n_burnin,
            n_keep,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if self.n_chains == 0 {
            return bad("n_chains must be at least 1");
        }
        if self.n_keep == 0 {
            return bad("n_keep must be at least 1");
        }
        if self.adapt_window == 0 {
            return bad("adapt_window must be positive");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Proposes `s + e` for the log-variance at `log_variance` and multiplies
/// every coordinate in `effects` by `exp(e / 2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleMove {
    pub log_variance: usize,
    pub effects: Vec<usize>,
}

/// A log-density split into parameter blocks for Metropolis-within-Gibbs.
pub trait BlockTarget: Sync {
    fn dim(&self) -> usize;

    /// Disjoint index sets covering every coordinate.
    fn blocks(&self) -> Vec<Vec<usize>>;

    /// Full unnormalized log-density on the sampling scale.
    fn log_density(&self, theta: &[f64]) -> f64;

    /// Any function equal to `log_density` up to terms that do not depend on
    /// the coordinates of `block`.
    fn block_log_density(&self, _block: usize, theta: &[f64]) -> f64 {
        self.log_density(theta)
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Joint rescalings of a log-variance and the effects it governs, run
    /// after each block sweep. None by default.
    fn scale_moves(&self) -> Vec<ScaleMove> {
        Vec::new()
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("theta[{i}]")).collect()
    }

    /// Map to the reported scale (e.g. log-variances to variances).
    fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }

    fn n_obs(&self) -> usize {
        0
    }

    fn pointwise_loglik(&self, _theta: &[f64], _out: &mut [f64]) {}
}
