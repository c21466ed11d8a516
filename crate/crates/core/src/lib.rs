//! Hierarchical Bayesian logistic regression for crash records: ingestion and
//! linkage, multicollinearity screening, random-intercept / random-slope
//! models fitted by adaptive Metropolis, and WAIC / PSIS-LOO comparison.

pub mod cli;
pub mod dataset;
pub mod evaluation;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod screening;
pub mod stats;
pub mod synthlab;
