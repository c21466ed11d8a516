use serde::{Deserialize, Serialize};

use super::draws::PosteriorDraws;
use super::SamplerError;
use crate::stats::{ecdf_quantile_sorted, effective_sample_size, sample_sd, sorted_copy};

pub const DEFAULT_INTERVAL_PROB: f64 = 0.95;
pub const DEFAULT_RATIO_TOL: f64 = 1.1;
pub const MIN_DRAWS_PER_CHAIN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterConvergence {
    pub name: String,
    /// Pooled interval width over the mean within-chain width.
    pub interval_ratio: f64,
    /// Ratio outside `[1/tol, tol]`.
    pub flag: bool,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub prob: f64,
    pub tol: f64,
    pub per_parameter: Vec<ParameterConvergence>,
    /// Every ratio is at most `tol`.
    pub overall_pass: bool,
}

impl ConvergenceReport {
    pub fn flagged(&self) -> impl Iterator<Item = &ParameterConvergence> {
        self.per_parameter.iter().filter(|p| p.flag)
    }

    pub fn max_ratio(&self) -> f64 {
        self.per_parameter
            .iter()
            .map(|p| p.interval_ratio)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("parameter,interval_ratio,flag,ess\n");
        for p in &self.per_parameter {
            s.push_str(&format!("\"{}\",{},{},{}\n", p.name.replace('"', "\"\""), p.interval_ratio, p.flag, p.ess));
        }
        s
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "Interval-width ratio ({:.0}% intervals, tolerance {}): {}\n",
            self.prob * 100.0,
            self.tol,
            if self.overall_pass { "PASS" } else { "FAIL" }
        );
        let width = self.per_parameter.iter().map(|p| p.name.len()).max().unwrap_or(9).max(9);
        s.push_str(&format!("{:<width$}  {:>8}  {:>9}  flag\n", "parameter", "ratio", "ess"));
        for p in &self.per_parameter {
            s.push_str(&format!(
                "{:<width$}  {:>8.4}  {:>9.1}  {}\n",
                p.name,
                p.interval_ratio,
                p.ess,
                if p.flag { "*" } else { "" }
            ));
        }
        s
    }
}

fn central_width(sorted: &[f64], prob: f64) -> f64 {
    let a = (1.0 - prob) / 2.0;
    ecdf_quantile_sorted(sorted, 1.0 - a) - ecdf_quantile_sorted(sorted, a)
}

pub fn interval_ratio_diagnostic(
    draws: &PosteriorDraws,
    prob: f64,
    tol: f64,
) -> Result<ConvergenceReport, SamplerError> {
    if draws.n_chains() < 2 {
        return Err(SamplerError::InsufficientChains(draws.n_chains()));
    }
    let have = draws.n_keep();
    if have < MIN_DRAWS_PER_CHAIN {
        return Err(SamplerError::InsufficientDraws {
            needed: MIN_DRAWS_PER_CHAIN,
            have,
        });
    }
    let per_parameter = (0..draws.n_params())
        .map(|p| {
            let chains = draws.param_chains(p);
            let pooled = sorted_copy(&chains.concat());
            let pooled_w = central_width(&pooled, prob);
            let within = chains
                .iter()
                .map(|c| central_width(&sorted_copy(c), prob))
                .sum::<f64>()
                / chains.len() as f64;
            let ratio = if within > 0.0 {
                pooled_w / within
            } else if pooled_w == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            ParameterConvergence {
                name: draws.param_names[p].clone(),
                interval_ratio: ratio,
                flag: !(ratio >= 1.0 / tol && ratio <= tol),
                ess: effective_sample_size(&chains),
            }
        })
        .collect::<Vec<_>>();
    let overall_pass = per_parameter.iter().all(|p| p.interval_ratio <= tol);
    Ok(ConvergenceReport {
        prob,
        tol,
        per_parameter,
        overall_pass,
    })
}

/// Monte-Carlo standard error of the posterior mean.
pub fn mcse_mean(chains: &[Vec<f64>]) -> f64 {
    let pooled = chains.concat();
    sample_sd(&pooled) / effective_sample_size(chains).sqrt()
}

/// Large-sample Monte-Carlo standard error of the posterior standard deviation.
pub fn mcse_sd(chains: &[Vec<f64>]) -> f64 {
    let pooled = chains.concat();
    sample_sd(&pooled) / (2.0 * effective_sample_size(chains)).sqrt()
}
