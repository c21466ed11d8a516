//! Sampler check against quadrature: an intercept-only model on four
//! Bernoulli outcomes, where the posterior can be integrated on a grid.
//!
//!     cargo run --release --example grid_oracle

use hbcrash::model::{HierarchicalModelSpec, PriorConfig};
use hbcrash::sampler::{interval_ratio_diagnostic, mcse_mean, mcse_sd, run_mcmc, McmcConfig};
use hbcrash::stats::{mean, sample_sd};
use hbcrash::synthlab::{grid_posterior_oracle, intercept_only_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = intercept_only_dataset(&[1.0, 1.0, 0.0, 1.0])?;
    let grid = grid_posterior_oracle(&data, PriorConfig::default(), -15.0, 20.0, 0.002)?;

    let config = McmcConfig {
        n_chains: 4,
        ..McmcConfig::reduced(2000, 20_000, 1)
    };
    let draws = run_mcmc(&HierarchicalModelSpec::fixed_only("y", &[]), &data, &config)?;
    let chains = draws.param_chains(0);
    let pooled = draws.pooled(0);
    let conv = interval_ratio_diagnostic(&draws, 0.95, 1.1)?;

    println!("             grid      mcmc     mcse");
    println!("mean     {:>8.4}  {:>8.4}  {:>7.4}", grid.mean, mean(&pooled), mcse_mean(&chains));
    println!("sd       {:>8.4}  {:>8.4}  {:>7.4}", grid.sd, sample_sd(&pooled), mcse_sd(&chains));
    println!("interval ratio {:.4}", conv.max_ratio());
    Ok(())
}
