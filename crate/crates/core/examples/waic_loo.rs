//! WAIC and PSIS-LOO from a fitted model's pointwise log-likelihood, with
//! the Pareto shape diagnostic per observation.
//!
//!     cargo run --release --example waic_loo

use hbcrash::evaluation::{psis_loo, waic, BAD_K_THRESHOLD};
use hbcrash::sampler::{run_mcmc, McmcConfig};
use hbcrash::synthlab::{generate_synthetic, TruthScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = TruthScenario::random_slopes(-0.2, &[0.7], 0.4, 0.5, 12, 25, 8);
    let data = generate_synthetic(&scenario)?;
    let draws = run_mcmc(&scenario.spec, &data, &McmcConfig::reduced(1000, 2000, 8))?;
    let loglik = draws.pooled_loglik();

    let w = waic(&loglik)?;
    let l = psis_loo(&loglik)?;
    println!("observations {}, draws {}", data.n_rows(), loglik.len());
    println!("lppd     {:>9.2}", w.lppd);
    println!("p_waic   {:>9.2}", w.p_waic);
    println!("WAIC     {:>9.2}", w.waic);
    println!("elpd_loo {:>9.2}", l.elpd_loo);
    println!("p_loo    {:>9.2}", l.p_loo);
    println!("LOOIC    {:>9.2}", l.looic);

    let mut ks: Vec<(usize, f64)> = l.pareto_k.iter().copied().enumerate().collect();
    ks.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("\nlargest Pareto k (unreliable above {BAD_K_THRESHOLD}):");
    for (i, k) in ks.iter().take(5) {
        println!("  {:<6} {k:.3}", data.row_ids[*i]);
    }
    Ok(())
}
