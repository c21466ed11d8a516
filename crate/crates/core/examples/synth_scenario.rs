//! Draw data from a known-truth scenario file, fit the generating model and
//! set the estimates beside the truth.
//!
//!     cargo run --release --example synth_scenario [scenario.toml]

use hbcrash::evaluation::summarize;
use hbcrash::sampler::{run_mcmc, McmcConfig};
use hbcrash::synthlab::{generate_synthetic_with_truth, TruthScenario};

const DEFAULT_SCENARIO: &str = include_str!("../fixtures/scenarios/random_slopes.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = match std::env::args().nth(1) {
        Some(path) => TruthScenario::load(path)?,
        None => TruthScenario::from_toml_str(DEFAULT_SCENARIO)?,
    };
    let (data, truth) = generate_synthetic_with_truth(&scenario)?;
    println!(
        "{} rows in {} groups, response rate {:.3}",
        data.n_rows(),
        data.n_groups_l2(),
        data.response.iter().sum::<f64>() / data.n_rows() as f64
    );

    let draws = run_mcmc(&scenario.spec, &data, &McmcConfig::reduced(2000, 4000, scenario.seed))?;
    let summaries = summarize(&draws)?;
    let mut expected = vec![("(Intercept)".to_string(), truth.gamma00)];
    expected.extend((0..truth.gamma_p0.len()).map(|p| (data.columns[p].name.clone(), truth.gamma_p0[p])));
    expected.push(("sigma0_sq".into(), truth.sigma0_sq));
    for (k, v) in truth.sigma_k_sq.iter().enumerate() {
        expected.push((format!("sigma_sq[{}]", data.columns[k].name), *v));
    }

    println!("\n{:<16} {:>8} {:>8} {:>18}", "parameter", "truth", "mean", "95% interval");
    for (name, value) in expected {
        if let Some(s) = summaries.iter().find(|s| s.name == name) {
            println!(
                "{:<16} {:>8.3} {:>8.3}   [{:>6.3}, {:>6.3}]",
                name, value, s.estimate, s.bci_low, s.bci_high
            );
        }
    }
    Ok(())
}
