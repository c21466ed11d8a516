//! Fit the autonomous-mode injury model on the fixture and print the
//! coefficient table with odds ratios and the convergence check.
//!
//!     cargo run --release --example fit_hierarchical [n_keep]

use hbcrash::dataset::{encode_design, DrivingMode};
use hbcrash::evaluation::{effect_magnitude, psis_loo, summarize, waic, FitReport};
use hbcrash::model::{HierarchicalModelSpec, ParameterLayout, ParameterRole};
use hbcrash::sampler::{interval_ratio_diagnostic, run_mcmc, McmcConfig};
use hbcrash::synthlab::fixture::{classified_fixture, fixture_catalog};

const SPEC: &str = include_str!("../fixtures/models/severity_autonomous.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_keep = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10_000);
    let catalog = fixture_catalog();
    let records = classified_fixture(&catalog)?;
    let spec = HierarchicalModelSpec::from_toml_str(SPEC)?;
    let data = encode_design(records.mode(DrivingMode::Autonomous), &catalog, &spec)?;

    let config = McmcConfig {
        n_keep,
        n_burnin: n_keep / 2,
        ..McmcConfig::default()
    };
    let draws = run_mcmc(&spec, &data, &config)?;
    let conv = interval_ratio_diagnostic(&draws, 0.95, 1.1)?;
    let loglik = draws.pooled_loglik();
    let summaries = summarize(&draws)?;
    let roles = ParameterLayout::new(&spec, &data)?.roles();

    let report = FitReport {
        label: "severity_auto".into(),
        title: format!("Injury severity, autonomous mode ({})", spec.structure.label()),
        mode: Some(DrivingMode::Autonomous),
        n_obs: data.n_rows(),
        summaries: summaries.clone(),
        roles: roles.clone(),
        columns: data.columns.clone(),
        reference_levels: data.reference_levels.clone(),
        waic: waic(&loglik)?,
        loo: psis_loo(&loglik)?,
        converged: conv.overall_pass,
    };
    print!("{}", report.render_text());

    let significant: Vec<_> = summaries
        .iter()
        .zip(&roles)
        .filter(|(s, role)| matches!(role, ParameterRole::Fixed | ParameterRole::Level2) && s.significant)
        .collect();
    println!("\nSignificant effects on the odds of injury: {}", significant.len());
    for (s, _) in significant {
        println!("  {:<32} {}", s.name, effect_magnitude(s));
    }
    println!("\nmax interval ratio {:.3}", conv.max_ratio());
    Ok(())
}
