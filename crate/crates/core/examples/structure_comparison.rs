//! Fixed-only, random-intercept and random-slope versions of one model,
//! ranked by WAIC and LOO on the same data.
//!
//!     cargo run --release --example structure_comparison

use hbcrash::dataset::{encode_design, DrivingMode};
use hbcrash::evaluation::{compare_models, psis_loo, waic, ComparisonReport, FitScore};
use hbcrash::model::{HierarchicalModelSpec, Structure};
use hbcrash::sampler::{run_mcmc, McmcConfig};
use hbcrash::synthlab::fixture::{classified_fixture, fixture_catalog};

const SPEC: &str = include_str!("../fixtures/models/severity_autonomous.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = fixture_catalog();
    let records = classified_fixture(&catalog)?;
    let full = HierarchicalModelSpec::from_toml_str(SPEC)?;
    let variants = [
        ("fixed only", Structure::FixedOnly),
        ("random intercept", Structure::RandomIntercept),
        ("intercept + slopes", Structure::RandomInterceptAndSlopes),
    ];

    let mut scores = Vec::new();
    for (label, structure) in variants {
        let mut spec = full.clone().with_structure(structure);
        if structure != Structure::RandomInterceptAndSlopes {
            spec.random_slope_terms.clear();
        }
        let data = encode_design(records.mode(DrivingMode::Autonomous), &catalog, &spec)?;
        let draws = run_mcmc(&spec, &data, &McmcConfig::reduced(2000, 4000, 11))?;
        let loglik = draws.pooled_loglik();
        scores.push(FitScore {
            label: label.into(),
            dataset_fingerprint: data.fingerprint(),
            waic: waic(&loglik)?,
            loo: psis_loo(&loglik)?,
        });
    }

    let report = compare_models(&scores)?;
    print!("{}", report.render_text());
    let order: Vec<String> = variants.iter().map(|(l, _)| l.to_string()).collect();
    println!();
    print!("{}", ComparisonReport::render_wide(&[("severity_auto".into(), report)], &order));
    Ok(())
}
