//! Variance inflation factors for a model's fixed design, then a design
//! with an exact duplicate that the screen rejects.
//!
//!     cargo run --example vif_screen

use hbcrash::dataset::{encode_design, DrivingMode};
use hbcrash::model::HierarchicalModelSpec;
use hbcrash::rng::Stream;
use hbcrash::screening::{compute_vif_matrix, screen};
use hbcrash::synthlab::fixture::{classified_fixture, fixture_catalog};

const SPEC: &str = include_str!("../fixtures/models/severity_autonomous.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = fixture_catalog();
    let records = classified_fixture(&catalog)?;
    let spec = HierarchicalModelSpec::from_toml_str(SPEC)?;
    let coded = encode_design(records.mode(DrivingMode::Autonomous), &catalog, &spec)?;
    print!("{}", screen(&coded, 10.0)?.render_text());

    let mut rng = Stream::new(3);
    let names: Vec<String> = ["a", "b", "a_copy"].iter().map(|s| s.to_string()).collect();
    let values: Vec<f64> = (0..30)
        .flat_map(|_| {
            let a = rng.standard_normal();
            [a, rng.standard_normal(), a]
        })
        .collect();
    println!();
    print!("{}", compute_vif_matrix(&names, &values)?.with_threshold(10.0).render_text());
    Ok(())
}
