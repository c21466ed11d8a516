//! Link, classify and tabulate the bundled crash fixture.
//!
//!     cargo run --example ingest_fixture

use hbcrash::dataset::summary::FrequencyTable;
use hbcrash::dataset::{link_disengagements, read_disengagements, read_records, Disengagement, LinkSource};
use hbcrash::synthlab::fixture::{build_fixture, classified_fixture, fixture_catalog};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = fixture_catalog();
    let files = build_fixture(&catalog);
    let crashes = read_records(files.crashes_csv.as_bytes(), &catalog)?;
    let reports = read_disengagements(files.disengagements_csv.as_bytes())?;
    let linked = link_disengagements(crashes, &reports);

    let by = |src| {
        linked
            .records
            .iter()
            .filter(|r| matches!(&r.disengagement, Some(Disengagement::Present { source, .. }) if *source == src))
            .count()
    };
    println!(
        "{} crash records, {} disengagement reports: {} linked by report, {} by narrative",
        linked.records.len(),
        reports.len(),
        by(LinkSource::Report),
        by(LinkSource::Narrative)
    );

    let classified = classified_fixture(&catalog)?;
    let table = FrequencyTable::build(&classified, &catalog)?;
    print!("{}", table.render_text());
    Ok(())
}
