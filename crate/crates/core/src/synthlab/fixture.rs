//! Builder for the bundled 180-crash fixture.
//!
//! The fixture is synthetic. Per-mode level counts follow the published
//! codebook frequencies (96 autonomous, 84 conventional crashes); joint
//! structure beyond the margins is random apart from a few planted
//! associations for the two responses. Rows are regenerated bit-for-bit from
//! [`FIXTURE_SEED`], and a test checks the shipped CSVs against this builder.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use chrono::{Duration, NaiveDate};

use super::SynthError;
use crate::dataset::{
    classify_all, link_disengagements, read_disengagements, read_records, Cause, ClassifiedRecords, Initiator,
    VariableCatalog, METADATA_COLUMNS,
};
use crate::dataset::records_format_causes as format_causes;
use crate::rng::Stream;

pub const FIXTURE_SEED: u64 = 7;

/// Catalog shipped with the fixture.
pub const FIXTURE_CATALOG: &str = include_str!("../../fixtures/catalog.toml");

pub const N_AUTONOMOUS: usize = 96;
pub const N_CONVENTIONAL: usize = 84;

const N_LINKED_BY_REPORT: usize = 30;
const N_LINKED_BY_NARRATIVE: usize = 6;
const N_DISTRACTOR_REPORTS: usize = 40;

/// Level counts as (level, autonomous, conventional).
type Margin = (&'static str, &'static [(&'static str, usize, usize)]);

const MARGINS: &[Margin] = &[
    ("time_of_day", &[("Daytime", 60, 69), ("Night", 36, 15)]),
    ("non_motorist_involved", &[("No", 78, 58), ("Yes", 18, 26)]),
    ("intersection", &[("No", 33, 28), ("Yes", 63, 56)]),
    ("light", &[("Dark", 54, 5), ("Daylight", 42, 79)]),
    ("roadway_surface", &[("Dry", 91, 75), ("Wet", 3, 6), ("Unknown", 2, 3)]),
    ("metro_stop", &[("Absence", 51, 39), ("Presence", 45, 45)]),
    ("trees", &[("Absence", 19, 23), ("Presence", 77, 61)]),
    (
        "land_use",
        &[("Commercial", 26, 8), ("Industrial", 3, 5), ("Mixed or public", 39, 48), ("Residential", 28, 23)],
    ),
    (
        "weather",
        &[("Clear weather", 85, 74), ("Cloudy", 5, 7), ("Fog/Visibility", 2, 0), ("Raining", 3, 3), ("Unknown", 1, 0)],
    ),
    ("muni_line", &[("Absence", 20, 12), ("Presence", 76, 72)]),
    (
        "dvf",
        &[("DVF<3418", 30, 32), ("3418<=DVF<11982", 33, 23), ("11982<=DVF<40040", 28, 24), ("DVF>=40040", 5, 5)],
    ),
    ("pavement_markings", &[("Poor", 6, 6), ("Adequate", 90, 78)]),
    ("schools", &[("Schools>4", 20, 16), ("Schools<=4", 76, 68)]),
    ("parks", &[("Parks>4", 6, 5), ("Parks<=4", 90, 79)]),
    ("street_class", &[("High", 1, 0), ("Arterial", 20, 16), ("Collector", 33, 29), ("Residential", 42, 39)]),
    ("one_way", &[("No", 62, 56), ("Yes", 34, 28)]),
    ("divided_median", &[("Absence", 80, 76), ("Presence", 16, 8)]),
    ("marked_centerline", &[("Absence", 56, 43), ("Presence", 40, 41)]),
    ("bike_lane", &[("Absence", 70, 54), ("Presence", 26, 30)]),
    ("on_street_parking", &[("Absence", 15, 11), ("Presence", 81, 73)]),
    ("off_street_parking", &[("Absence", 1, 3), ("Presence", 95, 81)]),
    ("traffic_calming", &[("Absence", 69, 58), ("Presence", 27, 26)]),
    ("sidewalk", &[("Absence or one side", 5, 7), ("Both sides", 91, 77)]),
    ("driveway", &[("Driveways<4", 65, 51), ("Driveways>=4", 31, 33)]),
    ("crash_lanes", &[("Crash lanes>2", 36, 27), ("Crash lanes<=2", 60, 57)]),
    ("street_width", &[("Street width>60 feet", 21, 15), ("Street width<=60 feet", 75, 69)]),
    ("speed_limit", &[("Speed limit>25 mph", 11, 8), ("Speed limit<=25 mph", 85, 76)]),
    ("slope", &[("Slope>3%", 42, 31), ("Slope<=3%", 54, 53)]),
    ("turning_movement", &[("No", 84, 53), ("Yes", 12, 31)]),
    ("vehicle_state", &[("Stopped", 32, 37), ("Moving", 64, 47)]),
    ("vehicles_involved", &[("1", 11, 13), ("2", 84, 69), ("3", 1, 2)]),
];

const INJURY: (usize, usize) = (22, 14);

const CRASH_TYPES: &[(&str, usize, usize)] = &[
    ("Rear-end", 57, 34),
    ("Sideswipe", 20, 24),
    ("Head-on", 3, 4),
    ("Hit pedestrian", 2, 4),
    ("Hit non-motor vehicle", 5, 6),
    ("Others", 9, 12),
];

const MANUFACTURERS: &[(&str, &str, usize, usize)] = &[
    ("Aurora Innovation, Inc.", "MKZ", 0, 1),
    ("GM Cruise LLC", "Bolt", 79, 53),
    ("Lyft, Inc.", "Pacifica", 0, 2),
    ("Waymo LLC", "Pacifica", 8, 9),
    ("Zoox, Inc.", "Highlander", 9, 19),
];

const VEHICLE_YEARS: &[(&str, usize, usize)] = &[
    ("2016", 9, 17),
    ("2017", 20, 16),
    ("2018", 0, 1),
    ("2019", 21, 15),
    ("2020", 45, 34),
    ("2021", 1, 1),
];

/// Disengagement causes among the 36 disengaged autonomous crashes.
const CAUSE_COUNTS: [(Cause, usize); 4] = [
    (Cause::UnwantedOtherParticipant, 19),
    (Cause::UnwantedAvMovement, 1),
    (Cause::ChangingLanes, 32),
    (Cause::Deceleration, 20),
];
const SYSTEM_INITIATED: usize = 1;

/// Raw values for a binned continuous variable: integers `lo..=hi` in steps
/// of `step`. The first row of each bin gets `edge`, the value next to the
/// cut point, so boundary handling is exercised.
struct RawBin {
    variable: &'static str,
    level: &'static str,
    lo: i32,
    hi: i32,
    step: i32,
    edge: i32,
}

const RAW_BINS: &[RawBin] = &[
    RawBin { variable: "schools", level: "Schools>4", lo: 5, hi: 9, step: 1, edge: 5 },
    RawBin { variable: "schools", level: "Schools<=4", lo: 0, hi: 4, step: 1, edge: 4 },
    RawBin { variable: "parks", level: "Parks>4", lo: 5, hi: 6, step: 1, edge: 5 },
    RawBin { variable: "parks", level: "Parks<=4", lo: 0, hi: 4, step: 1, edge: 4 },
    RawBin { variable: "driveway", level: "Driveways<4", lo: 1, hi: 3, step: 1, edge: 3 },
    RawBin { variable: "driveway", level: "Driveways>=4", lo: 4, hi: 8, step: 1, edge: 4 },
    RawBin { variable: "crash_lanes", level: "Crash lanes>2", lo: 3, hi: 6, step: 1, edge: 3 },
    RawBin { variable: "crash_lanes", level: "Crash lanes<=2", lo: 1, hi: 2, step: 1, edge: 2 },
    RawBin { variable: "street_width", level: "Street width>60 feet", lo: 61, hi: 140, step: 1, edge: 61 },
    RawBin { variable: "street_width", level: "Street width<=60 feet", lo: 22, hi: 60, step: 1, edge: 60 },
    RawBin { variable: "speed_limit", level: "Speed limit>25 mph", lo: 30, hi: 30, step: 5, edge: 30 },
    RawBin { variable: "speed_limit", level: "Speed limit<=25 mph", lo: 15, hi: 25, step: 5, edge: 25 },
    RawBin { variable: "slope", level: "Slope>3%", lo: 4, hi: 10, step: 1, edge: 4 },
    RawBin { variable: "slope", level: "Slope<=3%", lo: 1, hi: 3, step: 1, edge: 3 },
];

/// Planted log-odds shifts used to rank rows for the injury response.
const INJURY_SHIFTS: &[(&str, &str, f64)] = &[
    ("vehicle_state", "Moving", 1.0),
    ("non_motorist_involved", "Yes", 1.2),
    ("time_of_day", "Daytime", -0.5),
    ("bike_lane", "Presence", 0.6),
];

/// Planted log-odds shifts for the rear-end crash type.
const REAR_END_SHIFTS: &[(&str, &str, f64)] = &[
    ("vehicle_state", "Stopped", 1.2),
    ("turning_movement", "Yes", 0.6),
    ("non_motorist_involved", "No", 1.0),
    ("intersection", "Yes", 0.4),
];

/// Text of the two fixture tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureFiles {
    pub crashes_csv: String,
    pub disengagements_csv: String,
}

pub fn fixture_catalog() -> VariableCatalog {
    VariableCatalog::from_toml_str(FIXTURE_CATALOG).expect("shipped catalog parses")
}

#[derive(Debug, Clone)]
struct Row {
    autonomous: bool,
    date: NaiveDate,
    manufacturer: &'static str,
    vehicle_type: &'static str,
    vehicle_year: &'static str,
    engaged_throughout: bool,
    manual_stated: bool,
    disengagement_mentioned: bool,
    narrative_initiator: Option<Initiator>,
    narrative_causes: BTreeSet<Cause>,
    /// Input-variable values in catalog input order.
    values: Vec<String>,
}

/// Counts expanded to one label per row, shuffled.
fn spread(rng: &mut Stream, counts: impl IntoIterator<Item = (&'static str, usize)>) -> Vec<&'static str> {
    let mut v: Vec<&'static str> = counts
        .into_iter()
        .flat_map(|(l, n)| std::iter::repeat_n(l, n))
        .collect();
    rng.shuffle(&mut v);
    v
}

fn date_range() -> (NaiveDate, i64) {
    let start = NaiveDate::from_ymd_opt(2018, 5, 1).expect("valid date");
    let end = NaiveDate::from_ymd_opt(2021, 3, 31).expect("valid date");
    (start, (end - start).num_days() + 1)
}

fn random_date(rng: &mut Stream) -> NaiveDate {
    let (start, days) = date_range();
    start + Duration::days(rng.below(days as usize) as i64)
}

fn logistic_noise(rng: &mut Stream) -> f64 {
    let u = rng.uniform().clamp(1e-12, 1.0 - 1e-12);
    (u / (1.0 - u)).ln()
}

/// Indices of the `k` rows with the highest planted score plus noise.
fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn build_mode(
    rng: &mut Stream,
    catalog: &VariableCatalog,
    autonomous: bool,
    taken_keys: &mut HashSet<(NaiveDate, &'static str, &'static str)>,
) -> Vec<Row> {
    let n = if autonomous { N_AUTONOMOUS } else { N_CONVENTIONAL };
    let pick = |a: usize, c: usize| if autonomous { a } else { c };
    let inputs: Vec<&str> = catalog.input_variables().map(|e| e.name.as_str()).collect();

    let mut columns: Vec<Vec<String>> = Vec::with_capacity(inputs.len());
    for &var in &inputs {
        let col: Vec<String> = if let Some((_, levels)) = MARGINS.iter().find(|(v, _)| *v == var) {
            let labels = spread(rng, levels.iter().map(|&(l, a, c)| (l, pick(a, c))));
            let bins: Vec<&RawBin> = RAW_BINS.iter().filter(|b| b.variable == var).collect();
            if bins.is_empty() {
                labels.into_iter().map(str::to_string).collect()
            } else {
                let mut first_seen = HashSet::new();
                labels
                    .into_iter()
                    .map(|l| {
                        let bin = bins.iter().find(|b| b.level == l).expect("raw bin for every level");
                        let v = if first_seen.insert(l) {
                            bin.edge
                        } else {
                            let steps = ((bin.hi - bin.lo) / bin.step) as usize + 1;
                            bin.lo + bin.step * rng.below(steps) as i32
                        };
                        v.to_string()
                    })
                    .collect()
            }
        } else {
            // Responses are filled below.
            vec![String::new(); n]
        };
        assert_eq!(col.len(), n, "margins for `{var}` sum to the mode size");
        columns.push(col);
    }
    let col_of = |name: &str| inputs.iter().position(|v| *v == name).expect("input variable");
    let score = |rng: &mut Stream, shifts: &[(&str, &str, f64)], columns: &[Vec<String>]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let planted: f64 = shifts
                    .iter()
                    .filter(|(v, l, _)| columns[col_of(v)][i] == *l)
                    .map(|(_, _, s)| s)
                    .sum();
                planted + logistic_noise(rng)
            })
            .collect()
    };

    let injury_scores = score(rng, INJURY_SHIFTS, &columns);
    let injured: HashSet<usize> = top_k(&injury_scores, pick(INJURY.0, INJURY.1)).into_iter().collect();
    let c_injury = col_of("injury");
    for (i, cell) in columns[c_injury].iter_mut().enumerate() {
        *cell = if injured.contains(&i) { "Yes" } else { "No" }.to_string();
    }
    let rear_scores = score(rng, REAR_END_SHIFTS, &columns);
    let n_rear = pick(CRASH_TYPES[0].1, CRASH_TYPES[0].2);
    let rear: HashSet<usize> = top_k(&rear_scores, n_rear).into_iter().collect();
    let others = spread(rng, CRASH_TYPES[1..].iter().map(|&(l, a, c)| (l, pick(a, c))));
    let c_type = col_of("crash_type");
    let mut rest = others.into_iter();
    for (i, cell) in columns[c_type].iter_mut().enumerate() {
        *cell = if rear.contains(&i) {
            CRASH_TYPES[0].0.to_string()
        } else {
            rest.next().expect("crash type counts sum to mode size").to_string()
        };
    }

    let makers = spread(rng, MANUFACTURERS.iter().map(|&(m, _, a, c)| (m, pick(a, c))));
    let years = spread(rng, VEHICLE_YEARS.iter().map(|&(y, a, c)| (y, pick(a, c))));
    assert_eq!(makers.len(), n);
    assert_eq!(years.len(), n);

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let manufacturer = makers[i];
        let vehicle_type = MANUFACTURERS
            .iter()
            .find(|m| m.0 == manufacturer)
            .map(|m| m.1)
            .expect("known manufacturer");
        let date = loop {
            let d = random_date(rng);
            if taken_keys.insert((d, manufacturer, vehicle_type)) {
                break d;
            }
        };
        rows.push(Row {
            autonomous,
            date,
            manufacturer,
            vehicle_type,
            vehicle_year: years[i],
            engaged_throughout: autonomous,
            manual_stated: !autonomous,
            disengagement_mentioned: false,
            narrative_initiator: None,
            narrative_causes: BTreeSet::new(),
            values: columns.iter().map(|c| c[i].clone()).collect(),
        });
    }
    rows
}

struct Report {
    date: NaiveDate,
    manufacturer: &'static str,
    vehicle_type: &'static str,
    initiator: Initiator,
    causes: BTreeSet<Cause>,
}

/// Generate the fixture tables for `catalog` (normally [`fixture_catalog`]).
pub fn build_fixture(catalog: &VariableCatalog) -> FixtureFiles {
    build_fixture_with_seed(catalog, FIXTURE_SEED)
}

/// Same margins as the shipped fixture, different row-level draws.
pub fn build_fixture_with_seed(catalog: &VariableCatalog, seed: u64) -> FixtureFiles {
    let mut rng = Stream::new(seed);
    let mut keys = HashSet::new();
    let mut auto = build_mode(&mut rng, catalog, true, &mut keys);
    let conv = build_mode(&mut rng, catalog, false, &mut keys);

    // Disengaged autonomous crashes: report-linked first, then narrative-only.
    let n_dis = N_LINKED_BY_REPORT + N_LINKED_BY_NARRATIVE;
    let mut order: Vec<usize> = (0..auto.len()).collect();
    rng.shuffle(&mut order);
    let disengaged = &order[..n_dis];
    let mut causes = vec![BTreeSet::new(); n_dis];
    for (cause, count) in CAUSE_COUNTS {
        let mut slots: Vec<usize> = (0..n_dis).collect();
        rng.shuffle(&mut slots);
        for &s in &slots[..count] {
            causes[s].insert(cause);
        }
    }
    let mut slots: Vec<usize> = (0..n_dis).collect();
    rng.shuffle(&mut slots);
    let system_slots: HashSet<usize> = slots[..SYSTEM_INITIATED].iter().copied().collect();
    let mut reports = Vec::new();
    for (slot, &i) in disengaged.iter().enumerate() {
        let initiator = if system_slots.contains(&slot) {
            Initiator::System
        } else {
            Initiator::TestDriver
        };
        let row = &mut auto[i];
        row.engaged_throughout = false;
        if slot < N_LINKED_BY_REPORT {
            reports.push(Report {
                date: row.date,
                manufacturer: row.manufacturer,
                vehicle_type: row.vehicle_type,
                initiator,
                causes: causes[slot].clone(),
            });
        } else {
            row.disengagement_mentioned = true;
            row.narrative_initiator = Some(initiator);
            row.narrative_causes = causes[slot].clone();
        }
    }
    // Reports for disengagements that did not end in a crash.
    let auto_makers: Vec<&(&str, &str, usize, usize)> = MANUFACTURERS.iter().filter(|m| m.2 > 0).collect();
    while reports.len() < N_LINKED_BY_REPORT + N_DISTRACTOR_REPORTS {
        let m = auto_makers[rng.below(auto_makers.len())];
        let date = random_date(&mut rng);
        if !keys.insert((date, m.0, m.1)) {
            continue;
        }
        let mut c = BTreeSet::new();
        for cause in Cause::ALL {
            if rng.bernoulli(0.3) {
                c.insert(cause);
            }
        }
        reports.push(Report {
            date,
            manufacturer: m.0,
            vehicle_type: m.1,
            initiator: if rng.bernoulli(0.2) {
                Initiator::System
            } else {
                Initiator::TestDriver
            },
            causes: c,
        });
    }
    reports.sort_by(|a, b| (a.date, a.manufacturer).cmp(&(b.date, b.manufacturer)));

    let mut rows: Vec<Row> = auto.into_iter().chain(conv).collect();
    rows.sort_by(|a, b| (a.date, a.manufacturer).cmp(&(b.date, b.manufacturer)));

    FixtureFiles {
        crashes_csv: crashes_csv(catalog, &rows),
        disengagements_csv: disengagements_csv(&reports),
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn crashes_csv(catalog: &VariableCatalog, rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let inputs: Vec<&str> = catalog.input_variables().map(|e| e.name.as_str()).collect();
    let header: Vec<&str> = METADATA_COLUMNS.iter().copied().chain(inputs.iter().copied()).collect();
    w.write_record(&header).expect("in-memory write");
    for (i, r) in rows.iter().enumerate() {
        let mut rec: Vec<String> = vec![
            format!("CR{:04}", i + 1),
            r.date.to_string(),
            r.manufacturer.to_string(),
            r.vehicle_type.to_string(),
            r.vehicle_year.to_string(),
            flag(r.engaged_throughout).into(),
            flag(r.manual_stated).into(),
            flag(r.disengagement_mentioned).into(),
            r.narrative_initiator.map(|i| i.level().to_string()).unwrap_or_default(),
            format_causes(&r.narrative_causes),
        ];
        debug_assert!(r.autonomous || !r.disengagement_mentioned);
        rec.extend(r.values.iter().cloned());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn disengagements_csv(reports: &[Report]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "manufacturer", "vehicle_type", "initiator", "causes"])
        .expect("in-memory write");
    for r in reports {
        w.write_record([
            r.date.to_string(),
            r.manufacturer.to_string(),
            r.vehicle_type.to_string(),
            r.initiator.level().to_string(),
            format_causes(&r.causes),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// The fixture linked and split by driving mode, ready for encoding.
pub fn classified_fixture(catalog: &VariableCatalog) -> Result<ClassifiedRecords, SynthError> {
    let files = build_fixture(catalog);
    let crashes = read_records(files.crashes_csv.as_bytes(), catalog)?;
    let reports = read_disengagements(files.disengagements_csv.as_bytes())?;
    Ok(classify_all(link_disengagements(crashes, &reports).records)?)
}

/// Write `catalog.toml`, `crashes.csv` and `disengagements.csv` into `dir`.
pub fn write_fixture(dir: impl AsRef<Path>) -> Result<FixtureFiles, SynthError> {
    write_fixture_with_seed(dir, FIXTURE_SEED)
}

pub fn write_fixture_with_seed(dir: impl AsRef<Path>, seed: u64) -> Result<FixtureFiles, SynthError> {
    let dir = dir.as_ref();
    let io = |path: &Path, source| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let files = build_fixture_with_seed(&fixture_catalog(), seed);
    for (name, text) in [
        ("catalog.toml", FIXTURE_CATALOG),
        ("crashes.csv", files.crashes_csv.as_str()),
        ("disengagements.csv", files.disengagements_csv.as_str()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::summary::FrequencyTable;
    use crate::dataset::{encode_design, DrivingMode, VariableKind, VariableOrigin};
    use crate::model::HierarchicalModelSpec;

    /// Sanity checks tying the margin tables to the catalog.
    fn check_tables(catalog: &VariableCatalog) -> Result<(), String> {
        for (var, levels) in MARGINS {
            let e = catalog.get(var).ok_or_else(|| format!("`{var}` missing from catalog"))?;
            if e.origin != VariableOrigin::Input {
                return Err(format!("`{var}` is not an input variable"));
            }
            for (l, _, _) in levels.iter() {
                if !e.has_level(l) {
                    return Err(format!("`{var}` has no level `{l}`"));
                }
            }
            let is_binned = RAW_BINS.iter().any(|b| b.variable == *var);
            if is_binned != (e.kind == VariableKind::Continuous) {
                return Err(format!("`{var}` raw bins do not match its kind"));
            }
        }
        Ok(())
    }

    #[test]
    fn tables_agree_with_catalog() {
        check_tables(&fixture_catalog()).unwrap();
    }

    #[test]
    fn shipped_files_match_builder() {
        let files = build_fixture(&fixture_catalog());
        assert_eq!(files.crashes_csv, include_str!("../../fixtures/crashes.csv"));
        assert_eq!(files.disengagements_csv, include_str!("../../fixtures/disengagements.csv"));
    }

    #[test]
    fn margins_are_reproduced() {
        let catalog = fixture_catalog();
        let files = build_fixture(&catalog);
        let crashes = read_records(files.crashes_csv.as_bytes(), &catalog).unwrap();
        let reports = read_disengagements(files.disengagements_csv.as_bytes()).unwrap();
        let linked = link_disengagements(crashes, &reports);
        assert!(linked.ambiguous.is_empty());
        let classified = classify_all(linked.records).unwrap();
        assert_eq!(classified.autonomous.len(), N_AUTONOMOUS);
        assert_eq!(classified.conventional.len(), N_CONVENTIONAL);
        let table = FrequencyTable::build(&classified, &catalog).unwrap();
        let (a, c) = (DrivingMode::Autonomous, DrivingMode::Conventional);
        for (var, levels) in MARGINS {
            for &(l, na, nc) in levels.iter() {
                assert_eq!(table.count(var, l, a), Some(na), "{var}[{l}]");
                assert_eq!(table.count(var, l, c), Some(nc), "{var}[{l}]");
            }
        }
        assert_eq!(table.count("disengagement", "Presence", a), Some(36));
        assert_eq!(table.count("initiator", "AV system", a), Some(1));
        assert_eq!(table.count("initiator", "Test driver", a), Some(35));
        assert_eq!(table.count("changing_lanes", "Presence", a), Some(32));
        assert_eq!(table.count("injury", "Yes", a), Some(22));
        assert_eq!(table.count("crash_type", "Rear-end", c), Some(34));
        assert_eq!(table.count("manufacturer", "GM Cruise LLC", a), Some(79));
        assert_eq!(table.count("vehicle_year", "2020", c), Some(34));
    }

    #[test]
    fn shipped_models_have_no_empty_cells() {
        let catalog = fixture_catalog();
        let classified = classified_fixture(&catalog).unwrap();
        for (spec, mode) in [
            (include_str!("../../fixtures/models/severity_autonomous.toml"), DrivingMode::Autonomous),
            (include_str!("../../fixtures/models/severity_conventional.toml"), DrivingMode::Conventional),
            (include_str!("../../fixtures/models/rear_end_autonomous.toml"), DrivingMode::Autonomous),
            (include_str!("../../fixtures/models/rear_end_conventional.toml"), DrivingMode::Conventional),
        ] {
            let spec = HierarchicalModelSpec::from_toml_str(spec).unwrap();
            let data = encode_design(classified.mode(mode), &catalog, &spec).unwrap();
            for p in 0..data.n_fixed() {
                let mut cells = [0usize; 4];
                for i in 0..data.n_rows() {
                    cells[2 * (data.x(i, p) as usize) + data.response[i] as usize] += 1;
                }
                assert!(cells.iter().all(|&c| c > 0), "{} {}: {cells:?}", data.response_name, data.columns[p].name);
            }
        }
    }
}
