use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::catalog::{VariableCatalog, VariableKind, VariableOrigin};
use super::DatasetError;

pub const UNKNOWN: &str = "Unknown";

/// Crash-table columns that are not catalog variables.
pub const METADATA_COLUMNS: [&str; 10] = [
    "crash_id",
    "date",
    "manufacturer",
    "vehicle_type",
    "vehicle_year",
    "engaged_throughout",
    "manual_stated",
    "disengagement_mentioned",
    "narrative_initiator",
    "narrative_causes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingMode {
    Autonomous,
    Conventional,
}

impl DrivingMode {
    pub const ALL: [DrivingMode; 2] = [DrivingMode::Autonomous, DrivingMode::Conventional];

    pub fn as_str(self) -> &'static str {
        match self {
            DrivingMode::Autonomous => "autonomous",
            DrivingMode::Conventional => "conventional",
        }
    }
}

impl fmt::Display for DrivingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DrivingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "autonomous" => Ok(Self::Autonomous),
            "conventional" => Ok(Self::Conventional),
            other => Err(format!("unknown driving mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Initiator {
    System,
    TestDriver,
}

impl Initiator {
    /// Level label used in the coded `initiator` variable.
    pub fn level(self) -> &'static str {
        match self {
            Initiator::System => "AV system",
            Initiator::TestDriver => "Test driver",
        }
    }
}

impl FromStr for Initiator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['_', '-'], " ").as_str() {
            "system" | "av system" => Ok(Self::System),
            "test driver" | "testdriver" | "driver" => Ok(Self::TestDriver),
            other => Err(format!("unknown initiator `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cause {
    UnwantedOtherParticipant,
    UnwantedAvMovement,
    ChangingLanes,
    Deceleration,
}

impl Cause {
    pub const ALL: [Cause; 4] = [
        Cause::UnwantedOtherParticipant,
        Cause::UnwantedAvMovement,
        Cause::ChangingLanes,
        Cause::Deceleration,
    ];

    /// Name of the coded presence/absence variable for this cause.
    pub fn variable(self) -> &'static str {
        match self {
            Cause::UnwantedOtherParticipant => "unwanted_other_participant",
            Cause::UnwantedAvMovement => "unwanted_av_movement",
            Cause::ChangingLanes => "changing_lanes",
            Cause::Deceleration => "deceleration",
        }
    }
}

impl FromStr for Cause {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim();
        Cause::ALL
            .into_iter()
            .find(|c| c.variable() == key)
            .ok_or_else(|| format!("unknown disengagement cause `{key}`"))
    }
}

/// Semicolon-separated cause list; empty string is the empty set.
pub(crate) fn parse_causes(s: &str) -> Result<BTreeSet<Cause>, String> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(Cause::from_str)
        .collect()
}

pub(crate) fn format_causes(causes: &BTreeSet<Cause>) -> String {
    causes.iter().map(|c| c.variable()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeHints {
    pub engaged_throughout: bool,
    pub manual_stated: bool,
    pub disengagement_mentioned: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisengagementDetails {
    pub initiator: Option<Initiator>,
    pub causes: BTreeSet<Cause>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkSource {
    /// Matched to a disengagement report on (date, manufacturer, vehicle type).
    Report,
    /// Only the crash narrative mentions the disengagement.
    Narrative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disengagement {
    Absent,
    Present {
        source: LinkSource,
        details: DisengagementDetails,
    },
}

impl Disengagement {
    pub fn is_present(&self) -> bool {
        matches!(self, Disengagement::Present { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Number(f64),
    Category(String),
}

impl RawValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            RawValue::Number(x) => Some(*x),
            RawValue::Category(_) => None,
        }
    }
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Number(x) => write!(f, "{x}"),
            RawValue::Category(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashRecord {
    pub crash_id: String,
    pub date: NaiveDate,
    pub manufacturer: String,
    pub vehicle_type: String,
    pub vehicle_year: i32,
    pub mode_hints: ModeHints,
    /// Disengagement details read from the crash narrative, if any.
    pub narrative: DisengagementDetails,
    pub raw_fields: BTreeMap<String, RawValue>,
    /// `None` until linkage has run.
    pub disengagement: Option<Disengagement>,
}

/// One row of the disengagement report table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisengagementRecord {
    pub date: NaiveDate,
    pub manufacturer: String,
    pub vehicle_type: String,
    pub initiator: Initiator,
    pub cause_flags: BTreeSet<Cause>,
}

pub(crate) fn parse_flag(row: usize, column: &str, value: &str) -> Result<bool, DatasetError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Ok(true),
        "0" | "false" | "no" | "n" | "" => Ok(false),
        _ => Err(DatasetError::MalformedField {
            row,
            column: column.to_string(),
            value: value.to_string(),
        }),
    }
}

pub(crate) fn parse_date(row: usize, column: &str, value: &str) -> Result<NaiveDate, DatasetError> {
    NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d").map_err(|_| DatasetError::MalformedField {
        row,
        column: column.to_string(),
        value: value.to_string(),
    })
}

pub fn load_records(path: impl AsRef<Path>, catalog: &VariableCatalog) -> Result<Vec<CrashRecord>, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_records(file, catalog)
}

/// Parse a crash table. Unrecognized or blank categorical cells become
/// [`UNKNOWN`]; a continuous cell that does not parse is an error.
pub fn read_records<R: Read>(reader: R, catalog: &VariableCatalog) -> Result<Vec<CrashRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);

    for h in &header {
        let known = METADATA_COLUMNS.contains(&h.as_str())
            || catalog.get(h).is_some_and(|e| e.origin == VariableOrigin::Input);
        if !known {
            return Err(DatasetError::UnknownColumn(h.clone()));
        }
    }
    let required_meta = ["crash_id", "date", "manufacturer", "vehicle_type", "vehicle_year"];
    for m in required_meta {
        if col(m).is_none() {
            return Err(DatasetError::MissingColumn(m.to_string()));
        }
    }
    let mut var_cols = Vec::new();
    for entry in catalog.input_variables() {
        let idx = col(&entry.name).ok_or_else(|| DatasetError::MissingColumn(entry.name.clone()))?;
        var_cols.push((entry, idx));
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |name: &str| col(name).and_then(|c| rec.get(c)).unwrap_or("");

        let crash_id = get("crash_id").to_string();
        if !seen.insert(crash_id.clone()) {
            return Err(DatasetError::DuplicateCrashId(crash_id));
        }
        let date = parse_date(row, "date", get("date"))?;
        let vehicle_year = get("vehicle_year").parse::<i32>().map_err(|_| DatasetError::MalformedNumeric {
            row,
            column: "vehicle_year".into(),
            value: get("vehicle_year").into(),
        })?;
        let mode_hints = ModeHints {
            engaged_throughout: parse_flag(row, "engaged_throughout", get("engaged_throughout"))?,
            manual_stated: parse_flag(row, "manual_stated", get("manual_stated"))?,
            disengagement_mentioned: parse_flag(row, "disengagement_mentioned", get("disengagement_mentioned"))?,
        };
        let narrative_initiator = match get("narrative_initiator").trim() {
            "" => None,
            s => Some(s.parse::<Initiator>().map_err(|_| DatasetError::MalformedField {
                row,
                column: "narrative_initiator".into(),
                value: s.into(),
            })?),
        };
        let causes = parse_causes(get("narrative_causes")).map_err(|_| DatasetError::MalformedField {
            row,
            column: "narrative_causes".into(),
            value: get("narrative_causes").into(),
        })?;

        let mut raw_fields = BTreeMap::new();
        for (entry, idx) in &var_cols {
            let cell = rec.get(*idx).unwrap_or("");
            let value = match entry.kind {
                VariableKind::Continuous => {
                    let x = cell.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                        DatasetError::MalformedNumeric {
                            row,
                            column: entry.name.clone(),
                            value: cell.to_string(),
                        }
                    })?;
                    RawValue::Number(x)
                }
                VariableKind::Categorical => {
                    if entry.levels.iter().any(|l| l == cell) {
                        RawValue::Category(cell.to_string())
                    } else {
                        if !cell.is_empty() && cell != UNKNOWN {
                            log::warn!("row {row}: `{}` value {cell:?} is not a catalog level; coded as {UNKNOWN}", entry.name);
                        }
                        RawValue::Category(UNKNOWN.to_string())
                    }
                }
            };
            raw_fields.insert(entry.name.clone(), value);
        }

        out.push(CrashRecord {
            crash_id,
            date,
            manufacturer: get("manufacturer").to_string(),
            vehicle_type: get("vehicle_type").to_string(),
            vehicle_year,
            mode_hints,
            narrative: DisengagementDetails {
                initiator: narrative_initiator,
                causes,
            },
            raw_fields,
            disengagement: None,
        });
    }
    Ok(out)
}
