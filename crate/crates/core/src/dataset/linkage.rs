use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use super::records::{
    parse_causes, parse_date, Cause, CrashRecord, Disengagement, DisengagementDetails, DisengagementRecord,
    DrivingMode, Initiator, LinkSource, RawValue, UNKNOWN,
};
use super::DatasetError;

/// Variables filled in by linkage, in catalog order.
pub const DERIVED_VARIABLES: [&str; 6] = [
    "disengagement",
    "initiator",
    "unwanted_other_participant",
    "unwanted_av_movement",
    "changing_lanes",
    "deceleration",
];

pub fn load_disengagements(path: impl AsRef<Path>) -> Result<Vec<DisengagementRecord>, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_disengagements(file)
}

/// Columns: `date,manufacturer,vehicle_type,initiator,causes`.
pub fn read_disengagements<R: Read>(reader: R) -> Result<Vec<DisengagementRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let idx = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let (c_date, c_mfr, c_type, c_init) = (idx("date")?, idx("manufacturer")?, idx("vehicle_type")?, idx("initiator")?);
    let c_causes = header.iter().position(|h| h == "causes");

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let initiator = cell(c_init).parse::<Initiator>().map_err(|_| DatasetError::MalformedField {
            row,
            column: "initiator".into(),
            value: cell(c_init).into(),
        })?;
        let causes_cell = c_causes.map(cell).unwrap_or("");
        let cause_flags = parse_causes(causes_cell).map_err(|_| DatasetError::MalformedField {
            row,
            column: "causes".into(),
            value: causes_cell.into(),
        })?;
        out.push(DisengagementRecord {
            date: parse_date(row, "date", cell(c_date))?,
            manufacturer: cell(c_mfr).to_string(),
            vehicle_type: cell(c_type).to_string(),
            initiator,
            cause_flags,
        });
    }
    Ok(out)
}

/// A crash that matched more than one disengagement report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmbiguousMatch {
    pub crash_id: String,
    pub candidates: usize,
}

#[derive(Debug, Clone)]
pub struct LinkageReport {
    pub records: Vec<CrashRecord>,
    pub ambiguous: Vec<AmbiguousMatch>,
}

/// Mark each crash disengagement-present or absent by exact
/// (date, manufacturer, vehicle type) match, falling back to the narrative
/// flag, and fill the derived disengagement variables.
///
/// When several reports share a crash's key, the first one in file order is
/// used and the crash is listed in [`LinkageReport::ambiguous`].
pub fn link_disengagements(crashes: Vec<CrashRecord>, diseng: &[DisengagementRecord]) -> LinkageReport {
    let mut index: HashMap<(NaiveDate, &str, &str), Vec<&DisengagementRecord>> = HashMap::new();
    for d in diseng {
        index
            .entry((d.date, d.manufacturer.as_str(), d.vehicle_type.as_str()))
            .or_default()
            .push(d);
    }

    let mut ambiguous = Vec::new();
    let records = crashes
        .into_iter()
        .map(|mut crash| {
            let key = (crash.date, crash.manufacturer.as_str(), crash.vehicle_type.as_str());
            let status = match index.get(&key) {
                Some(matches) => {
                    if matches.len() > 1 {
                        log::warn!(
                            "crash {} matches {} disengagement reports; using the first",
                            crash.crash_id,
                            matches.len()
                        );
                        ambiguous.push(AmbiguousMatch {
                            crash_id: crash.crash_id.clone(),
                            candidates: matches.len(),
                        });
                    }
                    let d = matches[0];
                    Disengagement::Present {
                        source: LinkSource::Report,
                        details: DisengagementDetails {
                            initiator: Some(d.initiator),
                            causes: d.cause_flags.clone(),
                        },
                    }
                }
                None if crash.mode_hints.disengagement_mentioned => Disengagement::Present {
                    source: LinkSource::Narrative,
                    details: crash.narrative.clone(),
                },
                None => Disengagement::Absent,
            };
            fill_derived(&mut crash, &status);
            crash.disengagement = Some(status);
            crash
        })
        .collect();

    LinkageReport { records, ambiguous }
}

fn fill_derived(crash: &mut CrashRecord, status: &Disengagement) {
    let presence = |b: bool| RawValue::Category(if b { "Presence" } else { "Absence" }.to_string());
    let (present, details) = match status {
        Disengagement::Absent => (false, None),
        Disengagement::Present { details, .. } => (true, Some(details)),
    };
    let initiator = match details {
        None => "No".to_string(),
        Some(d) => d.initiator.map_or(UNKNOWN.to_string(), |i| i.level().to_string()),
    };
    let f = &mut crash.raw_fields;
    f.insert(DERIVED_VARIABLES[0].into(), presence(present));
    f.insert(DERIVED_VARIABLES[1].into(), RawValue::Category(initiator));
    for cause in Cause::ALL {
        let on = details.is_some_and(|d| d.causes.contains(&cause));
        f.insert(cause.variable().into(), presence(on));
    }
}

/// Autonomous when the system stayed engaged or a disengagement is present;
/// conventional when manual driving is stated and no disengagement exists.
pub fn classify_mode(record: &CrashRecord) -> Result<DrivingMode, DatasetError> {
    let status = record
        .disengagement
        .as_ref()
        .ok_or_else(|| DatasetError::NotLinked(record.crash_id.clone()))?;
    if record.mode_hints.engaged_throughout || status.is_present() {
        Ok(DrivingMode::Autonomous)
    } else if record.mode_hints.manual_stated {
        Ok(DrivingMode::Conventional)
    } else {
        Err(DatasetError::UnclassifiableRecord(record.crash_id.clone()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClassifiedRecords {
    pub autonomous: Vec<CrashRecord>,
    pub conventional: Vec<CrashRecord>,
    /// (crash id, reason)
    pub excluded: Vec<(String, String)>,
}

impl ClassifiedRecords {
    pub fn mode(&self, mode: DrivingMode) -> &[CrashRecord] {
        match mode {
            DrivingMode::Autonomous => &self.autonomous,
            DrivingMode::Conventional => &self.conventional,
        }
    }
}

/// Partition linked records by driving mode. Unclassifiable records are
/// excluded with a logged reason; unlinked records are an error.
pub fn classify_all(records: Vec<CrashRecord>) -> Result<ClassifiedRecords, DatasetError> {
    let mut out = ClassifiedRecords::default();
    for r in records {
        match classify_mode(&r) {
            Ok(DrivingMode::Autonomous) => out.autonomous.push(r),
            Ok(DrivingMode::Conventional) => out.conventional.push(r),
            Err(e @ DatasetError::UnclassifiableRecord(_)) => {
                log::warn!("excluding crash {}: {e}", r.crash_id);
                out.excluded.push((r.crash_id.clone(), e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
