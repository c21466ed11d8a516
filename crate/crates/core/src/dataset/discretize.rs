use std::collections::BTreeMap;

use super::catalog::{VariableCatalog, VariableEntry, VariableKind, VariableOrigin};
use super::records::{CrashRecord, RawValue};
use super::DatasetError;

/// A continuous value outside its catalog range. Reported, not fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeWarning {
    pub crash_id: String,
    pub variable: String,
    pub value: f64,
}

/// Coded categorical value for every catalog variable of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub values: BTreeMap<String, String>,
    pub warnings: Vec<RangeWarning>,
}

/// Level of a continuous variable for `value`. The boundary falls on the
/// side the rule's strict inequality excludes.
pub fn discretize_value(entry: &VariableEntry, value: f64) -> Option<&str> {
    entry.threshold.as_ref().map(|rule| rule.level_for(value))
}

fn metadata_value(record: &CrashRecord, name: &str) -> Option<String> {
    match name {
        "manufacturer" => Some(record.manufacturer.clone()),
        "vehicle_year" => Some(record.vehicle_year.to_string()),
        "vehicle_type" => Some(record.vehicle_type.clone()),
        _ => None,
    }
}

pub fn discretize(record: &CrashRecord, catalog: &VariableCatalog) -> Result<Discretized, DatasetError> {
    let mut values = BTreeMap::new();
    let mut warnings = Vec::new();
    for entry in &catalog.entries {
        let coded = match entry.origin {
            VariableOrigin::Metadata => metadata_value(record, &entry.name)
                .ok_or_else(|| DatasetError::UnknownVariable(entry.name.clone()))?,
            VariableOrigin::Input | VariableOrigin::Linkage => {
                let raw = match record.raw_fields.get(&entry.name) {
                    Some(v) => v,
                    None if entry.origin == VariableOrigin::Linkage => {
                        return Err(DatasetError::NotLinked(record.crash_id.clone()))
                    }
                    None => {
                        return Err(DatasetError::MissingValue {
                            crash_id: record.crash_id.clone(),
                            variable: entry.name.clone(),
                        })
                    }
                };
                match (entry.kind, raw) {
                    (VariableKind::Continuous, RawValue::Number(x)) => {
                        let rule = entry.threshold.as_ref().expect("validated catalog");
                        if rule.count && *x < 0.0 {
                            return Err(DatasetError::NegativeCount {
                                crash_id: record.crash_id.clone(),
                                variable: entry.name.clone(),
                                value: *x,
                            });
                        }
                        if !rule.in_range(*x) {
                            log::warn!("crash {}: {} = {x} outside catalog range", record.crash_id, entry.name);
                            warnings.push(RangeWarning {
                                crash_id: record.crash_id.clone(),
                                variable: entry.name.clone(),
                                value: *x,
                            });
                        }
                        rule.level_for(*x).to_string()
                    }
                    (VariableKind::Continuous, RawValue::Category(s)) => {
                        return Err(DatasetError::MalformedNumeric {
                            row: 0,
                            column: entry.name.clone(),
                            value: s.clone(),
                        })
                    }
                    (VariableKind::Categorical, v) => v.to_string(),
                }
            }
        };
        values.insert(entry.name.clone(), coded);
    }
    Ok(Discretized { values, warnings })
}
