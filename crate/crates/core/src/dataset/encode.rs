use std::collections::BTreeMap;

use super::catalog::VariableCatalog;
use super::coded::{CodedColumn, CodedDataset};
use super::discretize::discretize;
use super::linkage::classify_mode;
use super::records::CrashRecord;
use super::DatasetError;
use crate::model::{HierarchicalModelSpec, Nesting};

/// Catalog variable holding the six-class crash type used for grouping.
pub const CRASH_TYPE_VARIABLE: &str = "crash_type";

fn split_term(term: &str) -> (&str, Option<&str>) {
    match term.split_once('[') {
        Some((var, rest)) if rest.ends_with(']') => (var, Some(&rest[..rest.len() - 1])),
        _ => (term, None),
    }
}

fn expand_terms(terms: &[String], catalog: &VariableCatalog) -> Result<Vec<CodedColumn>, DatasetError> {
    let mut cols: Vec<CodedColumn> = Vec::new();
    for term in terms {
        let (var, level) = split_term(term);
        let entry = catalog.require(var)?;
        let levels: Vec<&str> = match level {
            Some(l) if l == entry.reference => return Err(DatasetError::ReferenceLevelTerm(term.clone())),
            Some(l) if !entry.has_level(l) => {
                return Err(DatasetError::UnknownLevel {
                    variable: var.into(),
                    level: l.into(),
                })
            }
            Some(l) => vec![l],
            None => entry.non_reference_levels(),
        };
        for l in levels {
            let col = CodedColumn::dummy(var, l);
            if !cols.contains(&col) {
                cols.push(col);
            }
        }
    }
    Ok(cols)
}

/// Dummy-code `records` for `spec`. Reference levels are the all-zero row.
/// Records must be linked and share one driving mode.
pub fn encode_design(
    records: &[CrashRecord],
    catalog: &VariableCatalog,
    spec: &HierarchicalModelSpec,
) -> Result<CodedDataset, DatasetError> {
    spec.validate().map_err(|e| DatasetError::Spec(e.to_string()))?;

    let mut mode = None;
    for r in records {
        let m = classify_mode(r)?;
        match mode {
            None => mode = Some(m),
            Some(prev) if prev != m => return Err(DatasetError::MixedModes(prev, m)),
            _ => {}
        }
    }

    let response = catalog
        .response(&spec.response_name)
        .ok_or_else(|| DatasetError::UnknownResponse(spec.response_name.clone()))?;
    let columns = expand_terms(&spec.fixed_terms, catalog)?;
    let level2_columns = expand_terms(&spec.level2_terms, catalog)?;

    let coded: Vec<_> = records
        .iter()
        .map(|r| discretize(r, catalog).map(|d| d.values))
        .collect::<Result<_, _>>()?;

    let check_level = |var: &str, value: &str| -> Result<(), DatasetError> {
        if catalog.require(var)?.has_level(value) {
            Ok(())
        } else {
            Err(DatasetError::UnknownLevel {
                variable: var.into(),
                level: value.into(),
            })
        }
    };

    let mut y = Vec::with_capacity(records.len());
    let mut x = Vec::with_capacity(records.len() * columns.len());
    for values in &coded {
        let v = &values[&response.variable];
        check_level(&response.variable, v)?;
        y.push(if *v == response.positive { 1.0 } else { 0.0 });
        for c in &columns {
            let var = c.variable.as_deref().unwrap();
            let value = &values[var];
            check_level(var, value)?;
            x.push(if Some(value.as_str()) == c.level.as_deref() { 1.0 } else { 0.0 });
        }
    }

    // Vehicle company & year units, ordered by (manufacturer, year).
    let mut units: BTreeMap<(String, i32), usize> = BTreeMap::new();
    for r in records {
        units.entry((r.manufacturer.clone(), r.vehicle_year)).or_insert(0);
    }
    for (j, v) in units.values_mut().enumerate() {
        *v = j;
    }
    let unit_labels: Vec<String> = units.keys().map(|(m, y)| format!("{m} {y}")).collect();
    let unit_index: Vec<usize> = records
        .iter()
        .map(|r| units[&(r.manufacturer.clone(), r.vehicle_year)])
        .collect();

    let crash_type_groups = || -> Result<(Vec<String>, Vec<usize>), DatasetError> {
        let entry = catalog.require(CRASH_TYPE_VARIABLE)?;
        let labels: Vec<String> = entry.coded_levels().iter().map(|s| s.to_string()).collect();
        let mut idx = Vec::with_capacity(records.len());
        for values in &coded {
            let v = &values[CRASH_TYPE_VARIABLE];
            let g = labels.iter().position(|l| l == v).ok_or_else(|| DatasetError::UnknownLevel {
                variable: CRASH_TYPE_VARIABLE.into(),
                level: v.clone(),
            })?;
            idx.push(g);
        }
        for (g, label) in labels.iter().enumerate() {
            if !idx.contains(&g) {
                return Err(DatasetError::EmptyGroup(label.clone()));
            }
        }
        Ok((labels, idx))
    };

    let (group_labels_l2, group_index_l2, group_labels_l3, group_index_l3) = match spec.nesting {
        Nesting::TwoLevelVehicleUnit => (unit_labels, unit_index, Vec::new(), None),
        Nesting::TwoLevelCrashType => {
            let (labels, idx) = crash_type_groups()?;
            (labels, idx, Vec::new(), None)
        }
        Nesting::ThreeLevel => {
            let (labels, idx) = crash_type_groups()?;
            (unit_labels, unit_index, labels, Some(idx))
        }
    };
    if group_labels_l2.len() < 2 {
        return Err(DatasetError::TooFewGroups(group_labels_l2.len()));
    }

    let q = level2_columns.len();
    let mut z = vec![f64::NAN; group_labels_l2.len() * q];
    for (i, values) in coded.iter().enumerate() {
        let j = group_index_l2[i];
        for (k, c) in level2_columns.iter().enumerate() {
            let var = c.variable.as_deref().unwrap();
            check_level(var, &values[var])?;
            let v = if Some(values[var].as_str()) == c.level.as_deref() { 1.0 } else { 0.0 };
            let cell = &mut z[j * q + k];
            if cell.is_nan() {
                *cell = v;
            } else if *cell != v {
                return Err(DatasetError::NonConstantLevel2Term {
                    term: c.name.clone(),
                    group: group_labels_l2[j].clone(),
                });
            }
        }
    }

    let mut reference_levels = BTreeMap::new();
    for c in columns.iter().chain(&level2_columns) {
        let var = c.variable.clone().unwrap();
        let reference = catalog.require(&var)?.reference.clone();
        reference_levels.insert(var, reference);
    }

    let ds = CodedDataset {
        response_name: spec.response_name.clone(),
        response: y,
        fixed_design: x,
        columns,
        level2_design: z,
        level2_columns,
        group_index_l2,
        group_labels_l2,
        group_index_l3,
        group_labels_l3,
        row_ids: records.iter().map(|r| r.crash_id.clone()).collect(),
        mode,
        reference_levels,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::linkage::link_disengagements;
    use crate::dataset::records::{DisengagementDetails, ModeHints, RawValue};
    use crate::model::Structure;
    use chrono::NaiveDate;

    fn catalog() -> VariableCatalog {
        VariableCatalog::from_toml_str(
            r#"
[[variable]]
name = "dvf"
kind = "categorical"
levels = ["low", "mid", "high"]
reference = "high"

[[variable]]
name = "bike"
kind = "categorical"
levels = ["Absence", "Presence"]
reference = "Absence"

[[variable]]
name = "injury"
kind = "categorical"
levels = ["No", "Yes"]
reference = "No"

[[variable]]
name = "crash_type"
kind = "categorical"
levels = ["Rear-end", "Sideswipe", "Others"]
reference = "Others"

[[variable]]
name = "manufacturer"
kind = "categorical"
origin = "metadata"
levels = ["A", "B"]
reference = "A"

[[response]]
name = "injury"
variable = "injury"
positive = "Yes"
"#,
        )
        .unwrap()
    }

    fn rec(id: usize, mfr: &str, year: i32, dvf: &str, bike: &str, injury: &str, ct: &str) -> CrashRecord {
        let f = |s: &str| RawValue::Category(s.into());
        CrashRecord {
            crash_id: format!("c{id}"),
            date: NaiveDate::from_ymd_opt(2019, 1, 1 + id as u32).unwrap(),
            manufacturer: mfr.into(),
            vehicle_type: "T".into(),
            vehicle_year: year,
            mode_hints: ModeHints {
                engaged_throughout: true,
                ..Default::default()
            },
            narrative: DisengagementDetails::default(),
            raw_fields: BTreeMap::from([
                ("dvf".into(), f(dvf)),
                ("bike".into(), f(bike)),
                ("injury".into(), f(injury)),
                ("crash_type".into(), f(ct)),
            ]),
            disengagement: None,
        }
    }

    fn records() -> Vec<CrashRecord> {
        let rows = vec![
            rec(0, "A", 2018, "low", "Presence", "Yes", "Rear-end"),
            rec(1, "A", 2019, "mid", "Absence", "No", "Sideswipe"),
            rec(2, "B", 2018, "high", "Absence", "No", "Others"),
            rec(3, "B", 2019, "low", "Presence", "Yes", "Rear-end"),
            rec(4, "A", 2018, "high", "Absence", "No", "Others"),
            rec(5, "B", 2019, "mid", "Presence", "No", "Sideswipe"),
        ];
        link_disengagements(rows, &[]).records
    }

    #[test]
    fn product_of_observed_units() {
        let spec = HierarchicalModelSpec::fixed_only("injury", &["dvf", "bike"]);
        let ds = encode_design(&records(), &catalog(), &spec).unwrap();
        assert_eq!(ds.n_groups_l2(), 4);
        assert_eq!(ds.group_labels_l2[0], "A 2018");
        assert_eq!(ds.n_fixed(), 3);
        assert_eq!(ds.response, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn reference_row_is_zero_and_decodes() {
        let recs = records();
        let spec = HierarchicalModelSpec::fixed_only("injury", &["dvf", "bike"]);
        let ds = encode_design(&recs, &catalog(), &spec).unwrap();
        assert!(ds.row(2).iter().all(|&v| v == 0.0));
        for (i, r) in recs.iter().enumerate() {
            let decoded = ds.decode_row(i);
            for var in ["dvf", "bike"] {
                let RawValue::Category(level) = &r.raw_fields[var] else { unreachable!() };
                let reference = catalog().require(var).unwrap().reference.clone();
                if *level == reference {
                    assert!(!decoded.contains_key(var));
                } else {
                    assert_eq!(&decoded[var], level);
                }
            }
        }
    }

    #[test]
    fn l_minus_one_columns_per_variable() {
        let spec = HierarchicalModelSpec::fixed_only("injury", &["dvf"]);
        let ds = encode_design(&records(), &catalog(), &spec).unwrap();
        assert_eq!(ds.column_names(), vec!["dvf[low]", "dvf[mid]"]);
    }

    #[test]
    fn three_level_populates_crash_type() {
        let spec = HierarchicalModelSpec::fixed_only("injury", &["bike"])
            .with_structure(Structure::RandomIntercept)
            .with_nesting(Nesting::ThreeLevel);
        let ds = encode_design(&records(), &catalog(), &spec).unwrap();
        assert_eq!(ds.group_index_l3.as_ref().unwrap(), &vec![0, 1, 2, 0, 2, 1]);
        assert_eq!(ds.group_labels_l3.len(), 3);
    }

    #[test]
    fn empty_crash_type_group() {
        let recs: Vec<_> = records()
            .into_iter()
            .filter(|r| r.raw_fields["crash_type"] != RawValue::Category("Sideswipe".into()))
            .collect();
        let spec =
            HierarchicalModelSpec::fixed_only("injury", &["bike"]).with_nesting(Nesting::TwoLevelCrashType);
        assert!(matches!(
            encode_design(&recs, &catalog(), &spec),
            Err(DatasetError::EmptyGroup(g)) if g == "Sideswipe"
        ));
    }

    #[test]
    fn constant_column_and_reference_term() {
        let recs: Vec<_> = records().into_iter().filter(|r| r.crash_id != "c0" && r.crash_id != "c3").collect();
        let spec = HierarchicalModelSpec::fixed_only("injury", &["dvf[low]"]);
        assert!(matches!(
            encode_design(&recs, &catalog(), &spec),
            Err(DatasetError::ConstantColumn(_))
        ));
        let spec = HierarchicalModelSpec::fixed_only("injury", &["dvf[high]"]);
        assert!(matches!(
            encode_design(&records(), &catalog(), &spec),
            Err(DatasetError::ReferenceLevelTerm(_))
        ));
    }

    #[test]
    fn level2_term_constant_within_group() {
        let mut spec = HierarchicalModelSpec::fixed_only("injury", &["bike"]);
        spec.level2_terms = vec!["manufacturer[B]".into()];
        let ds = encode_design(&records(), &catalog(), &spec).unwrap();
        assert_eq!(ds.level2_design, vec![0.0, 0.0, 1.0, 1.0]);
        spec.level2_terms = vec!["dvf[low]".into()];
        assert!(matches!(
            encode_design(&records(), &catalog(), &spec),
            Err(DatasetError::NonConstantLevel2Term { .. })
        ));
    }
}
