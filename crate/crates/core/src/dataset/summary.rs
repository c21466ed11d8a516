//! Per-mode level frequencies, laid out like a variable codebook with
//! Num/Percent columns for each driving mode.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::catalog::VariableCatalog;
use super::discretize::discretize;
use super::linkage::ClassifiedRecords;
use super::records::{DrivingMode, UNKNOWN};
use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRow {
    pub group: String,
    pub variable: String,
    pub description: String,
    pub level: String,
    pub reference: bool,
    pub autonomous: usize,
    pub autonomous_pct: f64,
    pub conventional: usize,
    pub conventional_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    pub n_autonomous: usize,
    pub n_conventional: usize,
    pub rows: Vec<FrequencyRow>,
    pub excluded: usize,
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

impl FrequencyTable {
    pub fn build(classified: &ClassifiedRecords, catalog: &VariableCatalog) -> Result<Self, DatasetError> {
        let mut counts: BTreeMap<(DrivingMode, String, String), usize> = BTreeMap::new();
        for mode in DrivingMode::ALL {
            for r in classified.mode(mode) {
                for (var, level) in discretize(r, catalog)?.values {
                    *counts.entry((mode, var, level)).or_default() += 1;
                }
            }
        }
        let (na, nc) = (classified.autonomous.len(), classified.conventional.len());
        let count = |mode: DrivingMode, var: &str, level: &str| {
            counts
                .get(&(mode, var.to_string(), level.to_string()))
                .copied()
                .unwrap_or(0)
        };
        let mut rows = Vec::new();
        for e in &catalog.entries {
            let mut levels: Vec<String> = e.coded_levels().iter().map(|s| s.to_string()).collect();
            let unknown_seen = DrivingMode::ALL.iter().any(|&m| count(m, &e.name, UNKNOWN) > 0);
            if unknown_seen && !levels.iter().any(|l| l == UNKNOWN) {
                levels.push(UNKNOWN.to_string());
            }
            for level in levels {
                let (a, c) = (
                    count(DrivingMode::Autonomous, &e.name, &level),
                    count(DrivingMode::Conventional, &e.name, &level),
                );
                rows.push(FrequencyRow {
                    group: e.group.clone(),
                    variable: e.name.clone(),
                    description: e.description.clone(),
                    reference: level == e.reference,
                    level,
                    autonomous: a,
                    autonomous_pct: pct(a, na),
                    conventional: c,
                    conventional_pct: pct(c, nc),
                });
            }
        }
        Ok(Self {
            n_autonomous: na,
            n_conventional: nc,
            rows,
            excluded: classified.excluded.len(),
        })
    }

    pub fn count(&self, variable: &str, level: &str, mode: DrivingMode) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.variable == variable && r.level == level)
            .map(|r| match mode {
                DrivingMode::Autonomous => r.autonomous,
                DrivingMode::Conventional => r.conventional,
            })
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Crashes by driving mode: autonomous {} / conventional {} (excluded {})",
            self.n_autonomous, self.n_conventional, self.excluded
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<28} {:<36} {:>6} {:>8} {:>6} {:>8}",
            "Variable", "Level", "A.Num", "A.Pct", "C.Num", "C.Pct"
        );
        let mut last = "";
        for r in &self.rows {
            let var = if r.variable != last { r.variable.as_str() } else { "" };
            last = &r.variable;
            let level = if r.reference {
                format!("{}*", r.level)
            } else {
                r.level.clone()
            };
            let _ = writeln!(
                s,
                "{:<28} {:<36} {:>6} {:>7.2}% {:>6} {:>7.2}%",
                var, level, r.autonomous, r.autonomous_pct, r.conventional, r.conventional_pct
            );
        }
        let _ = writeln!(s, "\n* reference group");
        s
    }

    pub fn to_csv(&self) -> Result<String, DatasetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "group",
            "variable",
            "description",
            "level",
            "reference",
            "autonomous_num",
            "autonomous_pct",
            "conventional_num",
            "conventional_pct",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.group.clone(),
                r.variable.clone(),
                r.description.clone(),
                r.level.clone(),
                r.reference.to_string(),
                r.autonomous.to_string(),
                format!("{:.2}", r.autonomous_pct),
                r.conventional.to_string(),
                format!("{:.2}", r.conventional_pct),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| DatasetError::Metadata(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }
}
