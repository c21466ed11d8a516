use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Continuous,
    Categorical,
}

/// Where a variable's value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableOrigin {
    /// A column of the crash table.
    #[default]
    Input,
    /// Filled in by disengagement linkage.
    Linkage,
    /// Taken from a record metadata field (manufacturer, vehicle year).
    Metadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value > cut` selects `when_true`.
    Gt,
    /// `value < cut` selects `when_true`.
    Lt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub op: Comparison,
    pub cut: f64,
    pub when_true: String,
    pub when_false: String,
    /// Observed range; values outside `[min - slack, max + slack]` produce a warning.
    pub min: Option<f64>,
    pub max: Option<f64>,
    #[serde(default)]
    pub slack: f64,
    /// Counts may not be negative.
    #[serde(default)]
    pub count: bool,
}

impl ThresholdRule {
    pub fn level_for(&self, value: f64) -> &str {
        let hit = match self.op {
            Comparison::Gt => value > self.cut,
            Comparison::Lt => value < self.cut,
        };
        if hit {
            &self.when_true
        } else {
            &self.when_false
        }
    }

    pub fn in_range(&self, value: f64) -> bool {
        let lo = self.min.map_or(f64::NEG_INFINITY, |m| m - self.slack);
        let hi = self.max.map_or(f64::INFINITY, |m| m + self.slack);
        (lo..=hi).contains(&value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableEntry {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// environment / road / vehicle / outcome
    #[serde(default)]
    pub group: String,
    pub kind: VariableKind,
    #[serde(default)]
    pub origin: VariableOrigin,
    #[serde(default)]
    pub levels: Vec<String>,
    pub threshold: Option<ThresholdRule>,
    pub reference: String,
}

impl VariableEntry {
    /// Categorical levels; a continuous variable has its two threshold groups.
    pub fn coded_levels(&self) -> Vec<&str> {
        match (&self.kind, &self.threshold) {
            (VariableKind::Continuous, Some(rule)) => vec![rule.when_true.as_str(), rule.when_false.as_str()],
            _ => self.levels.iter().map(String::as_str).collect(),
        }
    }

    pub fn has_level(&self, level: &str) -> bool {
        self.coded_levels().contains(&level)
    }

    pub fn non_reference_levels(&self) -> Vec<&str> {
        self.coded_levels()
            .into_iter()
            .filter(|l| *l != self.reference)
            .collect()
    }
}

/// A binary response defined as one level of a categorical variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseDef {
    pub name: String,
    pub variable: String,
    pub positive: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableCatalog {
    #[serde(rename = "variable")]
    pub entries: Vec<VariableEntry>,
    #[serde(rename = "response", default)]
    pub responses: Vec<ResponseDef>,
}

impl VariableCatalog {
    pub fn from_toml_str(text: &str) -> Result<Self, DatasetError> {
        let catalog: Self = toml::from_str(text).map_err(|e| DatasetError::Catalog(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(DatasetError::Catalog(format!("duplicate variable `{}`", e.name)));
            }
            match e.kind {
                VariableKind::Continuous => {
                    let Some(rule) = &e.threshold else {
                        return Err(DatasetError::Catalog(format!("`{}` is continuous but has no threshold", e.name)));
                    };
                    if !e.levels.is_empty() {
                        return Err(DatasetError::Catalog(format!("`{}` is continuous and lists levels", e.name)));
                    }
                    if rule.when_true == rule.when_false {
                        return Err(DatasetError::Catalog(format!("`{}` threshold groups share a label", e.name)));
                    }
                }
                VariableKind::Categorical => {
                    if e.threshold.is_some() {
                        return Err(DatasetError::Catalog(format!("`{}` is categorical and has a threshold", e.name)));
                    }
                    if e.levels.len() < 2 {
                        return Err(DatasetError::Catalog(format!("`{}` needs at least two levels", e.name)));
                    }
                    let distinct: BTreeSet<_> = e.levels.iter().collect();
                    if distinct.len() != e.levels.len() {
                        return Err(DatasetError::Catalog(format!("`{}` repeats a level", e.name)));
                    }
                }
            }
            if !e.has_level(&e.reference) {
                return Err(DatasetError::Catalog(format!(
                    "reference `{}` is not a level of `{}`",
                    e.reference, e.name
                )));
            }
        }
        for r in &self.responses {
            let entry = self
                .get(&r.variable)
                .ok_or_else(|| DatasetError::Catalog(format!("response `{}` uses unknown `{}`", r.name, r.variable)))?;
            if !entry.has_level(&r.positive) {
                return Err(DatasetError::Catalog(format!(
                    "response `{}`: `{}` is not a level of `{}`",
                    r.name, r.positive, r.variable
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&VariableEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&VariableEntry, DatasetError> {
        self.get(name).ok_or_else(|| DatasetError::UnknownVariable(name.to_string()))
    }

    pub fn response(&self, name: &str) -> Option<&ResponseDef> {
        self.responses.iter().find(|r| r.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Variables read from crash-table columns.
    pub fn input_variables(&self) -> impl Iterator<Item = &VariableEntry> {
        self.entries.iter().filter(|e| e.origin == VariableOrigin::Input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[[variable]]
name = "slope"
kind = "continuous"
reference = "Slope <= 3%"
[variable.threshold]
op = "gt"
cut = 3
when_true = "Slope > 3%"
when_false = "Slope <= 3%"
min = 1
max = 10

[[variable]]
name = "light"
kind = "categorical"
levels = ["Dark", "Daylight"]
reference = "Dark"

[[response]]
name = "daylight"
variable = "light"
positive = "Daylight"
"#;

    #[test]
    fn parses_and_validates() {
        let c = VariableCatalog::from_toml_str(SMALL).unwrap();
        assert_eq!(c.entries.len(), 2);
        assert_eq!(c.require("slope").unwrap().non_reference_levels(), vec!["Slope > 3%"]);
        assert_eq!(c.response("daylight").unwrap().positive, "Daylight");
    }

    #[test]
    fn reference_must_be_a_level() {
        let bad = SMALL.replace("reference = \"Dark\"", "reference = \"Dusk\"");
        assert!(matches!(VariableCatalog::from_toml_str(&bad), Err(DatasetError::Catalog(_))));
    }

    #[test]
    fn single_level_rejected() {
        let bad = SMALL.replace("levels = [\"Dark\", \"Daylight\"]", "levels = [\"Dark\"]");
        assert!(VariableCatalog::from_toml_str(&bad).is_err());
    }

    #[test]
    fn boundary_goes_to_false_side() {
        let c = VariableCatalog::from_toml_str(SMALL).unwrap();
        let rule = c.require("slope").unwrap().threshold.as_ref().unwrap();
        assert_eq!(rule.level_for(3.0), "Slope <= 3%");
        assert_eq!(rule.level_for(3.0001), "Slope > 3%");
    }
}
