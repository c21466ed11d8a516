use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dataset::CodedColumn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    FixedOnly,
    RandomIntercept,
    RandomInterceptAndSlopes,
}

impl Structure {
    pub fn has_random_intercept(self) -> bool {
        !matches!(self, Structure::FixedOnly)
    }

    pub fn label(self) -> &'static str {
        match self {
            Structure::FixedOnly => "Bayesian logistic regression (fixed effects only)",
            Structure::RandomIntercept => "Hierarchical, random intercept",
            Structure::RandomInterceptAndSlopes => "Hierarchical, random intercept and random slopes",
        }
    }
}

/// Which grouping the level-2 (and optional level-3) indices follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nesting {
    /// Level 2 = (manufacturer, vehicle year).
    #[default]
    TwoLevelVehicleUnit,
    /// Level 2 = six-class crash type.
    TwoLevelCrashType,
    /// Level 2 = vehicle unit, plus a crash-type random intercept.
    ThreeLevel,
}

impl Nesting {
    pub fn label(self) -> &'static str {
        match self {
            Nesting::TwoLevelVehicleUnit => "2-level, vehicle company & year",
            Nesting::TwoLevelCrashType => "2-level, crash type",
            Nesting::ThreeLevel => "3-level, vehicle company & year and crash type",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Normal priors on every regression coefficient, inverse-gamma priors on
/// every variance component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub coef_mean: f64,
    /// Variance, not standard deviation.
    pub coef_variance: f64,
    pub variance_shape: f64,
    pub variance_rate: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            coef_mean: 0.0,
            coef_variance: 1000.0,
            variance_shape: 0.001,
            variance_rate: 0.001,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.coef_variance > 0.0) || !self.coef_mean.is_finite() {
            return Err(ModelError::InvalidSpec("coefficient prior variance must be positive".into()));
        }
        if !(self.variance_shape > 0.0 && self.variance_rate > 0.0) {
            return Err(ModelError::InvalidSpec("variance prior shape and rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalModelSpec {
    #[serde(rename = "response")]
    pub response_name: String,
    /// Column names (`variable[level]`) or whole variables (all non-reference levels).
    pub fixed_terms: Vec<String>,
    #[serde(default)]
    pub random_slope_terms: Vec<String>,
    #[serde(default)]
    pub level2_terms: Vec<String>,
    /// Include every X_p * Z_q product (off unless asked for).
    #[serde(default)]
    pub cross_level_interactions: bool,
    pub structure: Structure,
    #[serde(default)]
    pub nesting: Nesting,
    #[serde(default)]
    pub priors: PriorConfig,
}

/// True when `term` names this column directly or names its variable.
pub fn term_matches(term: &str, column: &CodedColumn) -> bool {
    column.name == term || column.variable.as_deref() == Some(term)
}

/// Column indices selected by `terms`, in column order.
pub fn resolve_terms(terms: &[String], columns: &[CodedColumn]) -> Result<Vec<usize>, ModelError> {
    for t in terms {
        if !columns.iter().any(|c| term_matches(t, c)) {
            return Err(ModelError::UnknownTerm(t.clone()));
        }
    }
    Ok(columns
        .iter()
        .enumerate()
        .filter(|(_, c)| terms.iter().any(|t| term_matches(t, c)))
        .map(|(i, _)| i)
        .collect())
}

impl HierarchicalModelSpec {
    pub fn fixed_only(response: &str, fixed_terms: &[&str]) -> Self {
        Self {
            response_name: response.to_string(),
            fixed_terms: fixed_terms.iter().map(|s| s.to_string()).collect(),
            random_slope_terms: Vec::new(),
            level2_terms: Vec::new(),
            cross_level_interactions: false,
            structure: Structure::FixedOnly,
            nesting: Nesting::TwoLevelVehicleUnit,
            priors: PriorConfig::default(),
        }
    }

    pub fn with_structure(mut self, structure: Structure) -> Self {
        self.structure = structure;
        self
    }

    pub fn with_slopes(mut self, slopes: &[&str]) -> Self {
        self.random_slope_terms = slopes.iter().map(|s| s.to_string()).collect();
        self.structure = Structure::RandomInterceptAndSlopes;
        self
    }

    pub fn with_nesting(mut self, nesting: Nesting) -> Self {
        self.nesting = nesting;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let spec: Self = toml::from_str(text).map_err(|e| ModelError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn has_level3(&self) -> bool {
        self.nesting == Nesting::ThreeLevel && self.structure.has_random_intercept()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.priors.validate()?;
        match self.structure {
            Structure::RandomInterceptAndSlopes if self.random_slope_terms.is_empty() => {
                return Err(ModelError::InvalidSpec(
                    "random_intercept_and_slopes needs at least one random slope term".into(),
                ))
            }
            Structure::FixedOnly | Structure::RandomIntercept if !self.random_slope_terms.is_empty() => {
                return Err(ModelError::InvalidSpec(
                    "random slope terms require structure random_intercept_and_slopes".into(),
                ))
            }
            _ => {}
        }
        for s in &self.random_slope_terms {
            let covered = self
                .fixed_terms
                .iter()
                .any(|f| f == s || f.split('[').next() == Some(s.as_str()) || s.split('[').next() == Some(f.as_str()));
            if !covered {
                return Err(ModelError::InvalidSpec(format!("random slope `{s}` is not a fixed term")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_with_defaults() {
        let text = r#"
response = "injury"
fixed_terms = ["bike_lane[Presence]", "vehicle_state"]
random_slope_terms = ["vehicle_state"]
structure = "random_intercept_and_slopes"
"#;
        let spec = HierarchicalModelSpec::from_toml_str(text).unwrap();
        assert_eq!(spec.nesting, Nesting::TwoLevelVehicleUnit);
        assert_eq!(spec.priors, PriorConfig::default());
        let back = HierarchicalModelSpec::from_toml_str(&spec.to_toml_string()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn slopes_need_matching_structure() {
        let spec = HierarchicalModelSpec::fixed_only("y", &["a"]);
        let mut bad = spec.clone();
        bad.random_slope_terms = vec!["a".into()];
        assert!(bad.validate().is_err());
        assert!(spec.clone().with_structure(Structure::RandomInterceptAndSlopes).validate().is_err());
        assert!(spec.clone().with_slopes(&["b"]).validate().is_err());
        assert!(spec.with_slopes(&["a"]).validate().is_ok());
    }

    #[test]
    fn bad_priors() {
        let mut spec = HierarchicalModelSpec::fixed_only("y", &[]);
        spec.priors.variance_rate = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn term_resolution() {
        let cols = vec![
            CodedColumn::dummy("dvf", "low"),
            CodedColumn::dummy("dvf", "mid"),
            CodedColumn::dummy("bike", "yes"),
        ];
        assert_eq!(resolve_terms(&["dvf".into()], &cols).unwrap(), vec![0, 1]);
        assert_eq!(resolve_terms(&["bike[yes]".into()], &cols).unwrap(), vec![2]);
        assert!(resolve_terms(&["nope".into()], &cols).is_err());
    }
}
