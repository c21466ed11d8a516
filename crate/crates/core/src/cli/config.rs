use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::dataset::DrivingMode;
use crate::model::{HierarchicalModelSpec, Nesting, Structure};
use crate::sampler::{McmcConfig, DEFAULT_INTERVAL_PROB, DEFAULT_RATIO_TOL};
use crate::screening::DEFAULT_VIF_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeFilter {
    Autonomous,
    Conventional,
    #[default]
    Both,
}

impl ModeFilter {
    pub fn admits(self, mode: DrivingMode) -> bool {
        match self {
            ModeFilter::Both => true,
            ModeFilter::Autonomous => mode == DrivingMode::Autonomous,
            ModeFilter::Conventional => mode == DrivingMode::Conventional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub crashes: PathBuf,
    pub disengagements: PathBuf,
    pub catalog: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitFlags {
    pub text: bool,
    pub csv: bool,
    pub plotdata: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            text: true,
            csv: true,
            plotdata: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSettings {
    pub vif_threshold: f64,
    pub interval_prob: f64,
    pub ratio_tol: f64,
    /// Cap on pooled draws per parameter in plot data.
    pub plot_max_draws: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            vif_threshold: DEFAULT_VIF_THRESHOLD,
            interval_prob: DEFAULT_INTERVAL_PROB,
            ratio_tol: DEFAULT_RATIO_TOL,
            plot_max_draws: 1000,
        }
    }
}

/// A model spec given inline or as a path to its own TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(HierarchicalModelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub label: String,
    pub mode: DrivingMode,
    pub spec: ModelSource,
    /// Replace the spec's structure; random slopes are dropped unless the
    /// override keeps them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<Structure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nesting: Option<Nesting>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonEntry {
    pub name: String,
    pub labels: Vec<String>,
    /// Display names for `labels`, used as column headers when several
    /// comparisons share them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
}

/// Everything one pipeline run needs. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: InputPaths,
    #[serde(default)]
    pub mode: ModeFilter,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub emit: EmitFlags,
    #[serde(default)]
    pub checks: CheckSettings,
    #[serde(rename = "model")]
    pub models: Vec<ModelEntry>,
    #[serde(default, rename = "comparison", skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<ComparisonEntry>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A model entry with its spec loaded and overrides applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedModel {
    pub label: String,
    pub mode: DrivingMode,
    pub spec: HierarchicalModelSpec,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.inputs.crashes);
        fix(&mut self.inputs.disengagements);
        fix(&mut self.inputs.catalog);
        fix(&mut self.out_dir);
        for m in &mut self.models {
            if let ModelSource::Path(p) = &mut m.spec {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.models.is_empty() {
            return Err(CliError::Usage("config lists no [[model]] entries".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            let ok = !m.label.is_empty()
                && m.label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
            if !ok {
                return Err(CliError::Usage(format!(
                    "model label `{}` must be non-empty ASCII letters, digits, `_`, `-` or `.`",
                    m.label
                )));
            }
            if !seen.insert(m.label.as_str()) {
                return Err(CliError::Usage(format!("duplicate model label `{}`", m.label)));
            }
        }
        for c in &self.comparisons {
            if !c.columns.is_empty() && c.columns.len() != c.labels.len() {
                return Err(CliError::Usage(format!(
                    "comparison `{}` has {} labels but {} column names",
                    c.name,
                    c.labels.len(),
                    c.columns.len()
                )));
            }
        }
        self.mcmc.validate()?;
        Ok(())
    }

    pub fn model(&self, label: &str) -> Result<&ModelEntry, CliError> {
        self.models
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| CliError::Usage(format!("no model labelled `{label}` in the config")))
    }

    pub fn resolve_model(&self, entry: &ModelEntry) -> Result<ResolvedModel, CliError> {
        let mut spec = match &entry.spec {
            ModelSource::Inline(s) => s.clone(),
            ModelSource::Path(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read model spec {}: {e}", p.display())))?;
                HierarchicalModelSpec::from_toml_str(&text)?
            }
        };
        if let Some(s) = entry.structure {
            spec.structure = s;
            if s != Structure::RandomInterceptAndSlopes {
                spec.random_slope_terms.clear();
            }
        }
        if let Some(n) = entry.nesting {
            spec.nesting = n;
        }
        spec.validate()?;
        Ok(ResolvedModel {
            label: entry.label.clone(),
            mode: entry.mode,
            spec,
        })
    }

    /// Models whose mode passes the filter, or exactly `labels` when given.
    pub fn selected_models(&self, labels: &[String]) -> Result<Vec<ResolvedModel>, CliError> {
        let entries: Vec<&ModelEntry> = if labels.is_empty() {
            self.models.iter().filter(|m| self.mode.admits(m.mode)).collect()
        } else {
            labels.iter().map(|l| self.model(l)).collect::<Result<_, _>>()?
        };
        entries.into_iter().map(|e| self.resolve_model(e)).collect()
    }

    /// Short hash of everything that affects results. Output directory and
    /// resolved input locations are left out so runs can be relocated.
    pub fn config_hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = PathBuf::new();
        canon.inputs = InputPaths {
            crashes: file_name(&self.inputs.crashes),
            disengagements: file_name(&self.inputs.disengagements),
            catalog: file_name(&self.inputs.catalog),
        };
        let mut h = Sha256::new();
        h.update(toml::to_string(&canon).unwrap_or_default());
        for m in &self.models {
            if let Ok(r) = self.resolve_model(m) {
                h.update(r.spec.to_toml_string());
            }
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    /// Header block carried by every artifact.
    pub fn provenance(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("toolkit".to_string(), format!("hbcrash {}", env!("CARGO_PKG_VERSION"))),
            ("config_hash".to_string(), self.config_hash()),
            ("seed".to_string(), self.mcmc.seed.to_string()),
        ])
    }

    pub fn header_lines(&self) -> Vec<String> {
        self.provenance().into_iter().map(|(k, v)| format!("{k} {v}")).collect()
    }
}

fn file_name(p: &Path) -> PathBuf {
    p.file_name().map(PathBuf::from).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
out_dir = "results"

[inputs]
crashes = "crashes.csv"
disengagements = "disengagements.csv"
catalog = "catalog.toml"

[mcmc]
n_burnin = 100
n_keep = 200

[[model]]
label = "sev"
mode = "autonomous"
structure = "fixed_only"
[model.spec]
response = "injury"
fixed_terms = ["vehicle_state"]
random_slope_terms = ["vehicle_state"]
structure = "random_intercept_and_slopes"
"#;

    #[test]
    fn parses_and_resolves_relative_paths() {
        let cfg = RunConfig::from_toml_str(TEXT, Path::new("/data/run")).unwrap();
        assert_eq!(cfg.inputs.crashes, PathBuf::from("/data/run/crashes.csv"));
        assert_eq!(cfg.out_dir, PathBuf::from("/data/run/results"));
        assert_eq!(cfg.mcmc.n_chains, 2);
        assert_eq!(cfg.mode, ModeFilter::Both);
        let m = cfg.selected_models(&[]).unwrap();
        assert_eq!(m[0].spec.structure, Structure::FixedOnly);
        assert!(m[0].spec.random_slope_terms.is_empty());
    }

    #[test]
    fn hash_ignores_location_but_not_settings() {
        let a = RunConfig::from_toml_str(TEXT, Path::new("/a")).unwrap();
        let b = RunConfig::from_toml_str(TEXT, Path::new("/b")).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.mcmc.n_keep = 300;
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn rejects_bad_configs() {
        let no_models = TEXT.split("[[model]]").next().unwrap();
        assert!(matches!(
            RunConfig::from_toml_str(no_models, Path::new(".")),
            Err(CliError::Usage(_))
        ));
        let dup = format!("{TEXT}\n[[model]]\nlabel = \"sev\"\nmode = \"conventional\"\nspec = \"x.toml\"\n");
        assert!(RunConfig::from_toml_str(&dup, Path::new(".")).is_err());
        let bad = TEXT.replace("label = \"sev\"", "label = \"a b\"");
        assert!(RunConfig::from_toml_str(&bad, Path::new(".")).is_err());
    }
}
