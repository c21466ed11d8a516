//! Synthetic data with known parameters and exact small-case oracles.
//!
//! [`generate_synthetic`] draws a coded dataset from a [`TruthScenario`];
//! [`grid_posterior_oracle`] integrates a one-parameter posterior by
//! quadrature so sampler output can be checked against it. The bundled
//! crash fixture lives in [`fixture`].

pub mod fixture;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CodedColumn, CodedDataset, DatasetError};
use crate::model::{
    linear_predictor, log_posterior, resolve_terms, HierarchicalModelSpec, Level3Effects, ModelError,
    ParameterVector, PriorConfig, Structure,
};
use crate::rng::Stream;

/// Intercepts are clamped to this magnitude before responses are drawn.
pub const MAX_ABS_INTERCEPT: f64 = 20.0;

/// Mass allowed outside a grid before the oracle refuses it.
pub const GRID_TAIL_MASS: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("grid range too narrow: about {tail_mass:.2e} of the posterior lies outside [{lo}, {hi}]")]
    RangeTooNarrow { lo: f64, hi: f64, tail_mass: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Known truth for a simulation. Fixed terms name plain binary columns
/// (`x1`, `x2`, ...); level-2 terms name group-level binary covariates.
///
/// Random effects in `true_params` are placeholders: fresh values are drawn
/// from their variances on every generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthScenario {
    pub spec: HierarchicalModelSpec,
    pub true_params: ParameterVector,
    /// Level-2 group count (J).
    pub n_groups: usize,
    pub n_per_group: usize,
    /// Level-3 group count; falls back to the length of `true_params.level3.nu`.
    #[serde(default)]
    pub n_groups_l3: usize,
    pub seed: u64,
}

impl TruthScenario {
    /// Random-intercept scenario with an intercept and no covariates.
    pub fn random_intercept(gamma00: f64, sigma0: f64, n_groups: usize, n_per_group: usize, seed: u64) -> Self {
        Self {
            spec: HierarchicalModelSpec::fixed_only("y", &[]).with_structure(Structure::RandomIntercept),
            true_params: ParameterVector {
                gamma00,
                gamma_p0: Vec::new(),
                gamma_0q: Vec::new(),
                gamma_pq: Vec::new(),
                mu0: Vec::new(),
                mu_p: Vec::new(),
                sigma0_sq: sigma0 * sigma0,
                sigma_k_sq: Vec::new(),
                level3: None,
            },
            n_groups,
            n_per_group,
            n_groups_l3: 0,
            seed,
        }
    }

    /// Binary covariates `x1..xP`, each with its own random slope of
    /// standard deviation `slope_sd`.
    pub fn random_slopes(
        gamma00: f64,
        gamma_p0: &[f64],
        sigma0: f64,
        slope_sd: f64,
        n_groups: usize,
        n_per_group: usize,
        seed: u64,
    ) -> Self {
        let names: Vec<String> = (1..=gamma_p0.len()).map(|p| format!("x{p}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Self {
            spec: HierarchicalModelSpec::fixed_only("y", &refs).with_slopes(&refs),
            true_params: ParameterVector {
                gamma00,
                gamma_p0: gamma_p0.to_vec(),
                gamma_0q: Vec::new(),
                gamma_pq: Vec::new(),
                mu0: Vec::new(),
                mu_p: Vec::new(),
                sigma0_sq: sigma0 * sigma0,
                sigma_k_sq: vec![slope_sd * slope_sd; gamma_p0.len()],
                level3: None,
            },
            n_groups,
            n_per_group,
            n_groups_l3: 0,
            seed,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let s: Self = toml::from_str(text).map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn n_l3(&self) -> usize {
        if self.n_groups_l3 > 0 {
            self.n_groups_l3
        } else {
            self.true_params.level3.as_ref().map_or(0, |l| l.nu.len())
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScenario(m));
        self.spec.validate()?;
        let t = &self.true_params;
        if self.n_groups < 2 {
            return bad(format!("need at least 2 groups, got {}", self.n_groups));
        }
        if self.n_per_group < 2 {
            return bad("need at least 2 rows per group".into());
        }
        if t.gamma_p0.len() != self.spec.fixed_terms.len() {
            return bad(format!(
                "{} fixed terms but {} fixed coefficients",
                self.spec.fixed_terms.len(),
                t.gamma_p0.len()
            ));
        }
        if t.gamma_0q.len() != self.spec.level2_terms.len() {
            return bad("level-2 coefficients do not match level-2 terms".into());
        }
        if self.spec.cross_level_interactions
            && (t.gamma_pq.len() != t.gamma_p0.len() || t.gamma_pq.iter().any(|r| r.len() != t.gamma_0q.len()))
        {
            return bad("cross-level coefficients must be P x Q".into());
        }
        if !self.spec.level2_terms.is_empty() && self.n_groups < 4 {
            return bad("level-2 covariates need at least 4 groups".into());
        }
        if t.gamma00.is_nan() {
            return bad("intercept is NaN".into());
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SynthError::InvalidScenario(format!("true variance `{name}` must be positive, got {v}")))
            }
        };
        if self.spec.structure.has_random_intercept() {
            positive("sigma0_sq", t.sigma0_sq)?;
        }
        if self.spec.structure == Structure::RandomInterceptAndSlopes {
            if t.sigma_k_sq.len() != self.spec.random_slope_terms.len() {
                return bad("one slope variance per random slope term is required".into());
            }
            for (k, &v) in t.sigma_k_sq.iter().enumerate() {
                positive(&format!("sigma_k_sq[{k}]"), v)?;
            }
        }
        if self.spec.has_level3() {
            let l3 = t
                .level3
                .as_ref()
                .ok_or_else(|| SynthError::InvalidScenario("three-level scenario needs level3 truth".into()))?;
            positive("tau0_sq", l3.tau_sq)?;
            if self.n_l3() < 2 {
                return bad("need at least 2 level-3 groups".into());
            }
        }
        Ok(())
    }
}

/// `n` binary values, half of them ones (rounded down), in seeded order.
fn balanced_binary(n: usize, rng: &mut Stream) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }).collect();
    rng.shuffle(&mut v);
    v
}

fn normal_draws(n: usize, variance: f64, rng: &mut Stream) -> Vec<f64> {
    let sd = variance.sqrt();
    (0..n).map(|_| rng.normal(0.0, sd)).collect()
}

/// Draw a dataset from `scenario`.
pub fn generate_synthetic(scenario: &TruthScenario) -> Result<CodedDataset, SynthError> {
    generate_synthetic_with_truth(scenario).map(|(data, _)| data)
}

/// Draw a dataset and return the parameters actually used, including the
/// realized random effects.
pub fn generate_synthetic_with_truth(
    scenario: &TruthScenario,
) -> Result<(CodedDataset, ParameterVector), SynthError> {
    scenario.validate()?;
    let spec = &scenario.spec;
    let mut rng = Stream::new(scenario.seed);
    let (j, m) = (scenario.n_groups, scenario.n_per_group);
    let n = j * m;
    let p = spec.fixed_terms.len();
    let q = spec.level2_terms.len();

    // Columns are balanced within every group.
    let mut fixed_design = vec![0.0; n * p];
    for g in 0..j {
        for c in 0..p {
            for (r, x) in balanced_binary(m, &mut rng).into_iter().enumerate() {
                fixed_design[(g * m + r) * p + c] = x;
            }
        }
    }
    let mut level2_design = vec![0.0; j * q];
    for c in 0..q {
        for (g, z) in balanced_binary(j, &mut rng).into_iter().enumerate() {
            level2_design[g * q + c] = z;
        }
    }
    let n_l3 = if spec.has_level3() { scenario.n_l3() } else { 0 };
    let group_index_l3 = (n_l3 > 0).then(|| {
        let mut l3: Vec<usize> = (0..n).map(|i| i % n_l3).collect();
        rng.shuffle(&mut l3);
        l3
    });

    let mut data = CodedDataset {
        response_name: spec.response_name.clone(),
        response: vec![0.0; n],
        fixed_design,
        columns: spec.fixed_terms.iter().map(CodedColumn::plain).collect(),
        level2_design,
        level2_columns: spec.level2_terms.iter().map(CodedColumn::plain).collect(),
        group_index_l2: (0..n).map(|i| i / m).collect(),
        group_labels_l2: (0..j).map(|g| format!("g{g}")).collect(),
        group_index_l3,
        group_labels_l3: (0..n_l3).map(|l| format!("h{l}")).collect(),
        row_ids: (0..n).map(|i| format!("s{i}")).collect(),
        mode: None,
        reference_levels: Default::default(),
    };

    let t = &scenario.true_params;
    let mut truth = t.clone();
    truth.gamma00 = t.gamma00.clamp(-MAX_ABS_INTERCEPT, MAX_ABS_INTERCEPT);
    truth.mu0 = if spec.structure.has_random_intercept() {
        normal_draws(j, t.sigma0_sq, &mut rng)
    } else {
        Vec::new()
    };
    truth.mu_p = if spec.structure == Structure::RandomInterceptAndSlopes {
        let slope_cols = resolve_terms(&spec.random_slope_terms, &data.columns)?;
        (0..slope_cols.len()).map(|k| normal_draws(j, t.sigma_k_sq[k], &mut rng)).collect()
    } else {
        Vec::new()
    };
    truth.level3 = if n_l3 > 0 {
        let tau_sq = t.level3.as_ref().map(|l| l.tau_sq).unwrap_or(1.0);
        Some(Level3Effects {
            nu: normal_draws(n_l3, tau_sq, &mut rng),
            tau_sq,
        })
    } else {
        None
    };
    if !spec.cross_level_interactions {
        truth.gamma_pq = Vec::new();
    }

    let pred = linear_predictor(spec, &truth, &data)?;
    for (y, &pi) in data.response.iter_mut().zip(&pred.pi) {
        *y = if rng.bernoulli(pi) { 1.0 } else { 0.0 };
    }
    data.validate()?;
    Ok((data, truth))
}

/// Intercept-only data set: one row per response value, rows alternating
/// between two level-2 groups (ignored by a fixed-only model).
pub fn intercept_only_dataset(response: &[f64]) -> Result<CodedDataset, SynthError> {
    let n = response.len();
    let data = CodedDataset {
        response_name: "y".into(),
        response: response.to_vec(),
        fixed_design: Vec::new(),
        columns: Vec::new(),
        level2_design: Vec::new(),
        level2_columns: Vec::new(),
        group_index_l2: (0..n).map(|i| i % 2).collect(),
        group_labels_l2: vec!["g0".into(), "g1".into()],
        group_index_l3: None,
        group_labels_l3: Vec::new(),
        row_ids: (0..n).map(|i| format!("s{i}")).collect(),
        mode: None,
        reference_levels: Default::default(),
    };
    data.validate()?;
    Ok(data)
}

/// Quadrature reference for a posterior with one free parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPosterior {
    pub grid_points: Vec<f64>,
    pub unnormalized_logdensity: Vec<f64>,
    pub normalized_density: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

fn trapezoid(step: f64, ys: &[f64]) -> f64 {
    match ys.len() {
        0 | 1 => 0.0,
        n => step * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[n - 1])),
    }
}

/// Posterior of the intercept of a fixed-only, covariate-free model on an
/// evenly spaced grid over `[lo, hi]`.
///
/// The grid must hold all but [`GRID_TAIL_MASS`] of the posterior. Tail mass
/// beyond each endpoint is bounded by `f(b) / |d ln f / dx|(b)`, which holds
/// for log-concave densities such as this one.
pub fn grid_posterior_oracle(
    data: &CodedDataset,
    prior: PriorConfig,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<GridPosterior, SynthError> {
    if !(step > 0.0) || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(SynthError::InvalidGrid(format!("range [{lo}, {hi}] with step {step}")));
    }
    if data.n_fixed() != 0 || data.n_level2() != 0 {
        return Err(SynthError::InvalidGrid(format!(
            "the oracle handles the intercept only; data has {} fixed and {} level-2 columns",
            data.n_fixed(),
            data.n_level2()
        )));
    }
    let n_points = ((hi - lo) / step).round() as usize + 1;
    if n_points < 5 {
        return Err(SynthError::InvalidGrid("fewer than 5 grid points".into()));
    }
    let mut spec = HierarchicalModelSpec::fixed_only(&data.response_name, &[]);
    spec.priors = prior;
    let mut params = ParameterVector {
        gamma00: 0.0,
        gamma_p0: Vec::new(),
        gamma_0q: Vec::new(),
        gamma_pq: Vec::new(),
        mu0: Vec::new(),
        mu_p: Vec::new(),
        sigma0_sq: 1.0,
        sigma_k_sq: Vec::new(),
        level3: None,
    };

    let grid_points: Vec<f64> = (0..n_points).map(|i| lo + step * i as f64).collect();
    let mut logd = Vec::with_capacity(n_points);
    for &x in &grid_points {
        params.gamma00 = x;
        logd.push(log_posterior(&spec, &params, data)?);
    }
    let max = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = logd.iter().map(|l| (l - max).exp()).collect();
    let z = trapezoid(step, &rel);

    let last = n_points - 1;
    let slope_lo = (logd[1] - logd[0]) / step;
    let slope_hi = (logd[last] - logd[last - 1]) / step;
    if slope_lo <= 0.0 || slope_hi >= 0.0 {
        return Err(SynthError::RangeTooNarrow {
            lo,
            hi,
            tail_mass: 1.0,
        });
    }
    let tail = (rel[0] / slope_lo + rel[last] / -slope_hi) / z;
    if tail > GRID_TAIL_MASS {
        return Err(SynthError::RangeTooNarrow { lo, hi, tail_mass: tail });
    }

    let normalized_density: Vec<f64> = rel.iter().map(|r| r / z).collect();
    let weighted: Vec<f64> = grid_points.iter().zip(&normalized_density).map(|(x, f)| x * f).collect();
    let mean = trapezoid(step, &weighted);
    let centered: Vec<f64> = grid_points
        .iter()
        .zip(&normalized_density)
        .map(|(x, f)| (x - mean).powi(2) * f)
        .collect();
    let sd = trapezoid(step, &centered).sqrt();
    Ok(GridPosterior {
        grid_points,
        unnormalized_logdensity: logd,
        normalized_density,
        mean,
        sd,
    })
}

/// Twelve rows, two binary columns `a` and `b`, three level-2 groups and
/// optionally two level-3 groups. Used by unit tests across the crate.
#[cfg(test)]
pub(crate) fn tiny_dataset(with_level3: bool) -> CodedDataset {
    let a = [1., 0., 1., 0., 1., 1., 0., 0., 1., 0., 1., 0.];
    let b = [0., 0., 1., 1., 0., 1., 0., 1., 1., 1., 0., 0.];
    let y = [1., 0., 1., 1., 0., 1., 0., 0., 1., 1., 1., 0.];
    let n = a.len();
    let group_index_l2: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let l3: Vec<usize> = (0..n).map(|i| (i / 2) % 2).collect();
    let data = CodedDataset {
        response_name: "y".into(),
        response: y.to_vec(),
        fixed_design: (0..n).flat_map(|i| [a[i], b[i]]).collect(),
        columns: vec![CodedColumn::plain("a"), CodedColumn::plain("b")],
        level2_design: Vec::new(),
        level2_columns: Vec::new(),
        group_index_l2,
        group_labels_l2: vec!["g0".into(), "g1".into(), "g2".into()],
        group_index_l3: with_level3.then_some(l3),
        group_labels_l3: if with_level3 {
            vec!["h0".into(), "h1".into()]
        } else {
            Vec::new()
        },
        row_ids: (0..n).map(|i| format!("r{i}")).collect(),
        mode: None,
        reference_levels: Default::default(),
    };
    data.validate().expect("tiny dataset is valid");
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, sample_sd};

    #[test]
    fn empty_model_gives_half_rate() {
        let s = TruthScenario::random_intercept(0.0, 1e-6, 40, 250, 3);
        let data = generate_synthetic(&s).unwrap();
        let rate = mean(&data.response);
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn huge_intercept_saturates() {
        let s = TruthScenario::random_intercept(f64::INFINITY, 1e-6, 3, 20, 1);
        let (data, truth) = generate_synthetic_with_truth(&s).unwrap();
        assert_eq!(truth.gamma00, MAX_ABS_INTERCEPT);
        assert!(data.response.iter().all(|&y| y == 1.0));
    }

    #[test]
    fn group_effect_spread_matches_sigma() {
        let s = TruthScenario::random_intercept(0.0, 0.5, 40, 10, 9);
        let (_, truth) = generate_synthetic_with_truth(&s).unwrap();
        let sd = sample_sd(&truth.mu0);
        assert!((sd - 0.5).abs() < 0.1, "{sd}");
    }

    #[test]
    fn generation_is_deterministic() {
        let s = TruthScenario::random_slopes(0.2, &[0.5, -0.5], 0.3, 0.5, 6, 12, 77);
        let a = generate_synthetic(&s).unwrap();
        let b = generate_synthetic(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = generate_synthetic(&s.clone().with_seed(78)).unwrap();
        assert_ne!(a.response, c.response);
    }

    #[test]
    fn covariates_balanced_within_groups() {
        let s = TruthScenario::random_slopes(0.0, &[1.0], 0.3, 0.5, 5, 10, 2);
        let data = generate_synthetic(&s).unwrap();
        for rows in data.rows_by_group_l2() {
            let ones: f64 = rows.iter().map(|&i| data.x(i, 0)).sum();
            assert_eq!(ones, 5.0);
        }
    }

    #[test]
    fn level3_and_level2_covariates() {
        let mut s = TruthScenario::random_intercept(0.0, 0.3, 6, 8, 4);
        s.spec.level2_terms = vec!["z1".into()];
        s.spec.nesting = crate::model::Nesting::ThreeLevel;
        s.true_params.gamma_0q = vec![0.7];
        s.true_params.level3 = Some(Level3Effects {
            nu: vec![0.0; 3],
            tau_sq: 0.25,
        });
        let (data, truth) = generate_synthetic_with_truth(&s).unwrap();
        assert_eq!(data.n_groups_l3(), 3);
        assert_eq!(truth.level3.unwrap().nu.len(), 3);
        assert_eq!(data.level2_design.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn scenario_toml_roundtrip_and_validation() {
        let s = TruthScenario::random_slopes(0.5, &[0.4], 0.3, 0.5, 4, 6, 1);
        let back = TruthScenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(back, s);
        let mut bad = s.clone();
        bad.n_groups = 1;
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.true_params.sigma_k_sq = vec![0.0];
        assert!(matches!(bad.validate(), Err(SynthError::InvalidScenario(_))));
    }

    #[test]
    fn grid_without_data_is_the_prior() {
        // A tight prior so the grid can cover it.
        let data = intercept_only_dataset(&[]).unwrap();
        let prior = PriorConfig {
            coef_variance: 1.0,
            ..PriorConfig::default()
        };
        let g = grid_posterior_oracle(&data, prior, -10.0, 10.0, 0.01).unwrap();
        assert!(g.mean.abs() < 1e-9, "{}", g.mean);
        assert!((g.sd - 1.0).abs() < 1e-6, "{}", g.sd);
    }

    #[test]
    fn all_successes_shift_mean_up() {
        let data = intercept_only_dataset(&[1.0; 4]).unwrap();
        let err = grid_posterior_oracle(&data, PriorConfig::default(), -10.0, 10.0, 0.01);
        assert!(matches!(err, Err(SynthError::RangeTooNarrow { .. })));
        let data = intercept_only_dataset(&[1.0, 1.0, 0.0, 1.0]).unwrap();
        let g = grid_posterior_oracle(&data, PriorConfig::default(), -15.0, 20.0, 0.005).unwrap();
        assert!(g.mean > 0.0);
        let total: f64 = g.normalized_density.iter().sum::<f64>() * 0.005;
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn grid_matches_closed_form_for_gaussian_limit() {
        // Many balanced observations and a vague prior: the posterior is
        // close to N(0, 4/n).
        let y: Vec<f64> = (0..400).map(|i| (i % 2) as f64).collect();
        let data = intercept_only_dataset(&y).unwrap();
        let g = grid_posterior_oracle(&data, PriorConfig::default(), -1.5, 1.5, 0.001).unwrap();
        assert!(g.mean.abs() < 1e-9);
        assert!((g.sd - 0.1).abs() < 0.002, "{}", g.sd);
    }

    #[test]
    fn narrow_range_is_rejected() {
        let data = intercept_only_dataset(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        let err = grid_posterior_oracle(&data, PriorConfig::default(), -0.5, 0.5, 0.01).unwrap_err();
        assert!(matches!(err, SynthError::RangeTooNarrow { .. }));
        assert!(grid_posterior_oracle(&data, PriorConfig::default(), 0.0, 0.0, 0.01).is_err());
    }
}
