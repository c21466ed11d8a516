use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::spec::{resolve_terms, HierarchicalModelSpec, Structure};
use super::ModelError;
use crate::dataset::CodedDataset;

/// What a slot of the flat parameter vector means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterRole {
    Intercept,
    Fixed,
    Level2,
    CrossLevel,
    GroupIntercept,
    GroupSlope,
    Level3Intercept,
    /// Variance of the level-2 intercepts.
    InterceptVariance,
    /// Variance of one random slope.
    SlopeVariance,
    /// Variance of the level-3 intercepts.
    Level3Variance,
    Other,
}

impl ParameterRole {
    pub fn is_variance(self) -> bool {
        matches!(
            self,
            ParameterRole::InterceptVariance | ParameterRole::SlopeVariance | ParameterRole::Level3Variance
        )
    }

    pub fn is_coefficient(self) -> bool {
        matches!(
            self,
            ParameterRole::Intercept | ParameterRole::Fixed | ParameterRole::Level2 | ParameterRole::CrossLevel
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level3Effects {
    pub nu: Vec<f64>,
    pub tau_sq: f64,
}

/// All model parameters by name. Random-effect vectors are empty for
/// structures that do not use them; unused variances are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub gamma00: f64,
    #[serde(default)]
    pub gamma_p0: Vec<f64>,
    #[serde(default)]
    pub gamma_0q: Vec<f64>,
    /// P x Q, empty unless cross-level interactions are on.
    #[serde(default)]
    pub gamma_pq: Vec<Vec<f64>>,
    #[serde(default)]
    pub mu0: Vec<f64>,
    /// One row of length J per random slope.
    #[serde(default)]
    pub mu_p: Vec<Vec<f64>>,
    pub sigma0_sq: f64,
    #[serde(default)]
    pub sigma_k_sq: Vec<f64>,
    #[serde(default)]
    pub level3: Option<Level3Effects>,
}

impl ParameterVector {
    /// Zero coefficients and random effects, unit variances.
    pub fn initial(layout: &ParameterLayout) -> Self {
        layout.unpack(&layout.initial_unconstrained())
    }
}

/// Flat layout of the unconstrained parameter vector:
///
/// `[g00 | gp0 (P) | g0q (Q) | gpq (P*Q or 0) | u0 (J) | u_slopes (K*J, slope-major)
///   | v0 (L) | ln s0^2 | ln sk^2 (K) | ln tau^2]`
///
/// Blocks absent from the structure have length zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    pub p: usize,
    pub q: usize,
    pub cross_level: bool,
    pub slope_cols: Vec<usize>,
    pub j: usize,
    pub l3: usize,
    pub structure: Structure,
}

impl ParameterLayout {
    pub fn new(spec: &HierarchicalModelSpec, data: &CodedDataset) -> Result<Self, ModelError> {
        spec.validate()?;
        let p = data.n_fixed();
        let fixed = resolve_terms(&spec.fixed_terms, &data.columns)?;
        if fixed.len() != p {
            return Err(ModelError::DimensionMismatch(format!(
                "spec selects {} of the {p} design columns",
                fixed.len()
            )));
        }
        let level2 = resolve_terms(&spec.level2_terms, &data.level2_columns)?;
        if level2.len() != data.n_level2() {
            return Err(ModelError::DimensionMismatch("level-2 terms do not match Z".into()));
        }
        let slope_cols = if spec.structure == Structure::RandomInterceptAndSlopes {
            resolve_terms(&spec.random_slope_terms, &data.columns)?
        } else {
            Vec::new()
        };
        let l3 = if spec.has_level3() {
            if data.group_index_l3.is_none() {
                return Err(ModelError::MissingLevel3);
            }
            data.n_groups_l3()
        } else {
            0
        };
        Ok(Self {
            p,
            q: data.n_level2(),
            cross_level: spec.cross_level_interactions,
            slope_cols,
            j: data.n_groups_l2(),
            l3,
            structure: spec.structure,
        })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn k(&self) -> usize {
        self.slope_cols.len()
    }

    fn n_cross(&self) -> usize {
        if self.cross_level {
            self.p * self.q
        } else {
            0
        }
    }

    fn has_ri(&self) -> bool {
        self.structure.has_random_intercept()
    }

    pub fn n_gamma(&self) -> usize {
        1 + self.p + self.q + self.n_cross()
    }

    pub fn gamma_range(&self) -> Range<usize> {
        0..self.n_gamma()
    }

    pub fn gamma_p0_start(&self) -> usize {
        1
    }

    pub fn gamma_0q_start(&self) -> usize {
        1 + self.p
    }

    pub fn gamma_pq_start(&self) -> usize {
        1 + self.p + self.q
    }

    pub fn mu0_range(&self) -> Range<usize> {
        let s = self.n_gamma();
        s..s + if self.has_ri() { self.j } else { 0 }
    }

    pub fn mu_slope_range(&self) -> Range<usize> {
        let s = self.mu0_range().end;
        s..s + self.k() * self.j
    }

    pub fn mu_slope_index(&self, k: usize, j: usize) -> usize {
        self.mu_slope_range().start + k * self.j + j
    }

    pub fn level3_range(&self) -> Range<usize> {
        let s = self.mu_slope_range().end;
        s..s + self.l3
    }

    /// Log-variance slots: intercept variance, slope variances, level-3 variance.
    pub fn variance_range(&self) -> Range<usize> {
        let s = self.level3_range().end;
        let n = if self.has_ri() { 1 + self.k() } else { 0 } + usize::from(self.l3 > 0);
        s..s + n
    }

    pub fn log_sigma0_index(&self) -> Option<usize> {
        self.has_ri().then(|| self.variance_range().start)
    }

    pub fn log_sigma_k_index(&self, k: usize) -> usize {
        self.variance_range().start + 1 + k
    }

    pub fn log_tau_index(&self) -> Option<usize> {
        (self.l3 > 0).then(|| self.variance_range().end - 1)
    }

    pub fn dim(&self) -> usize {
        self.variance_range().end
    }

    /// Parameter slots of level-2 group `j` (its intercept and slopes).
    pub fn group_block(&self, j: usize) -> Vec<usize> {
        if !self.has_ri() {
            return Vec::new();
        }
        let mut v = vec![self.mu0_range().start + j];
        v.extend((0..self.k()).map(|k| self.mu_slope_index(k, j)));
        v
    }

    /// Linear predictor of row `i`. Uses only location slots, so it reads the
    /// same from constrained and unconstrained vectors.
    #[inline]
    pub fn eta(&self, theta: &[f64], data: &CodedDataset, i: usize) -> f64 {
        let x = data.row(i);
        let j = data.group_index_l2[i];
        let mut eta = theta[0];
        let gp = &theta[1..1 + self.p];
        for (c, xv) in gp.iter().zip(x) {
            eta += c * xv;
        }
        if self.q > 0 {
            let g0q = self.gamma_0q_start();
            for qq in 0..self.q {
                let z = data.z(j, qq);
                eta += theta[g0q + qq] * z;
                if self.cross_level {
                    let gpq = self.gamma_pq_start();
                    for (pp, xv) in x.iter().enumerate() {
                        eta += theta[gpq + pp * self.q + qq] * z * xv;
                    }
                }
            }
        }
        if self.has_ri() {
            eta += theta[self.mu0_range().start + j];
            for (k, &col) in self.slope_cols.iter().enumerate() {
                eta += theta[self.mu_slope_index(k, j)] * x[col];
            }
        }
        if self.l3 > 0 {
            let l = data.group_index_l3.as_ref().expect("level-3 indices")[i];
            eta += theta[self.level3_range().start + l];
        }
        eta
    }

    pub fn initial_unconstrained(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Copy with log-variance slots exponentiated.
    pub fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        for v in &mut out[self.variance_range()] {
            *v = v.exp();
        }
        out
    }

    pub fn unconstrain(&self, values: &[f64]) -> Vec<f64> {
        let mut out = values.to_vec();
        for v in &mut out[self.variance_range()] {
            *v = v.ln();
        }
        out
    }

    pub fn pack(&self, params: &ParameterVector) -> Result<Vec<f64>, ModelError> {
        let dm = |what: &str, got: usize, want: usize| {
            Err(ModelError::DimensionMismatch(format!("{what}: got {got}, expected {want}")))
        };
        if params.gamma_p0.len() != self.p {
            return dm("gamma_p0", params.gamma_p0.len(), self.p);
        }
        if params.gamma_0q.len() != self.q {
            return dm("gamma_0q", params.gamma_0q.len(), self.q);
        }
        let cross_rows = if self.cross_level { self.p } else { 0 };
        if params.gamma_pq.len() != cross_rows || params.gamma_pq.iter().any(|r| r.len() != self.q) {
            return dm("gamma_pq rows", params.gamma_pq.len(), cross_rows);
        }
        let want_j = if self.has_ri() { self.j } else { 0 };
        if params.mu0.len() != want_j {
            return dm("mu0", params.mu0.len(), want_j);
        }
        if params.mu_p.len() != self.k() || params.mu_p.iter().any(|r| r.len() != self.j) {
            return dm("mu_p rows", params.mu_p.len(), self.k());
        }
        if params.sigma_k_sq.len() != self.k() {
            return dm("sigma_k_sq", params.sigma_k_sq.len(), self.k());
        }
        let l3 = params.level3.as_ref().map_or(0, |l| l.nu.len());
        if l3 != self.l3 || (self.l3 > 0) != params.level3.is_some() {
            return dm("level-3 effects", l3, self.l3);
        }

        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v.ln())
            } else {
                Err(ModelError::NonPositiveVariance {
                    name: name.to_string(),
                    value: v,
                })
            }
        };

        let mut theta = Vec::with_capacity(self.dim());
        theta.push(params.gamma00);
        theta.extend(&params.gamma_p0);
        theta.extend(&params.gamma_0q);
        for row in &params.gamma_pq {
            theta.extend(row);
        }
        theta.extend(&params.mu0);
        for row in &params.mu_p {
            theta.extend(row);
        }
        if let Some(l) = &params.level3 {
            theta.extend(&l.nu);
        }
        if self.has_ri() {
            theta.push(positive("sigma0_sq", params.sigma0_sq)?);
            for (k, &s) in params.sigma_k_sq.iter().enumerate() {
                theta.push(positive(&format!("sigma_k_sq[{k}]"), s)?);
            }
        }
        if let Some(l) = &params.level3 {
            theta.push(positive("tau_sq", l.tau_sq)?);
        }
        debug_assert_eq!(theta.len(), self.dim());
        Ok(theta)
    }

    pub fn unpack(&self, theta: &[f64]) -> ParameterVector {
        let gpq = self.gamma_pq_start();
        ParameterVector {
            gamma00: theta[0],
            gamma_p0: theta[1..1 + self.p].to_vec(),
            gamma_0q: theta[self.gamma_0q_start()..gpq].to_vec(),
            gamma_pq: if self.cross_level {
                (0..self.p)
                    .map(|pp| theta[gpq + pp * self.q..gpq + (pp + 1) * self.q].to_vec())
                    .collect()
            } else {
                Vec::new()
            },
            mu0: theta[self.mu0_range()].to_vec(),
            mu_p: (0..self.k())
                .map(|k| {
                    let s = self.mu_slope_index(k, 0);
                    theta[s..s + self.j].to_vec()
                })
                .collect(),
            sigma0_sq: self.log_sigma0_index().map_or(1.0, |i| theta[i].exp()),
            sigma_k_sq: (0..self.k()).map(|k| theta[self.log_sigma_k_index(k)].exp()).collect(),
            level3: self.log_tau_index().map(|t| Level3Effects {
                nu: theta[self.level3_range()].to_vec(),
                tau_sq: theta[t].exp(),
            }),
        }
    }

    pub fn roles(&self) -> Vec<ParameterRole> {
        let mut r = vec![ParameterRole::Intercept];
        r.extend(std::iter::repeat_n(ParameterRole::Fixed, self.p));
        r.extend(std::iter::repeat_n(ParameterRole::Level2, self.q));
        r.extend(std::iter::repeat_n(ParameterRole::CrossLevel, self.n_cross()));
        r.extend(std::iter::repeat_n(ParameterRole::GroupIntercept, self.mu0_range().len()));
        r.extend(std::iter::repeat_n(ParameterRole::GroupSlope, self.mu_slope_range().len()));
        r.extend(std::iter::repeat_n(ParameterRole::Level3Intercept, self.l3));
        if self.has_ri() {
            r.push(ParameterRole::InterceptVariance);
            r.extend(std::iter::repeat_n(ParameterRole::SlopeVariance, self.k()));
        }
        if self.l3 > 0 {
            r.push(ParameterRole::Level3Variance);
        }
        r
    }

    /// Labels of the constrained parameter vector.
    pub fn names(&self, data: &CodedDataset) -> Vec<String> {
        let col = |p: usize| data.columns[p].name.clone();
        let mut n = vec!["(Intercept)".to_string()];
        n.extend((0..self.p).map(col));
        n.extend(data.level2_columns.iter().map(|c| c.name.clone()));
        if self.cross_level {
            for pp in 0..self.p {
                for c in &data.level2_columns {
                    n.push(format!("{}:{}", col(pp), c.name));
                }
            }
        }
        if self.has_ri() {
            n.extend(data.group_labels_l2.iter().map(|g| format!("u0[{g}]")));
        }
        for &sc in &self.slope_cols {
            n.extend(data.group_labels_l2.iter().map(|g| format!("u[{}][{g}]", col(sc))));
        }
        if self.l3 > 0 {
            n.extend(data.group_labels_l3.iter().map(|g| format!("v0[{g}]")));
        }
        if self.has_ri() {
            n.push("sigma0_sq".into());
            n.extend(self.slope_cols.iter().map(|&sc| format!("sigma_sq[{}]", col(sc))));
        }
        if self.l3 > 0 {
            n.push("tau0_sq".into());
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nesting;
    use crate::synthlab::tiny_dataset;

    #[test]
    fn layout_dimensions() {
        let data = tiny_dataset(true);
        let spec = HierarchicalModelSpec::fixed_only("y", &["a", "b"])
            .with_slopes(&["b"])
            .with_nesting(Nesting::ThreeLevel);
        let layout = ParameterLayout::new(&spec, &data).unwrap();
        let (j, l) = (data.n_groups_l2(), data.n_groups_l3());
        assert_eq!(layout.dim(), 3 + j + j + l + 2 + 1);
        assert_eq!(layout.names(&data).len(), layout.dim());
        assert_eq!(layout.roles().len(), layout.dim());
        assert_eq!(layout.group_block(1).len(), 2);
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let data = tiny_dataset(true);
        let spec = HierarchicalModelSpec::fixed_only("y", &["a", "b"])
            .with_slopes(&["a"])
            .with_nesting(Nesting::ThreeLevel);
        let layout = ParameterLayout::new(&spec, &data).unwrap();
        let theta: Vec<f64> = (0..layout.dim()).map(|i| 0.1 * i as f64 - 0.3).collect();
        let pv = layout.unpack(&theta);
        let back = layout.pack(&pv).unwrap();
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pack_rejects_bad_shapes_and_variances() {
        let data = tiny_dataset(false);
        let spec = HierarchicalModelSpec::fixed_only("y", &["a", "b"]).with_structure(Structure::RandomIntercept);
        let layout = ParameterLayout::new(&spec, &data).unwrap();
        let mut pv = ParameterVector::initial(&layout);
        pv.sigma0_sq = 0.0;
        assert!(matches!(layout.pack(&pv), Err(ModelError::NonPositiveVariance { .. })));
        let mut pv = ParameterVector::initial(&layout);
        pv.gamma_p0.pop();
        assert!(matches!(layout.pack(&pv), Err(ModelError::DimensionMismatch(_))));
    }

    #[test]
    fn three_level_requires_indices() {
        let data = tiny_dataset(false);
        let spec = HierarchicalModelSpec::fixed_only("y", &["a", "b"])
            .with_structure(Structure::RandomIntercept)
            .with_nesting(Nesting::ThreeLevel);
        assert_eq!(ParameterLayout::new(&spec, &data), Err(ModelError::MissingLevel3));
    }
}
