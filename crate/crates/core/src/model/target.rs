use super::likelihood::bernoulli_logit;
use super::params::ParameterLayout;
use super::prior::{inv_gamma_log_pdf, normal_log_pdf};
use super::spec::HierarchicalModelSpec;
use super::ModelError;
use crate::dataset::CodedDataset;
use crate::sampler::{BlockTarget, ScaleMove};
use crate::stats::inv_logit;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Block {
    Coefficients,
    Group(usize),
    Level3(usize),
    Variances,
}

/// Posterior of one model on one dataset, on the sampling scale
/// (log-variances, Jacobian included).
#[derive(Debug, Clone)]
pub struct ModelTarget<'a> {
    spec: HierarchicalModelSpec,
    data: &'a CodedDataset,
    layout: ParameterLayout,
    rows_l2: Vec<Vec<usize>>,
    rows_l3: Vec<Vec<usize>>,
    blocks: Vec<(Block, Vec<usize>)>,
}

impl<'a> ModelTarget<'a> {
    pub fn new(spec: &HierarchicalModelSpec, data: &'a CodedDataset) -> Result<Self, ModelError> {
        if data.response.len() != data.n_rows() {
            return Err(ModelError::DimensionMismatch("response length differs from row count".into()));
        }
        if let Some((row, &value)) = data.response.iter().enumerate().find(|(_, &y)| y != 0.0 && y != 1.0) {
            return Err(ModelError::NonBinaryResponse { row, value });
        }
        let layout = ParameterLayout::new(spec, data)?;
        let mut blocks = vec![(Block::Coefficients, layout.gamma_range().collect())];
        if spec.structure.has_random_intercept() {
            for j in 0..layout.j {
                blocks.push((Block::Group(j), layout.group_block(j)));
            }
            let l3 = layout.level3_range();
            for l in 0..layout.l3 {
                blocks.push((Block::Level3(l), vec![l3.start + l]));
            }
            blocks.push((Block::Variances, layout.variance_range().collect()));
        }
        Ok(Self {
            spec: spec.clone(),
            data,
            rows_l2: data.rows_by_group_l2(),
            rows_l3: if layout.l3 > 0 { data.rows_by_group_l3() } else { Vec::new() },
            layout,
            blocks,
        })
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn spec(&self) -> &HierarchicalModelSpec {
        &self.spec
    }

    pub fn data(&self) -> &CodedDataset {
        self.data
    }

    fn loglik_rows(&self, theta: &[f64], rows: impl Iterator<Item = usize>) -> f64 {
        rows.map(|i| bernoulli_logit(self.data.response[i], self.layout.eta(theta, self.data, i)))
            .sum()
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.loglik_rows(theta, 0..self.data.n_rows())
    }

    fn coefficient_prior(&self, theta: &[f64]) -> f64 {
        let pr = &self.spec.priors;
        theta[self.layout.gamma_range()]
            .iter()
            .map(|&g| normal_log_pdf(g, pr.coef_mean, pr.coef_variance))
            .sum()
    }

    /// (log-variance slot, effect slots) pairs.
    fn components(&self) -> Vec<(usize, Vec<usize>)> {
        let l = &self.layout;
        let mut out = Vec::new();
        if let Some(s0) = l.log_sigma0_index() {
            out.push((s0, l.mu0_range().collect()));
            for k in 0..l.k() {
                out.push((l.log_sigma_k_index(k), (0..l.j).map(|j| l.mu_slope_index(k, j)).collect()));
            }
        }
        if let Some(t) = l.log_tau_index() {
            out.push((t, l.level3_range().collect()));
        }
        out
    }

    /// Inverse-gamma priors with Jacobian, plus the random-effect densities.
    fn variance_terms(&self, theta: &[f64]) -> f64 {
        let pr = &self.spec.priors;
        self.components()
            .iter()
            .map(|(s, effects)| {
                let v = theta[*s].exp();
                inv_gamma_log_pdf(v, pr.variance_shape, pr.variance_rate)
                    + theta[*s]
                    + effects.iter().map(|&e| normal_log_pdf(theta[e], 0.0, v)).sum::<f64>()
            })
            .sum()
    }

    fn effect_prior(&self, theta: &[f64], slot: usize, log_var_slot: usize) -> f64 {
        normal_log_pdf(theta[slot], 0.0, theta[log_var_slot].exp())
    }

    /// Gradient of [`BlockTarget::log_density`] with respect to the
    /// unconstrained vector.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let d = self.data;
        let mut g = vec![0.0; l.dim()];
        for i in 0..d.n_rows() {
            let r = d.response[i] - inv_logit(l.eta(theta, d, i));
            let x = d.row(i);
            let j = d.group_index_l2[i];
            g[0] += r;
            for p in 0..l.p {
                g[1 + p] += r * x[p];
            }
            for q in 0..l.q {
                let z = d.z(j, q);
                g[l.gamma_0q_start() + q] += r * z;
                if l.cross_level {
                    for p in 0..l.p {
                        g[l.gamma_pq_start() + p * l.q + q] += r * z * x[p];
                    }
                }
            }
            if self.spec.structure.has_random_intercept() {
                g[l.mu0_range().start + j] += r;
                for (k, &c) in l.slope_cols.iter().enumerate() {
                    g[l.mu_slope_index(k, j)] += r * x[c];
                }
            }
            if l.l3 > 0 {
                let k = d.group_index_l3.as_ref().expect("level-3 indices")[i];
                g[l.level3_range().start + k] += r;
            }
        }
        let pr = &self.spec.priors;
        for k in l.gamma_range() {
            g[k] -= (theta[k] - pr.coef_mean) / pr.coef_variance;
        }
        for (s, effects) in self.components() {
            let v = theta[s].exp();
            let mut ss = 0.0;
            for &e in &effects {
                g[e] -= theta[e] / v;
                ss += theta[e] * theta[e];
            }
            let m = effects.len() as f64;
            g[s] += -0.5 * m + (0.5 * ss + pr.variance_rate) / v - pr.variance_shape;
        }
        g
    }
}

impl BlockTarget for ModelTarget<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|(_, idx)| idx.clone()).collect()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.log_likelihood(theta) + self.coefficient_prior(theta) + self.variance_terms(theta)
    }

    fn block_log_density(&self, block: usize, theta: &[f64]) -> f64 {
        let l = &self.layout;
        match self.blocks[block].0 {
            Block::Coefficients => self.log_likelihood(theta) + self.coefficient_prior(theta),
            Block::Group(j) => {
                let mut lp = self.loglik_rows(theta, self.rows_l2[j].iter().copied());
                if let Some(s0) = l.log_sigma0_index() {
                    lp += self.effect_prior(theta, l.mu0_range().start + j, s0);
                }
                for k in 0..l.k() {
                    lp += self.effect_prior(theta, l.mu_slope_index(k, j), l.log_sigma_k_index(k));
                }
                lp
            }
            Block::Level3(k) => {
                let tau = l.log_tau_index().expect("level-3 variance");
                self.loglik_rows(theta, self.rows_l3[k].iter().copied())
                    + self.effect_prior(theta, l.level3_range().start + k, tau)
            }
            Block::Variances => self.variance_terms(theta),
        }
    }

    fn initial_point(&self) -> Vec<f64> {
        self.layout.initial_unconstrained()
    }

    fn scale_moves(&self) -> Vec<ScaleMove> {
        let l = &self.layout;
        let mut moves = Vec::new();
        if let Some(s0) = l.log_sigma0_index() {
            moves.push(ScaleMove {
                log_variance: s0,
                effects: l.mu0_range().collect(),
            });
            for k in 0..l.k() {
                moves.push(ScaleMove {
                    log_variance: l.log_sigma_k_index(k),
                    effects: (0..l.j()).map(|j| l.mu_slope_index(k, j)).collect(),
                });
            }
        }
        if let Some(tau) = l.log_tau_index() {
            moves.push(ScaleMove {
                log_variance: tau,
                effects: l.level3_range().collect(),
            });
        }
        moves
    }

    fn param_names(&self) -> Vec<String> {
        self.layout.names(self.data)
    }

    fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        self.layout.constrain(theta)
    }

    fn n_obs(&self) -> usize {
        self.data.n_rows()
    }

    fn pointwise_loglik(&self, theta: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = bernoulli_logit(self.data.response[i], self.layout.eta(theta, self.data, i));
        }
    }
}
