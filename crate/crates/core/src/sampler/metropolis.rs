use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::draws::{ChainDraws, PosteriorDraws, SamplerWarning};
use super::{BlockTarget, McmcConfig, SamplerError, ScaleMove};
use crate::dataset::CodedDataset;
use crate::model::{HierarchicalModelSpec, ModelTarget};
use crate::rng::{derive_seed, Stream};

const INITIAL_STEP_SD: f64 = 0.1;
const ADAPT_DECAY: f64 = 0.6;
const STUCK_RATE: f64 = 0.01;
const INITIAL_SCALE_STEP: f64 = 0.5;

/// Ends (exclusive iteration counts) of the covariance windows:
/// `w, 3w, 7w, ...`, all at or before 80% of burn-in.
fn window_ends(adapt_window: usize, n_burnin: usize) -> Vec<usize> {
    let limit = n_burnin * 4 / 5;
    let mut ends = Vec::new();
    let (mut size, mut end) = (adapt_window, adapt_window);
    while end <= limit {
        ends.push(end);
        size *= 2;
        end += size;
    }
    ends
}

struct BlockState {
    idx: Vec<usize>,
    log_scale: f64,
    chol: DMatrix<f64>,
    /// Proposals since the last reset.
    t: usize,
    window: Vec<Vec<f64>>,
    accepted: usize,
}

impl BlockState {
    fn new(idx: Vec<usize>) -> Self {
        let d = idx.len();
        Self {
            idx,
            log_scale: Self::reset_log_scale(d),
            chol: DMatrix::identity(d, d) * INITIAL_STEP_SD,
            t: 0,
            window: Vec::new(),
            accepted: 0,
        }
    }

    fn reset_log_scale(d: usize) -> f64 {
        (2.38 / (d as f64).sqrt()).ln()
    }

    fn adapt_scale(&mut self, log_alpha: f64, target: f64) {
        let alpha = if log_alpha >= 0.0 { 1.0 } else { log_alpha.exp() };
        let step = ((self.t + 1) as f64).powf(-ADAPT_DECAY);
        self.log_scale += step * (alpha - target);
        self.t += 1;
    }

    /// Re-estimate the proposal shape from the current window, shrunk toward
    /// a small multiple of the identity.
    fn update_covariance(&mut self) {
        let n = self.window.len();
        let d = self.idx.len();
        if n >= 2 {
            let mut mean = DVector::zeros(d);
            for w in &self.window {
                mean += DVector::from_column_slice(w);
            }
            mean /= n as f64;
            let mut cov = DMatrix::zeros(d, d);
            for w in &self.window {
                let c = DVector::from_column_slice(w) - &mean;
                cov += &c * c.transpose();
            }
            cov /= (n - 1) as f64;
            let nf = n as f64;
            let reg = cov * (nf / (nf + 5.0)) + DMatrix::identity(d, d) * (1e-3 * 5.0 / (nf + 5.0));
            match reg.cholesky() {
                Some(ch) => self.chol = ch.l(),
                None => debug!("proposal covariance not positive definite, keeping previous"),
            }
        }
        self.window.clear();
        self.log_scale = Self::reset_log_scale(d);
        self.t = 0;
    }
}

struct ScaleState {
    mv: ScaleMove,
    log_step: f64,
    t: usize,
}

impl ScaleState {
    fn new(mv: ScaleMove) -> Self {
        Self { mv, log_step: INITIAL_SCALE_STEP.ln(), t: 0 }
    }

    fn apply(&self, theta: &mut [f64], eps: f64) {
        theta[self.mv.log_variance] += eps;
        let f = (0.5 * eps).exp();
        for &k in &self.mv.effects {
            theta[k] *= f;
        }
    }

    /// Metropolis step; the map has Jacobian `exp(m e / 2)` for `m` effects.
    fn step<T: BlockTarget + ?Sized>(
        &mut self,
        target: &T,
        theta: &mut [f64],
        rng: &mut Stream,
        adapt: Option<f64>,
    ) {
        let current = target.log_density(theta);
        let eps = self.log_step.exp() * rng.standard_normal();
        self.apply(theta, eps);
        let proposed = target.log_density(theta);
        let mut log_alpha = proposed - current + 0.5 * self.mv.effects.len() as f64 * eps;
        if log_alpha.is_nan() {
            log_alpha = f64::NEG_INFINITY;
        }
        if rng.uniform().ln() >= log_alpha {
            self.apply(theta, -eps);
        }
        if let Some(target_accept) = adapt {
            let alpha = if log_alpha >= 0.0 { 1.0 } else { log_alpha.exp() };
            self.log_step += ((self.t + 1) as f64).powf(-ADAPT_DECAY) * (alpha - target_accept);
            self.t += 1;
        }
    }
}

/// One chain on an arbitrary block target. `chain_seed` fully determines the
/// output.
pub fn run_chain_target<T: BlockTarget + ?Sized>(
    target: &T,
    config: &McmcConfig,
    chain_seed: u64,
) -> Result<ChainDraws, SamplerError> {
    chain(target, config, chain_seed, 0)
}

fn chain<T: BlockTarget + ?Sized>(
    target: &T,
    config: &McmcConfig,
    chain_seed: u64,
    chain_index: usize,
) -> Result<ChainDraws, SamplerError> {
    config.validate()?;
    let mut rng = Stream::new(chain_seed);
    let mut theta = target.initial_point();
    if !target.log_density(&theta).is_finite() {
        return Err(SamplerError::NonFiniteLogPosterior { chain: chain_index });
    }
    let mut blocks: Vec<BlockState> = target
        .blocks()
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(BlockState::new)
        .collect();
    let mut scalers: Vec<ScaleState> = target
        .scale_moves()
        .into_iter()
        .filter(|m| !m.effects.is_empty())
        .map(ScaleState::new)
        .collect();
    let ends = window_ends(config.adapt_window, config.n_burnin);
    let mut next_end = 0;
    let n_obs = target.n_obs();

    let mut out = ChainDraws {
        draws: Vec::with_capacity(config.n_keep),
        loglik: Vec::with_capacity(if n_obs > 0 { config.n_keep } else { 0 }),
        log_density: Vec::with_capacity(config.n_keep),
        accept_rates: Vec::new(),
        proposal_scales: Vec::with_capacity(config.n_keep),
        warnings: Vec::new(),
    };

    let mut z = Vec::new();
    let mut saved = Vec::new();
    for it in 0..config.n_burnin + config.n_keep {
        let burning = it < config.n_burnin;
        for (bi, b) in blocks.iter_mut().enumerate() {
            let d = b.idx.len();
            let current = target.block_log_density(bi, &theta);
            z.clear();
            z.extend((0..d).map(|_| rng.standard_normal()));
            let scale = b.log_scale.exp();
            saved.clear();
            saved.extend(b.idx.iter().map(|&k| theta[k]));
            for (r, &k) in b.idx.iter().enumerate() {
                let mut step = 0.0;
                for (c, zc) in z.iter().enumerate().take(r + 1) {
                    step += b.chol[(r, c)] * zc;
                }
                theta[k] += scale * step;
            }
            let proposed = target.block_log_density(bi, &theta);
            let mut log_alpha = proposed - current;
            if log_alpha.is_nan() {
                log_alpha = f64::NEG_INFINITY;
            }
            let accept = rng.uniform().ln() < log_alpha;
            if !accept {
                for (&k, &v) in b.idx.iter().zip(&saved) {
                    theta[k] = v;
                }
            }
            if burning {
                b.adapt_scale(log_alpha, config.target_accept);
                b.window.push(b.idx.iter().map(|&k| theta[k]).collect());
            } else if accept {
                b.accepted += 1;
            }
        }
        for sc in &mut scalers {
            sc.step(target, &mut theta, &mut rng, burning.then_some(config.target_accept));
        }
        if burning && ends.get(next_end) == Some(&(it + 1)) {
            for b in &mut blocks {
                b.update_covariance();
            }
            next_end += 1;
        }
        if !burning {
            out.draws.push(target.constrain(&theta));
            out.log_density.push(target.log_density(&theta));
            out.proposal_scales.push(
                blocks
                    .iter()
                    .map(|b| b.log_scale.exp())
                    .chain(scalers.iter().map(|s| s.log_step.exp()))
                    .collect(),
            );
            if n_obs > 0 {
                let mut ll = vec![0.0; n_obs];
                target.pointwise_loglik(&theta, &mut ll);
                out.loglik.push(ll);
            }
        }
    }

    out.accept_rates = blocks
        .iter()
        .map(|b| b.accepted as f64 / config.n_keep as f64)
        .collect();
    for (block, &rate) in out.accept_rates.iter().enumerate() {
        if rate < STUCK_RATE {
            warn!("chain {chain_index}: block {block} accepted {rate:.4} of kept proposals");
            out.warnings.push(SamplerWarning::StuckChain {
                chain: chain_index,
                block,
                accept_rate: rate,
            });
        }
    }
    Ok(out)
}

/// Independent chains in parallel; chain `c` is seeded with
/// `derive_seed(config.seed, c)`.
pub fn run_mcmc_target<T: BlockTarget + ?Sized>(
    target: &T,
    config: &McmcConfig,
) -> Result<PosteriorDraws, SamplerError> {
    config.validate()?;
    let chains = (0..config.n_chains)
        .into_par_iter()
        .map(|c| chain(target, config, derive_seed(config.seed, c as u64), c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PosteriorDraws::from_chains(target.param_names(), chains))
}

pub fn run_chain(
    spec: &HierarchicalModelSpec,
    data: &CodedDataset,
    config: &McmcConfig,
    chain_seed: u64,
) -> Result<ChainDraws, SamplerError> {
    let target = ModelTarget::new(spec, data)?;
    run_chain_target(&target, config, chain_seed)
}

pub fn run_mcmc(
    spec: &HierarchicalModelSpec,
    data: &CodedDataset,
    config: &McmcConfig,
) -> Result<PosteriorDraws, SamplerError> {
    let target = ModelTarget::new(spec, data)?;
    run_mcmc_target(&target, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, sample_variance};

    struct StdNormal(usize);

    impl BlockTarget for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn blocks(&self) -> Vec<Vec<usize>> {
            vec![(0..self.0).collect()]
        }
        fn log_density(&self, theta: &[f64]) -> f64 {
            -0.5 * theta.iter().map(|x| x * x).sum::<f64>()
        }
    }

    /// `s ~ N(0, 1.5^2)`, `u_j | s ~ N(0, exp(s))`.
    struct Funnel {
        m: usize,
        rescale: bool,
    }

    impl BlockTarget for Funnel {
        fn dim(&self) -> usize {
            self.m + 1
        }
        fn blocks(&self) -> Vec<Vec<usize>> {
            let mut b = vec![vec![0]];
            b.extend((1..=self.m).map(|j| vec![j]));
            b
        }
        fn log_density(&self, t: &[f64]) -> f64 {
            let s = t[0];
            let u2: f64 = t[1..].iter().map(|u| u * u).sum();
            -0.5 * s * s / 2.25 - 0.5 * self.m as f64 * s - 0.5 * u2 * (-s).exp()
        }
        fn scale_moves(&self) -> Vec<ScaleMove> {
            if self.rescale {
                vec![ScaleMove {
                    log_variance: 0,
                    effects: (1..=self.m).collect(),
                }]
            } else {
                Vec::new()
            }
        }
    }

    fn funnel_log_variance(rescale: bool) -> Vec<f64> {
        let cfg = McmcConfig::reduced(2000, 20000, 4);
        let ch = run_chain_target(&Funnel { m: 8, rescale }, &cfg, 17).unwrap();
        ch.draws.iter().map(|d| d[0]).collect()
    }

    #[test]
    fn scale_move_keeps_funnel_marginal() {
        let s = funnel_log_variance(true);
        assert!(mean(&s).abs() < 0.15, "{}", mean(&s));
        assert!((sample_variance(&s) - 2.25).abs() < 0.3, "{}", sample_variance(&s));
    }

    #[test]
    fn scale_move_improves_funnel_mixing() {
        let lag1 = |x: &[f64]| {
            let m = mean(x);
            let v: f64 = x.iter().map(|a| (a - m).powi(2)).sum();
            x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / v
        };
        let with = lag1(&funnel_log_variance(true));
        let without = lag1(&funnel_log_variance(false));
        assert!(with < without, "{with} vs {without}");
    }

    #[test]
    fn window_schedule() {
        assert_eq!(window_ends(100, 5000), vec![100, 300, 700, 1500, 3100]);
        assert_eq!(window_ends(100, 100), Vec::<usize>::new());
    }

    #[test]
    fn standard_normal_moments() {
        let cfg = McmcConfig {
            n_chains: 1,
            n_burnin: 2000,
            n_keep: 10000,
            ..McmcConfig::default()
        };
        let ch = run_chain_target(&StdNormal(1), &cfg, 11).unwrap();
        let xs: Vec<f64> = ch.draws.iter().map(|d| d[0]).collect();
        assert!(mean(&xs).abs() < 0.03, "{}", mean(&xs));
        assert!((sample_variance(&xs) - 1.0).abs() < 0.05, "{}", sample_variance(&xs));
    }

    #[test]
    fn scales_frozen_after_burnin() {
        let cfg = McmcConfig::reduced(500, 300, 3);
        let ch = run_chain_target(&StdNormal(3), &cfg, 5).unwrap();
        assert!(ch.proposal_scales.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(ch.draws.len(), 300);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = McmcConfig::reduced(200, 200, 9);
        let a = run_mcmc_target(&StdNormal(2), &cfg).unwrap();
        let b = run_mcmc_target(&StdNormal(2), &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_ne!(a.draws[0], a.draws[1]);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        struct Bad;
        impl BlockTarget for Bad {
            fn dim(&self) -> usize {
                1
            }
            fn blocks(&self) -> Vec<Vec<usize>> {
                vec![vec![0]]
            }
            fn log_density(&self, _: &[f64]) -> f64 {
                f64::NEG_INFINITY
            }
        }
        let cfg = McmcConfig::reduced(10, 10, 1);
        assert!(matches!(
            run_mcmc_target(&Bad, &cfg),
            Err(SamplerError::NonFiniteLogPosterior { .. })
        ));
    }

    #[test]
    fn stuck_chain_is_reported() {
        // Proposals off the support are always rejected.
        struct Wall;
        impl BlockTarget for Wall {
            fn dim(&self) -> usize {
                1
            }
            fn blocks(&self) -> Vec<Vec<usize>> {
                vec![vec![0]]
            }
            fn log_density(&self, t: &[f64]) -> f64 {
                if t[0] == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
        let cfg = McmcConfig::reduced(0, 50, 1);
        let d = run_mcmc_target(&Wall, &cfg).unwrap();
        assert_eq!(d.warnings.len(), 2);
    }
}
