use log::warn;
use serde::{Deserialize, Serialize};

use super::{check_matrix, column, EvaluationError};
use crate::stats::log_sum_exp;

/// Observations with a tail shape above this are unreliable.
pub const BAD_K_THRESHOLD: f64 = 0.7;
const MIN_TAIL: usize = 5;
const RECOMMENDED_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedPareto {
    pub k: f64,
    pub sigma: f64,
}

impl GeneralizedPareto {
    /// Quantile function for exceedances over zero.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.k == 0.0 {
            -self.sigma * (-p).ln_1p()
        } else {
            self.sigma * (-self.k * (-p).ln_1p()).exp_m1() / self.k
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub elpd_loo: f64,
    pub looic: f64,
    /// `lppd - elpd_loo`.
    pub p_loo: f64,
    pub pointwise_elpd: Vec<f64>,
    pub pareto_k: Vec<f64>,
    pub n_bad_k: usize,
}

/// Zhang-Stephens profile estimate of the generalized Pareto shape and
/// scale, with the grid and prior used in the PSIS literature. Exceedances
/// need not be sorted. Constant exceedances return the `k = -1` limit
/// (uniform on `[0, c]`).
pub fn fit_generalized_pareto(exceedances: &[f64]) -> Result<GeneralizedPareto, EvaluationError> {
    let n = exceedances.len();
    if n < MIN_TAIL {
        return Err(EvaluationError::TooFewTailSamples(n));
    }
    if exceedances.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(EvaluationError::InvalidExceedances);
    }
    let mut x = exceedances.to_vec();
    x.sort_by(f64::total_cmp);
    if x[0] == x[n - 1] {
        return Ok(GeneralizedPareto { k: -1.0, sigma: x[0] });
    }
    let prior = 3.0;
    let m = 30 + (n as f64).sqrt().floor() as usize;
    let xstar = x[((n as f64 / 4.0 + 0.5).floor() as usize).max(1) - 1];
    let xmax = x[n - 1];
    let theta: Vec<f64> = (1..=m)
        .map(|j| 1.0 / xmax + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / prior / xstar)
        .collect();
    let profile: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let b = -t;
            let k = x.iter().map(|&xi| (b * xi).ln_1p()).sum::<f64>() / n as f64;
            n as f64 * ((b / k).ln() - k - 1.0)
        })
        .collect();
    let lse = log_sum_exp(&profile);
    let theta_hat: f64 = theta
        .iter()
        .zip(&profile)
        .map(|(t, l)| {
            let w = (l - lse).exp();
            if w.is_finite() {
                t * w
            } else {
                0.0
            }
        })
        .sum();
    let k = x.iter().map(|&xi| (-theta_hat * xi).ln_1p()).sum::<f64>() / n as f64;
    let sigma = -k / theta_hat;
    Ok(GeneralizedPareto {
        k: if k.is_nan() { f64::INFINITY } else { k },
        sigma,
    })
}

/// Shrink a tail-shape estimate toward 0.5 as if 10 extra observations
/// supported it.
fn regularize_k(k: f64, n: usize) -> f64 {
    let a = 10.0;
    (k * n as f64 + a * 0.5) / (n as f64 + a)
}

/// Smoothed, truncated log-weights for one observation and the tail shape.
fn psis_log_weights(log_ratios: &[f64]) -> (Vec<f64>, f64) {
    let s = log_ratios.len();
    let max = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = log_ratios.iter().map(|r| r - max).collect();
    let tail_len = ((0.2 * s as f64).ceil() as usize).min((3.0 * (s as f64).sqrt()).ceil() as usize);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
    let tail = &order[s - tail_len.min(s)..];
    let k = if tail.is_empty() || lw[tail[0]] == lw[tail[tail.len() - 1]] {
        // Identical tail weights are already exact.
        f64::NEG_INFINITY
    } else if tail_len < MIN_TAIL || tail_len >= s {
        f64::INFINITY
    } else {
        let cutoff = lw[order[s - tail_len - 1]];
        let exp_cut = cutoff.exp();
        let exceed: Vec<f64> = tail.iter().map(|&i| lw[i].exp() - exp_cut).collect();
        match fit_generalized_pareto(&exceed) {
            Ok(gp) => {
                let k = regularize_k(gp.k, tail_len);
                if k.is_finite() {
                    let fitted = GeneralizedPareto { k, sigma: gp.sigma };
                    for (r, &i) in tail.iter().enumerate() {
                        let p = (r as f64 + 0.5) / tail_len as f64;
                        lw[i] = (fitted.quantile(p) + exp_cut).ln();
                    }
                }
                k
            }
            Err(_) => f64::INFINITY,
        }
    };
    for w in &mut lw {
        if *w > 0.0 {
            *w = 0.0;
        }
    }
    (lw, k)
}

/// Pareto-smoothed importance-sampling leave-one-out from a
/// `[draw][observation]` pointwise log-likelihood matrix.
pub fn psis_loo(loglik: &[Vec<f64>]) -> Result<LooResult, EvaluationError> {
    let (s, n) = check_matrix(loglik)?;
    if s < RECOMMENDED_DRAWS {
        warn!("PSIS-LOO with only {s} draws; at least {RECOMMENDED_DRAWS} are recommended");
    }
    let mut pointwise_elpd = Vec::with_capacity(n);
    let mut pareto_k = Vec::with_capacity(n);
    let mut lppd = 0.0;
    for i in 0..n {
        let ll = column(loglik, i);
        let neg: Vec<f64> = ll.iter().map(|v| -v).collect();
        let (lw, k) = psis_log_weights(&neg);
        let ll_max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (w, l) in lw.iter().zip(&ll) {
            let w = w.exp();
            num += w * (l - ll_max).exp();
            den += w;
        }
        pointwise_elpd.push((num / den).ln() + ll_max);
        pareto_k.push(k);
        lppd += super::waic::log_mean_exp(&ll);
    }
    let elpd_loo: f64 = pointwise_elpd.iter().sum();
    Ok(LooResult {
        elpd_loo,
        looic: -2.0 * elpd_loo,
        p_loo: lppd - elpd_loo,
        n_bad_k: pareto_k.iter().filter(|&&k| k > BAD_K_THRESHOLD).count(),
        pointwise_elpd,
        pareto_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn gpd_sample(k: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = Stream::new(seed);
        let gp = GeneralizedPareto { k, sigma };
        (0..n).map(|_| gp.quantile(rng.uniform())).collect()
    }

    #[test]
    fn constant_exceedances_take_lower_limit() {
        let gp = fit_generalized_pareto(&[2.0; 8]).unwrap();
        assert_eq!(gp, GeneralizedPareto { k: -1.0, sigma: 2.0 });
        assert!(matches!(
            fit_generalized_pareto(&[1.0; 4]),
            Err(EvaluationError::TooFewTailSamples(4))
        ));
    }

    #[test]
    fn exponential_shape_near_zero() {
        let gp = fit_generalized_pareto(&gpd_sample(0.0, 1.0, 10_000, 1)).unwrap();
        assert!(gp.k.abs() < 0.05, "{gp:?}");
        assert!((gp.sigma - 1.0).abs() < 0.05);
    }

    #[test]
    fn heavy_tail_recovered() {
        let gp = fit_generalized_pareto(&gpd_sample(0.7, 1.0, 10_000, 2)).unwrap();
        assert!((gp.k - 0.7).abs() < 0.1, "{gp:?}");
    }

    #[test]
    fn half_shape_at_4000() {
        let gp = fit_generalized_pareto(&gpd_sample(0.5, 2.0, 4000, 3)).unwrap();
        assert!((gp.k - 0.5).abs() < 0.1, "{gp:?}");
    }

    #[test]
    fn fit_is_order_free() {
        let mut x = gpd_sample(0.3, 1.0, 200, 4);
        let a = fit_generalized_pareto(&x).unwrap();
        x.reverse();
        assert_eq!(a, fit_generalized_pareto(&x).unwrap());
    }

    #[test]
    fn quantile_limits() {
        let gp = GeneralizedPareto { k: 0.0, sigma: 2.0 };
        assert!((gp.quantile(0.5) - 2.0 * 2f64.ln()).abs() < 1e-12);
        let gp = GeneralizedPareto { k: 1e-12, sigma: 2.0 };
        assert!((gp.quantile(0.5) - 2.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn identical_draws_give_exact_pointwise() {
        let ll = vec![vec![-0.3, -1.7, -0.01]; 50];
        let r = psis_loo(&ll).unwrap();
        assert_eq!(r.pointwise_elpd, ll[0]);
        assert_eq!(r.looic, -2.0 * ll[0].iter().sum::<f64>());
        assert!(r.pareto_k.iter().all(|&k| k == f64::NEG_INFINITY));
        assert_eq!(r.n_bad_k, 0);
    }

    #[test]
    fn weights_never_exceed_raw_max() {
        let mut rng = Stream::new(7);
        let ratios: Vec<f64> = (0..400).map(|_| 2.0 * rng.standard_normal()).collect();
        let (lw, k) = psis_log_weights(&ratios);
        assert!(k.is_finite());
        assert!(lw.iter().all(|&w| w <= 0.0));
    }

    #[test]
    fn elpd_loo_below_lppd_for_informative_draws() {
        let mut rng = Stream::new(9);
        let ll: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..5).map(|_| -1.0 + 0.3 * rng.standard_normal()).collect())
            .collect();
        let r = psis_loo(&ll).unwrap();
        assert!(r.p_loo > 0.0);
        assert_eq!(r.pareto_k.len(), 5);
    }
}
