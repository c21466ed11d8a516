//! Small numeric helpers shared across modules.

/// Arithmetic mean, accumulated relative to the first element so that a
/// constant series returns that constant exactly.
pub fn mean(xs: &[f64]) -> f64 {
    let Some(&shift) = xs.first() else {
        return f64::NAN;
    };
    shift + xs.iter().map(|x| x - shift).sum::<f64>() / xs.len() as f64
}

/// Sample variance (divisor n - 1), computed on values shifted by the first
/// element so that a constant series gives exactly zero.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let shift = xs[0];
    let n = xs.len() as f64;
    let m = xs.iter().map(|x| x - shift).sum::<f64>() / n;
    xs.iter().map(|x| (x - shift - m).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Quantile by linear interpolation of order statistics (Hyndman-Fan type 7).
/// `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Inverse empirical CDF, averaging at jumps (Hyndman-Fan type 2). Unlike
/// type 7 it gives the same answer for a sample and for copies of it
/// concatenated together.
pub fn ecdf_quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let np = n as f64 * prob.clamp(0.0, 1.0);
    let j = np.floor() as usize;
    if j == 0 {
        return sorted[0];
    }
    if j >= n {
        return sorted[n - 1];
    }
    if np - j as f64 == 0.0 {
        0.5 * (sorted[j - 1] + sorted[j])
    } else {
        sorted[j]
    }
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(xs: &[f64], prob: f64) -> f64 {
    quantile_sorted(&sorted_copy(xs), prob)
}

/// `ln(sum(exp(xs)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Effective sample size over several chains of one scalar, using
/// within/between-chain autocorrelation combination and Geyer's initial
/// positive sequence truncation.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = chains.iter().map(|c| sample_variance(c)).collect();
    let w = mean(&vars);
    let b_over_n = if m > 1 { sample_variance(&means) } else { 0.0 };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if !(var_plus > 0.0) {
        return (m * n) as f64;
    }

    let autocov = |c: &[f64], mu: f64, lag: usize| -> f64 {
        c[..n - lag]
            .iter()
            .zip(&c[lag..])
            .map(|(a, b)| (a - mu) * (b - mu))
            .sum::<f64>()
            / n as f64
    };

    let rho = |lag: usize| -> f64 {
        let mean_acov = chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocov(c, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / ((m * n) as f64).log10().max(1.0));
    (m * n) as f64 / tau
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&xs, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn ecdf_quantile_ignores_duplication() {
        let xs = [0.3, -1.0, 2.0, 0.7, 5.5, 1.1, -0.2];
        let once = sorted_copy(&xs);
        let twice = sorted_copy(&[xs, xs].concat());
        for p in [0.0, 0.025, 0.1, 0.5, 0.5 / 7.0, 0.975, 1.0] {
            assert_eq!(ecdf_quantile_sorted(&once, p), ecdf_quantile_sorted(&twice, p));
        }
        assert_eq!(ecdf_quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(ecdf_quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.6), 3.0);
    }

    #[test]
    fn constant_variance_is_exact_zero() {
        assert_eq!(sample_variance(&[0.1; 7]), 0.0);
    }

    #[test]
    fn softplus_and_logit_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert_eq!(inv_logit(0.0), 0.5);
        assert!(inv_logit(-800.0) >= 0.0);
    }

    #[test]
    fn lse_matches_direct() {
        let xs = [0.1, -2.0, 1.5];
        let direct = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
    }

    #[test]
    fn ess_of_independent_draws_is_near_n() {
        let mut rng = crate::rng::Stream::new(5);
        let chains: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..4000).map(|_| rng.standard_normal()).collect())
            .collect();
        let ess = effective_sample_size(&chains);
        assert!(ess > 6000.0 && ess < 10000.0, "{ess}");
    }
}
