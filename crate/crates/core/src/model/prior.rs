use statrs::function::gamma::ln_gamma;

use super::params::ParameterVector;
use super::spec::{HierarchicalModelSpec, PriorConfig};
use super::ModelError;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Normal log-density with the spread given as a variance.
#[inline]
pub fn normal_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + variance.ln()) - d * d / (2.0 * variance)
}

/// Inverse-gamma log-density (shape `a`, rate `b`); `-inf` off the support.
pub fn inv_gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
}

fn check_variance(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveVariance {
            name: name.to_string(),
            value: v,
        })
    }
}

/// Variance component with its effects: inverse-gamma prior on the variance
/// plus the normal density of every effect.
fn component(priors: &PriorConfig, effects: &[f64], variance: f64) -> f64 {
    inv_gamma_log_pdf(variance, priors.variance_shape, priors.variance_rate)
        + effects.iter().map(|&u| normal_log_pdf(u, 0.0, variance)).sum::<f64>()
}

/// Log prior density on the natural scale (variances, no Jacobian).
pub fn log_prior(spec: &HierarchicalModelSpec, params: &ParameterVector) -> Result<f64, ModelError> {
    let pr = &spec.priors;
    pr.validate()?;
    let coef = |g: f64| normal_log_pdf(g, pr.coef_mean, pr.coef_variance);
    let mut lp = coef(params.gamma00);
    lp += params.gamma_p0.iter().map(|&g| coef(g)).sum::<f64>();
    lp += params.gamma_0q.iter().map(|&g| coef(g)).sum::<f64>();
    lp += params.gamma_pq.iter().flatten().map(|&g| coef(g)).sum::<f64>();
    if !spec.structure.has_random_intercept() {
        return Ok(lp);
    }
    check_variance("sigma0_sq", params.sigma0_sq)?;
    lp += component(pr, &params.mu0, params.sigma0_sq);
    if params.mu_p.len() != params.sigma_k_sq.len() {
        return Err(ModelError::DimensionMismatch(
            "one slope variance is needed per random slope".into(),
        ));
    }
    for (k, (mu, &v)) in params.mu_p.iter().zip(&params.sigma_k_sq).enumerate() {
        check_variance(&format!("sigma_k_sq[{k}]"), v)?;
        lp += component(pr, mu, v);
    }
    if let Some(l3) = &params.level3 {
        check_variance("tau_sq", l3.tau_sq)?;
        lp += component(pr, &l3.nu, l3.tau_sq);
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Structure;

    fn params() -> ParameterVector {
        ParameterVector {
            gamma00: 0.0,
            gamma_p0: vec![0.0],
            gamma_0q: vec![],
            gamma_pq: vec![],
            mu0: vec![0.0, 0.0],
            mu_p: vec![],
            sigma0_sq: 0.001 / 1.001,
            sigma_k_sq: vec![],
            level3: None,
        }
    }

    #[test]
    fn hand_computed_density_at_prior_mode() {
        let spec = HierarchicalModelSpec::fixed_only("y", &["a"]).with_structure(Structure::RandomIntercept);
        let p = params();
        let v = p.sigma0_sq;
        // Two N(0, 1000) coefficients at zero.
        let coef = 2.0 * (-0.5 * (2.0 * std::f64::consts::PI * 1000.0).ln());
        // InvGamma(0.001, 0.001) at its mode b / (a + 1).
        let (a, b): (f64, f64) = (0.001, 0.001);
        let ig = a * b.ln() - ln_gamma(a) - (a + 1.0) * v.ln() - b / v;
        let effects = 2.0 * (-0.5 * (2.0 * std::f64::consts::PI * v).ln());
        let lp = log_prior(&spec, &p).unwrap();
        assert!(lp.is_finite());
        assert!((lp - (coef + ig + effects)).abs() < 1e-9);
    }

    #[test]
    fn variance_support() {
        let spec = HierarchicalModelSpec::fixed_only("y", &["a"]).with_structure(Structure::RandomIntercept);
        for bad in [0.0, -1.0] {
            let mut p = params();
            p.sigma0_sq = bad;
            assert!(matches!(log_prior(&spec, &p), Err(ModelError::NonPositiveVariance { .. })));
        }
        assert_eq!(inv_gamma_log_pdf(0.0, 1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn moving_a_coefficient_away_lowers_prior() {
        let spec = HierarchicalModelSpec::fixed_only("y", &["a"]);
        let mut p = params();
        let mut last = log_prior(&spec, &p).unwrap();
        for g in [0.5, 1.0, 2.0, 4.0] {
            p.gamma_p0[0] = g;
            let now = log_prior(&spec, &p).unwrap();
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn normal_density_integrates_to_one() {
        let h = 1e-3;
        let s: f64 = (-8000..=8000)
            .map(|i| normal_log_pdf(i as f64 * h, 0.3, 0.7).exp() * h)
            .sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}
