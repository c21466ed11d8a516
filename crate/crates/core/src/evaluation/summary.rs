use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::sampler::PosteriorDraws;
use crate::stats::{mean, quantile_sorted, sample_sd, sorted_copy};

pub const MIN_SUMMARY_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    /// Posterior mean.
    pub estimate: f64,
    /// Posterior standard deviation.
    pub std_error: f64,
    pub bci_low: f64,
    pub bci_high: f64,
    pub odds_ratio: f64,
    pub or_low: f64,
    pub or_high: f64,
    /// The 95% credible interval excludes zero.
    pub significant: bool,
}

impl ParameterSummary {
    pub fn from_draws(name: &str, draws: &[f64]) -> Self {
        let sorted = sorted_copy(draws);
        let estimate = mean(draws);
        let bci_low = quantile_sorted(&sorted, 0.025);
        let bci_high = quantile_sorted(&sorted, 0.975);
        Self {
            name: name.to_string(),
            estimate,
            std_error: sample_sd(draws),
            bci_low,
            bci_high,
            odds_ratio: estimate.exp(),
            or_low: bci_low.exp(),
            or_high: bci_high.exp(),
            significant: !(bci_low <= 0.0 && 0.0 <= bci_high),
        }
    }
}

/// Pooled summaries of every parameter, in parameter order.
pub fn summarize(draws: &PosteriorDraws) -> Result<Vec<ParameterSummary>, EvaluationError> {
    let have = draws.n_total();
    if have < MIN_SUMMARY_DRAWS {
        return Err(EvaluationError::InsufficientDraws {
            needed: MIN_SUMMARY_DRAWS,
            have,
        });
    }
    Ok(draws
        .param_names
        .iter()
        .enumerate()
        .map(|(p, name)| ParameterSummary::from_draws(name, &draws.pooled(p)))
        .collect())
}

/// Relative change in the odds, `OR - 1`, as a percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectMagnitude {
    pub percent: f64,
}

impl EffectMagnitude {
    pub fn from_odds_ratio(or: f64) -> Self {
        Self {
            percent: 100.0 * (or - 1.0),
        }
    }
}

impl fmt::Display for EffectMagnitude {
    /// Whole percent with an explicit sign: `+57%`, `\u{2212}64%`, `0%`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.percent.round();
        if r > 0.0 {
            write!(f, "+{r:.0}%")
        } else if r < 0.0 {
            write!(f, "\u{2212}{:.0}%", -r)
        } else {
            f.write_str("0%")
        }
    }
}

pub fn effect_magnitude(summary: &ParameterSummary) -> EffectMagnitude {
    EffectMagnitude::from_odds_ratio(summary.odds_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn with_or(or: f64) -> ParameterSummary {
        ParameterSummary::from_draws("x", &[or.ln(); 10])
    }

    #[test]
    fn point_mass() {
        let s = ParameterSummary::from_draws("c", &[0.4; 200]);
        assert_eq!(s.estimate, 0.4);
        assert_eq!(s.std_error, 0.0);
        assert_eq!((s.bci_low, s.bci_high), (0.4, 0.4));
        assert_eq!(s.odds_ratio, 0.4f64.exp());
        assert!(s.significant);
    }

    #[test]
    fn effect_strings() {
        assert_eq!(effect_magnitude(&with_or(1.57)).to_string(), "+57%");
        assert_eq!(effect_magnitude(&with_or(0.36)).to_string(), "\u{2212}64%");
        assert_eq!(effect_magnitude(&with_or(1.0)).to_string(), "0%");
    }

    #[test]
    fn too_few_draws() {
        let d = PosteriorDraws::from_draws(vec!["a".into()], vec![vec![vec![0.0]; 40], vec![vec![0.0]; 40]]);
        assert_eq!(
            summarize(&d),
            Err(EvaluationError::InsufficientDraws { needed: 100, have: 80 })
        );
    }

    proptest! {
        #[test]
        fn significance_rules_agree(xs in proptest::collection::vec(-3.0f64..3.0, 5..60)) {
            let s = ParameterSummary::from_draws("x", &xs);
            let or_rule = !(s.or_low <= 1.0 && 1.0 <= s.or_high);
            prop_assert_eq!(s.significant, or_rule);
            prop_assert_eq!(s.or_low, s.bci_low.exp());
            prop_assert_eq!(s.or_high, s.bci_high.exp());
        }
    }
}
