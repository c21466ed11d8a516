use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::summary::ParameterSummary;
use super::{LooResult, WaicResult};
use crate::dataset::{CodedColumn, DrivingMode};
use crate::model::ParameterRole;
use crate::sampler::PosteriorDraws;

/// A fitted model laid out as a coefficient table: fixed effects with odds
/// ratios and credible intervals, variance components, WAIC and LOO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub label: String,
    pub title: String,
    pub mode: Option<DrivingMode>,
    pub n_obs: usize,
    pub summaries: Vec<ParameterSummary>,
    pub roles: Vec<ParameterRole>,
    /// Fixed-design columns, used to place reference rows.
    pub columns: Vec<CodedColumn>,
    pub reference_levels: BTreeMap<String, String>,
    pub waic: WaicResult,
    pub loo: LooResult,
    pub converged: bool,
}

fn fmt_est(s: &ParameterSummary) -> String {
    format!("{:.2} ({:.2})", s.estimate, s.std_error)
}

fn fmt_or(s: &ParameterSummary) -> String {
    format!("{:.2} ({:.2}~{:.2})", s.odds_ratio, s.or_low, s.or_high)
}

impl FitReport {
    fn rows_with_role(&self, pred: impl Fn(ParameterRole) -> bool) -> impl Iterator<Item = &ParameterSummary> {
        self.summaries
            .iter()
            .zip(&self.roles)
            .filter(move |(_, r)| pred(**r))
            .map(|(s, _)| s)
    }

    pub fn render_text(&self) -> String {
        let mut lines: Vec<(String, String, String)> = Vec::new();
        lines.push(("Fixed effects".into(), String::new(), String::new()));
        let mut seen_vars: Vec<&str> = Vec::new();
        let fixed: Vec<&ParameterSummary> = self
            .rows_with_role(|r| matches!(r, ParameterRole::Fixed | ParameterRole::Level2 | ParameterRole::CrossLevel))
            .collect();
        for (i, s) in fixed.iter().enumerate() {
            let sig = if s.significant { " +" } else { "" };
            lines.push((format!("  {}", s.name), fmt_est(s), format!("{}{sig}", fmt_or(s))));
            let var = self
                .columns
                .iter()
                .find(|c| c.name == s.name)
                .and_then(|c| c.variable.as_deref());
            let next_var = fixed.get(i + 1).and_then(|n| {
                self.columns
                    .iter()
                    .find(|c| c.name == n.name)
                    .and_then(|c| c.variable.as_deref())
            });
            if let Some(v) = var {
                if next_var != Some(v) && !seen_vars.contains(&v) {
                    seen_vars.push(v);
                    if let Some(r) = self.reference_levels.get(v) {
                        lines.push((format!("  {v}[{r}]*"), "0".into(), "1".into()));
                    }
                }
            }
        }
        for s in self.rows_with_role(|r| r == ParameterRole::Intercept) {
            let sig = if s.significant { " +" } else { "" };
            lines.push(("  Intercept (level 1)".into(), fmt_est(s), format!("{}{sig}", fmt_or(s))));
        }
        let random: Vec<&ParameterSummary> = self.rows_with_role(ParameterRole::is_variance).collect();
        if !random.is_empty() {
            lines.push(("Random effects (variances)".into(), String::new(), String::new()));
            for s in random {
                lines.push((format!("  {}", s.name), fmt_est(s), fmt_or(s)));
            }
        }
        lines.push(("WAIC".into(), format!("{:.1}", self.waic.waic), String::new()));
        lines.push(("LOO".into(), format!("{:.1}", self.loo.looic), String::new()));

        let w0 = lines.iter().map(|l| l.0.chars().count()).max().unwrap_or(10).max(10);
        let w1 = lines.iter().map(|l| l.1.len()).max().unwrap_or(0).max(20);
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.title);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<w0$}  {:<w1$}  Odds ratio (95% BCI)",
            "Parameters", "Estimate (std error)"
        );
        for (a, b, c) in &lines {
            let pad = w0 - a.chars().count();
            let _ = writeln!(s, "{a}{}  {b:<w1$}  {c}", " ".repeat(pad));
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "Note: * reference group; + 95% BCI excludes 0. n = {}, Pareto k > 0.7: {}{}",
            self.n_obs,
            self.loo.n_bad_k,
            if self.converged { "" } else { ". Chains did NOT pass the convergence check." }
        );
        s
    }

    /// Every parameter, including group-level effects.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record([
            "parameter",
            "role",
            "estimate",
            "std_error",
            "bci_low",
            "bci_high",
            "odds_ratio",
            "or_low",
            "or_high",
            "significant",
        ]);
        for (s, r) in self.summaries.iter().zip(&self.roles) {
            let role = serde_json::to_value(r)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let _ = w.write_record([
                s.name.clone(),
                role,
                s.estimate.to_string(),
                s.std_error.to_string(),
                s.bci_low.to_string(),
                s.bci_high.to_string(),
                s.odds_ratio.to_string(),
                s.or_low.to_string(),
                s.or_high.to_string(),
                s.significant.to_string(),
            ]);
        }
        let _ = w.write_record(["WAIC", "criterion", &self.waic.waic.to_string(), "", "", "", "", "", "", ""]);
        let _ = w.write_record(["LOO", "criterion", &self.loo.looic.to_string(), "", "", "", "", "", "", ""]);
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}

/// Long-format odds-ratio draws for forest and density plots: one row per
/// (parameter, retained draw). At most `max_draws` evenly spaced pooled draws
/// per parameter are written.
pub fn plot_data_csv(
    summaries: &[ParameterSummary],
    draws: &PosteriorDraws,
    params: &[usize],
    mode: Option<DrivingMode>,
    max_draws: usize,
) -> String {
    let mode = mode.map_or("all".to_string(), |m| m.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["parameter", "mode", "odds_ratio", "or_low", "or_high", "draw_index", "or_draw"]);
    for &p in params {
        let s = &summaries[p];
        let pooled = draws.pooled(p);
        let total = pooled.len();
        let keep = max_draws.min(total).max(1);
        for k in 0..keep {
            let idx = k * total / keep;
            let _ = w.write_record([
                s.name.clone(),
                mode.clone(),
                s.odds_ratio.to_string(),
                s.or_low.to_string(),
                s.or_high.to_string(),
                idx.to_string(),
                pooled[idx].exp().to_string(),
            ]);
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}
