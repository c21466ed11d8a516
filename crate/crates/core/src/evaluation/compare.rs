use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EvaluationError, LooResult, WaicResult};

/// Information criteria of one fitted model, tagged with the dataset it
/// was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitScore {
    pub label: String,
    pub dataset_fingerprint: String,
    pub waic: WaicResult,
    pub loo: LooResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub waic: f64,
    pub p_waic: f64,
    pub looic: f64,
    pub p_loo: f64,
    pub n_bad_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Ascending WAIC; ties by LOOIC, then input order.
    pub rows: Vec<ComparisonRow>,
    pub best_by_waic: String,
    pub best_by_loo: String,
}

pub fn compare_models(fits: &[FitScore]) -> Result<ComparisonReport, EvaluationError> {
    if fits.len() < 2 {
        return Err(EvaluationError::InsufficientModels(fits.len()));
    }
    if let Some(other) = fits
        .iter()
        .find(|f| f.dataset_fingerprint != fits[0].dataset_fingerprint)
    {
        return Err(EvaluationError::MismatchedDataset(
            fits[0].label.clone(),
            other.label.clone(),
        ));
    }
    let mut rows: Vec<ComparisonRow> = fits
        .iter()
        .map(|f| ComparisonRow {
            label: f.label.clone(),
            waic: f.waic.waic,
            p_waic: f.waic.p_waic,
            looic: f.loo.looic,
            p_loo: f.loo.p_loo,
            n_bad_k: f.loo.n_bad_k,
        })
        .collect();
    // Stable sort keeps input order for full ties.
    rows.sort_by(|a, b| a.waic.total_cmp(&b.waic).then(a.looic.total_cmp(&b.looic)));
    let best_by_waic = rows[0].label.clone();
    let best_by_loo = rows
        .iter()
        .min_by(|a, b| a.looic.total_cmp(&b.looic))
        .expect("at least two rows")
        .label
        .clone();
    Ok(ComparisonReport {
        rows,
        best_by_waic,
        best_by_loo,
    })
}

impl ComparisonReport {
    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>8}  {:>7}  {:>8}  {:>7}  {:>6}",
            "Model", "WAIC", "p_waic", "LOO", "p_loo", "bad_k"
        );
        for r in &self.rows {
            let mut marks = String::new();
            if r.label == self.best_by_waic {
                marks.push_str(" best WAIC");
            }
            if r.label == self.best_by_loo {
                marks.push_str(" best LOO");
            }
            let _ = writeln!(
                s,
                "{:<width$}  {:>8.1}  {:>7.2}  {:>8.1}  {:>7.2}  {:>6}{}",
                r.label, r.waic, r.p_waic, r.looic, r.p_loo, r.n_bad_k, marks
            );
        }
        s
    }

    /// One line per dataset with a WAIC/LOO pair per model, the layout of a
    /// structure-comparison table.
    pub fn render_wide(reports: &[(String, ComparisonReport)], model_order: &[String]) -> String {
        let lw = reports.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(7);
        let mut s = String::new();
        let _ = write!(s, "{:<lw$}", "");
        for m in model_order {
            let _ = write!(s, "  {:^17}", m);
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:<lw$}", "Dataset");
        for _ in model_order {
            let _ = write!(s, "  {:>8} {:>8}", "WAIC", "LOO");
        }
        let _ = writeln!(s);
        for (label, rep) in reports {
            let _ = write!(s, "{label:<lw$}");
            for m in model_order {
                match rep.rows.iter().find(|r| &r.label == m) {
                    Some(r) => {
                        let _ = write!(s, "  {:>8.1} {:>8.1}", r.waic, r.looic);
                    }
                    None => {
                        let _ = write!(s, "  {:>8} {:>8}", "-", "-");
                    }
                }
            }
            let _ = writeln!(s);
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["model", "waic", "p_waic", "looic", "p_loo", "n_bad_k", "best_waic", "best_loo"]);
        for r in &self.rows {
            let _ = w.write_record([
                r.label.clone(),
                r.waic.to_string(),
                r.p_waic.to_string(),
                r.looic.to_string(),
                r.p_loo.to_string(),
                r.n_bad_k.to_string(),
                (r.label == self.best_by_waic).to_string(),
                (r.label == self.best_by_loo).to_string(),
            ]);
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}
