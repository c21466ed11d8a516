//! Variance inflation factors of the fixed-effect design.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CodedDataset;

pub const DEFAULT_VIF_THRESHOLD: f64 = 10.0;

/// Residual share of variance below which a column counts as an exact
/// linear combination of the others.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScreeningError {
    #[error("design has {rows} rows but {cols} columns; need more rows than columns")]
    UnderdeterminedDesign { rows: usize, cols: usize },
    #[error("need at least 2 columns, have {0}")]
    TooFewColumns(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnVif {
    pub name: String,
    /// At least 1, or `+inf` for an exact linear dependence.
    pub vif: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub per_column: Vec<ColumnVif>,
    pub threshold: f64,
    /// Columns with VIF above the threshold.
    pub flagged: Vec<String>,
    pub verdict: Verdict,
}

impl VifReport {
    fn new(per_column: Vec<ColumnVif>, threshold: f64) -> Self {
        let flagged = per_column
            .iter()
            .filter(|c| c.vif > threshold)
            .map(|c| c.name.clone())
            .collect();
        let any_inf = per_column.iter().any(|c| c.vif.is_infinite());
        let max_finite = per_column
            .iter()
            .map(|c| c.vif)
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let verdict = if !any_inf && max_finite <= threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            per_column,
            threshold,
            flagged,
            verdict,
        }
    }

    pub fn with_threshold(self, threshold: f64) -> Self {
        Self::new(self.per_column, threshold)
    }

    pub fn vif(&self, name: &str) -> Option<f64> {
        self.per_column.iter().find(|c| c.name == name).map(|c| c.vif)
    }

    pub fn render_text(&self) -> String {
        let w = self.per_column.iter().map(|c| c.name.len()).max().unwrap_or(6).max(6);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$}  {:>10}  flag", "column", "VIF");
        for c in &self.per_column {
            let flag = if c.vif > self.threshold { "*" } else { "" };
            let _ = writeln!(s, "{:<w$}  {:>10.4}  {flag}", c.name, c.vif);
        }
        let _ = writeln!(
            s,
            "\nthreshold {}: {:?} ({} flagged)",
            self.threshold,
            self.verdict,
            self.flagged.len()
        );
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["column", "vif", "flagged"]);
        for c in &self.per_column {
            let _ = w.write_record([c.name.clone(), c.vif.to_string(), (c.vif > self.threshold).to_string()]);
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}

/// VIFs of the columns of a row-major `rows x names.len()` matrix. Each
/// column is regressed on all others plus an intercept.
pub fn compute_vif_matrix(names: &[String], values: &[f64]) -> Result<VifReport, ScreeningError> {
    let p = names.len();
    if p < 2 {
        return Err(ScreeningError::TooFewColumns(p));
    }
    let n = values.len() / p;
    assert_eq!(n * p, values.len(), "values must be rows x columns");
    if n <= p {
        return Err(ScreeningError::UnderdeterminedDesign { rows: n, cols: p });
    }
    let mut x = DMatrix::from_row_slice(n, p, values);
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let per_column = (0..p)
        .into_par_iter()
        .map(|k| ColumnVif {
            name: names[k].clone(),
            vif: column_vif(&x, k),
        })
        .collect();
    Ok(VifReport::new(per_column, DEFAULT_VIF_THRESHOLD))
}

/// `1 / (1 - R^2)` of centred column `k` on the other centred columns.
fn column_vif(centred: &DMatrix<f64>, k: usize) -> f64 {
    let y = centred.column(k).into_owned();
    let sst = y.norm_squared();
    if sst == 0.0 {
        return f64::INFINITY;
    }
    let others = centred.clone().remove_column(k);
    let svd = others.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.max();
    let tol = smax * (centred.nrows().max(centred.ncols()) as f64) * f64::EPSILON;
    let mut fitted_sq = 0.0;
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let c = u.column(j).dot(&y);
            fitted_sq += c * c;
        }
    }
    let ssr = (sst - fitted_sq).max(0.0);
    if ssr / sst < COLLINEAR_TOL {
        f64::INFINITY
    } else {
        sst / ssr
    }
}

pub fn compute_vif(design: &CodedDataset) -> Result<VifReport, ScreeningError> {
    compute_vif_matrix(&design.column_names(), &design.fixed_design)
}

pub fn screen(design: &CodedDataset, threshold: f64) -> Result<VifReport, ScreeningError> {
    Ok(compute_vif(design)?.with_threshold(threshold))
}
