//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hbcrash::cli::main_with_args;
use hbcrash::dataset::summary::FrequencyTable;
use hbcrash::dataset::{classify_all, link_disengagements, read_disengagements, read_records, DrivingMode};
use hbcrash::evaluation::{psis_loo, summarize, waic, EffectMagnitude, ParameterSummary};
use hbcrash::model::{HierarchicalModelSpec, PriorConfig, Structure};
use hbcrash::rng::Stream;
use hbcrash::sampler::{interval_ratio_diagnostic, mcse_mean, mcse_sd, run_mcmc, McmcConfig};
use hbcrash::screening::{compute_vif_matrix, Verdict};
use hbcrash::synthlab::fixture::{build_fixture, fixture_catalog};
use hbcrash::synthlab::{generate_synthetic, grid_posterior_oracle, intercept_only_dataset, TruthScenario};
use nalgebra::DMatrix;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn odds_ratio_rounding() -> Outcome {
    let cases = [(-0.23, "0.79"), (0.39, "1.48"), (0.35, "1.42"), (-1.01, "0.36")];
    let mut got = Vec::new();
    for (gamma, want) in cases {
        let s = ParameterSummary::from_draws("b", &[gamma; 10]);
        let shown = format!("{:.2}", s.odds_ratio);
        if shown != want {
            return Err(format!("exp({gamma}) printed {shown}, want {want}"));
        }
        got.push(shown);
    }
    Ok(got.join(" "))
}

fn effect_magnitude_text() -> Outcome {
    let up = EffectMagnitude::from_odds_ratio(1.57).to_string();
    let down = EffectMagnitude::from_odds_ratio(0.36).to_string();
    check(up == "+57%" && down == "\u{2212}64%", format!("1.57 -> {up}, 0.36 -> {down}"))
}

fn sampler_matches_grid() -> Outcome {
    let data = intercept_only_dataset(&[1.0, 1.0, 0.0, 1.0]).map_err(|e| e.to_string())?;
    let grid =
        grid_posterior_oracle(&data, PriorConfig::default(), -15.0, 20.0, 0.002).map_err(|e| e.to_string())?;
    let spec = HierarchicalModelSpec::fixed_only("y", &[]);
    let cfg = McmcConfig {
        n_chains: 4,
        ..McmcConfig::reduced(2000, 20000, 31)
    };
    let draws = run_mcmc(&spec, &data, &cfg).map_err(|e| e.to_string())?;
    let chains = draws.param_chains(0);
    let pooled = draws.pooled(0);
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let sd = (pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (pooled.len() - 1) as f64).sqrt();
    let (se_m, se_s) = (mcse_mean(&chains), mcse_sd(&chains));
    let conv = interval_ratio_diagnostic(&draws, 0.95, 1.1).map_err(|e| e.to_string())?;
    let ok = (mean - grid.mean).abs() <= 3.0 * se_m && (sd - grid.sd).abs() <= 3.0 * se_s && conv.max_ratio() <= 1.1;
    check(
        ok,
        format!(
            "mean {mean:.4} vs {:.4} (mcse {se_m:.4}), sd {sd:.4} vs {:.4} (mcse {se_s:.4}), ratio {:.4}",
            grid.mean,
            grid.sd,
            conv.max_ratio()
        ),
    )
}

fn waic_brute_force() -> Outcome {
    let ll = vec![
        vec![-0.7, -1.2, -2.3],
        vec![-0.5, -1.9, -2.0],
        vec![-0.9, -1.1, -3.1],
        vec![-0.6, -1.4, -2.6],
        vec![-0.8, -1.6, -1.8],
    ];
    let w = waic(&ll).map_err(|e| e.to_string())?;
    let s = ll.len() as f64;
    let (mut lppd, mut pw) = (0.0, 0.0);
    for i in 0..3 {
        let col: Vec<f64> = ll.iter().map(|r| r[i]).collect();
        lppd += (col.iter().map(|x| x.exp()).sum::<f64>() / s).ln();
        let m = col.iter().sum::<f64>() / s;
        pw += col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s - 1.0);
    }
    let brute = -2.0 * (lppd - pw);
    if (w.waic - brute).abs() > 1e-10 {
        return Err(format!("waic {} vs brute force {brute}", w.waic));
    }

    let row = vec![-0.4, -1.3, -2.2];
    let same = vec![row.clone(); 5];
    let ws = waic(&same).map_err(|e| e.to_string())?;
    let loo = psis_loo(&same).map_err(|e| e.to_string())?;
    let exact = loo.pointwise_elpd.iter().zip(&row).all(|(a, b)| a == b);
    check(
        exact && ws.p_waic == 0.0,
        format!(
            "waic {:.12} (brute {brute:.12}); identical draws: elpd_i {:?}, p_waic {}",
            w.waic, loo.pointwise_elpd, ws.p_waic
        ),
    )
}

/// `y_i ~ N(mu, 1)`, `mu ~ N(0, PRIOR_VAR)`; returns posterior mean and variance.
fn normal_posterior(ys: &[f64], prior_var: f64) -> (f64, f64) {
    let prec = 1.0 / prior_var + ys.len() as f64;
    (ys.iter().sum::<f64>() / prec, 1.0 / prec)
}

fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean).powi(2) / var)
}

fn psis_matches_exact_loo() -> Outcome {
    const PRIOR_VAR: f64 = 4.0;
    let mut rng = Stream::new(515);
    let ys: Vec<f64> = (0..25).map(|_| rng.normal(0.8, 1.0)).collect();
    let (m, v) = normal_posterior(&ys, PRIOR_VAR);
    let ll: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let mu = rng.normal(m, v.sqrt());
            ys.iter().map(|&y| normal_logpdf(y, mu, 1.0)).collect()
        })
        .collect();
    let loo = psis_loo(&ll).map_err(|e| e.to_string())?;
    let exact: f64 = (0..ys.len())
        .map(|i| {
            let rest: Vec<f64> = ys.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &y)| y).collect();
            let (mi, vi) = normal_posterior(&rest, PRIOR_VAR);
            normal_logpdf(ys[i], mi, vi + 1.0)
        })
        .sum();
    let max_k = loo.pareto_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let diff = (loo.elpd_loo - exact).abs();
    check(
        diff <= 0.05 && max_k <= 0.7,
        format!("elpd_loo {:.4} vs exact {exact:.4} (|diff| {diff:.4}), max k {max_k:.3}", loo.elpd_loo),
    )
}

fn fit_waic(spec: &HierarchicalModelSpec, data: &hbcrash::dataset::CodedDataset, seed: u64) -> Result<f64, String> {
    let cfg = McmcConfig::reduced(1000, 2000, seed);
    let draws = run_mcmc(spec, data, &cfg).map_err(|e| e.to_string())?;
    Ok(waic(&draws.pooled_loglik()).map_err(|e| e.to_string())?.waic)
}

fn slopes_win_selection() -> Outcome {
    let wins: Vec<Result<bool, String>> = (0..10u64)
        .into_par_iter()
        .map(|r| {
            let scenario = TruthScenario::random_slopes(-0.3, &[0.8, -0.6], 0.5, 0.5, 20, 50, 600 + r);
            let data = generate_synthetic(&scenario).map_err(|e| e.to_string())?;
            let full = scenario.spec.clone();
            let mut intercept = full.clone().with_structure(Structure::RandomIntercept);
            intercept.random_slope_terms.clear();
            let mut fixed = full.clone().with_structure(Structure::FixedOnly);
            fixed.random_slope_terms.clear();
            let w_full = fit_waic(&full, &data, 700 + r)?;
            let w_int = fit_waic(&intercept, &data, 700 + r)?;
            let w_fix = fit_waic(&fixed, &data, 700 + r)?;
            Ok(w_full < w_int && w_full < w_fix)
        })
        .collect();
    let wins = wins.into_iter().collect::<Result<Vec<_>, _>>()?;
    let n = wins.iter().filter(|&&w| w).count();
    check(n >= 8, format!("random slopes lowest WAIC in {n}/10"))
}

fn intercept_coverage() -> Outcome {
    let covered: Vec<Result<bool, String>> = (0..20u64)
        .into_par_iter()
        .map(|r| {
            let scenario = TruthScenario::random_intercept(0.5, 0.3, 20, 50, 900 + r);
            let data = generate_synthetic(&scenario).map_err(|e| e.to_string())?;
            let cfg = McmcConfig::reduced(1000, 2000, 1000 + r);
            let draws = run_mcmc(&scenario.spec, &data, &cfg).map_err(|e| e.to_string())?;
            let s = summarize(&draws).map_err(|e| e.to_string())?;
            let g = s.iter().find(|p| p.name == "(Intercept)").ok_or("no intercept")?;
            Ok(g.bci_low <= 0.5 && 0.5 <= g.bci_high)
        })
        .collect();
    let covered = covered.into_iter().collect::<Result<Vec<_>, _>>()?;
    let n = covered.iter().filter(|&&c| c).count();
    check(n >= 16, format!("95% interval covers 0.5 in {n}/20"))
}

/// VIF_j is the j-th diagonal entry of the inverse correlation matrix.
fn vif_oracle(values: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let x = DMatrix::from_row_slice(rows, cols, values);
    let mut z = x.clone();
    for j in 0..cols {
        let c = x.column(j);
        let m = c.mean();
        let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt();
        for i in 0..rows {
            z[(i, j)] = (x[(i, j)] - m) / sd;
        }
    }
    let corr = z.transpose() * &z;
    let inv = corr.try_inverse().expect("full-rank design");
    (0..cols).map(|j| inv[(j, j)]).collect()
}

fn vif_matches_oracle() -> Outcome {
    let names: Vec<String> = (0..5).map(|j| format!("c{j}")).collect();
    let mut rng = Stream::new(88);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rows = 40;
        let mut values = Vec::with_capacity(rows * 5);
        for _ in 0..rows {
            let a = rng.standard_normal();
            values.push(a);
            values.push(0.6 * a + rng.standard_normal());
            values.push(rng.standard_normal());
            values.push(rng.standard_normal() - 0.3 * a);
            values.push(if rng.bernoulli(0.4) { 1.0 } else { 0.0 });
        }
        let report = compute_vif_matrix(&names, &values).map_err(|e| e.to_string())?;
        for (got, want) in report.per_column.iter().zip(vif_oracle(&values, rows, 5)) {
            worst = worst.max((got.vif - want).abs());
        }
    }
    if worst > 1e-6 {
        return Err(format!("max |vif - oracle| {worst:e}"));
    }

    let rows = 30;
    let mut values = Vec::with_capacity(rows * 5);
    for _ in 0..rows {
        let a = rng.standard_normal();
        values.extend([a, rng.standard_normal(), a, rng.standard_normal(), rng.standard_normal()]);
    }
    let dup = compute_vif_matrix(&names, &values)
        .map_err(|e| e.to_string())?
        .with_threshold(10.0);
    let ok = dup.per_column[0].vif == f64::INFINITY
        && dup.per_column[2].vif == f64::INFINITY
        && dup.flagged.contains(&"c0".to_string())
        && dup.verdict == Verdict::Fail;
    check(
        ok,
        format!("max |vif - oracle| {worst:.1e}; duplicated column flagged {:?}", dup.flagged),
    )
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run_cli(out: &Path, args: &[&str]) -> Result<(), String> {
    let config = fixture_dir().join("run.toml");
    let mut argv = vec!["hbcrash".to_string(), "--config".into(), config.display().to_string()];
    argv.extend(["--out".to_string(), out.display().to_string()]);
    argv.extend(args.iter().map(|a| a.to_string()));
    match main_with_args(&argv) {
        0 => Ok(()),
        code => Err(format!("`{}` exited {code}", args.join(" "))),
    }
}

fn fit_is_deterministic() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        run_cli(out, &["ingest"])?;
        run_cli(out, &["screen", "severity_auto"])?;
        run_cli(out, &["--seed", "4242", "fit", "severity_auto", "--allow-unconverged"])?;
    }
    let files = ["summary.txt", "summary.csv", "trace.csv", "plotdata.csv"];
    for f in files {
        let read = |root: &Path| std::fs::read(root.join("fits/severity_auto").join(f)).map_err(|e| e.to_string());
        if read(&a)? != read(&b)? {
            return Err(format!("{f} differs between runs"));
        }
    }
    Ok(format!("identical {}", files.join(", ")))
}

fn fixture_ingests() -> Outcome {
    let catalog = fixture_catalog();
    let files = build_fixture(&catalog);
    let crashes = read_records(files.crashes_csv.as_bytes(), &catalog).map_err(|e| e.to_string())?;
    let reports = read_disengagements(files.disengagements_csv.as_bytes()).map_err(|e| e.to_string())?;
    let classified = classify_all(link_disengagements(crashes, &reports).records).map_err(|e| e.to_string())?;
    let table = FrequencyTable::build(&classified, &catalog).map_err(|e| e.to_string())?;
    let text = table.render_text();
    let (a, c) = (DrivingMode::Autonomous, DrivingMode::Conventional);
    let ok = classified.autonomous.len() == 96
        && classified.conventional.len() == 84
        && table.count("injury", "Yes", a) == Some(22)
        && table.count("crash_type", "Rear-end", c) == Some(34)
        && table.count("disengagement", "Presence", a) == Some(36)
        && text.starts_with("Crashes by driving mode: autonomous 96 / conventional 84")
        && text.contains("A.Num")
        && text.contains("* reference group");
    check(
        ok,
        format!(
            "{} autonomous / {} conventional, {} table rows",
            classified.autonomous.len(),
            classified.conventional.len(),
            text.lines().count()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("odds ratios at 2 d.p.", odds_ratio_rounding),
        ("effect magnitude text", effect_magnitude_text),
        ("sampler vs quadrature", sampler_matches_grid),
        ("WAIC/LOO oracle", waic_brute_force),
        ("PSIS-LOO vs exact LOO", psis_matches_exact_loo),
        ("random slopes selected", slopes_win_selection),
        ("intercept coverage", intercept_coverage),
        ("VIF oracle", vif_matches_oracle),
        ("fit determinism", fit_is_deterministic),
        ("fixture ingestion", fixture_ingests),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
