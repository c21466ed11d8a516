use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ComparisonEntry, ResolvedModel, RunConfig};
use super::CliError;
use crate::dataset::summary::FrequencyTable;
use crate::dataset::{
    classify_all, encode_design, link_disengagements, load_disengagements, load_records, CodedDataset, Disengagement,
    LinkSource, VariableCatalog,
};
use crate::evaluation::{
    compare_models, plot_data_csv, psis_loo, summarize, waic, ComparisonReport, FitReport, FitScore, BAD_K_THRESHOLD,
};
use crate::model::{ParameterLayout, ParameterRole};
use crate::sampler::{interval_ratio_diagnostic, run_mcmc};
use crate::screening::{screen, ScreeningError, Verdict};
use crate::synthlab::fixture::{write_fixture_with_seed, FIXTURE_SEED};
use crate::synthlab::{generate_synthetic_with_truth, TruthScenario};

/// Writes files under one output root, prefixing each with the run header.
struct Artifacts {
    root: PathBuf,
    header: Vec<String>,
}

impl Artifacts {
    fn new(root: &Path, header: Vec<String>) -> Self {
        Self {
            root: root.to_path_buf(),
            header,
        }
    }

    fn for_config(cfg: &RunConfig) -> Self {
        Self::new(&cfg.out_dir, cfg.header_lines())
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn prepare(&self, rel: &str) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        Ok(path)
    }

    fn header_block(&self) -> String {
        self.header.iter().map(|l| format!("# {l}\n")).collect()
    }

    fn write(&self, rel: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.prepare(rel)?;
        let text = self.header_block() + body;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    fn read_body(&self, rel: &str) -> Option<String> {
        let text = std::fs::read_to_string(self.path(rel)).ok()?;
        Some(strip_header(&text).to_string())
    }
}

fn strip_header(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with("# ") {
        rest = rest.split_once('\n').map_or("", |(_, r)| r);
    }
    rest
}

fn require_inputs(cfg: &RunConfig) -> Result<(), CliError> {
    for (what, p) in [
        ("catalog", &cfg.inputs.catalog),
        ("crash table", &cfg.inputs.crashes),
        ("disengagement table", &cfg.inputs.disengagements),
    ] {
        if !p.is_file() {
            return Err(CliError::Usage(format!("{what} not found: {}", p.display())));
        }
    }
    Ok(())
}

fn coded_paths(label: &str) -> (String, String) {
    (format!("coded/{label}.csv"), format!("coded/{label}.meta.json"))
}

fn load_coded(out: &Artifacts, label: &str) -> Result<CodedDataset, CliError> {
    let (csv, meta) = coded_paths(label);
    if !out.path(&csv).is_file() {
        return Err(CliError::MissingArtifact(csv));
    }
    Ok(CodedDataset::read(out.path(&csv), out.path(&meta))?)
}

/// Link, classify and tabulate the crash tables, then dummy-code one dataset
/// per configured model.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<(), CliError> {
    require_inputs(cfg)?;
    let out = Artifacts::for_config(cfg);
    let catalog = VariableCatalog::load(&cfg.inputs.catalog)?;
    let crashes = load_records(&cfg.inputs.crashes, &catalog)?;
    if crashes.is_empty() {
        log::warn!("crash table {} has no rows", cfg.inputs.crashes.display());
    }
    let reports = load_disengagements(&cfg.inputs.disengagements)?;
    let linked = link_disengagements(crashes, &reports);

    let mut linkage = String::new();
    let count = |src: Option<LinkSource>| {
        linked
            .records
            .iter()
            .filter(|r| match (&r.disengagement, src) {
                (Some(Disengagement::Present { source, .. }), Some(s)) => *source == s,
                (Some(Disengagement::Absent), None) => true,
                _ => false,
            })
            .count()
    };
    let _ = writeln!(linkage, "disengagement reports read: {}", reports.len());
    let _ = writeln!(linkage, "crashes linked by report:    {}", count(Some(LinkSource::Report)));
    let _ = writeln!(linkage, "crashes linked by narrative: {}", count(Some(LinkSource::Narrative)));
    let _ = writeln!(linkage, "crashes without disengagement: {}", count(None));
    for a in &linked.ambiguous {
        let _ = writeln!(linkage, "ambiguous: {} matched {} reports; first taken", a.crash_id, a.candidates);
    }

    let classified = classify_all(linked.records)?;
    for (id, why) in &classified.excluded {
        let _ = writeln!(linkage, "excluded: {id}: {why}");
    }
    let table = FrequencyTable::build(&classified, &catalog)?;
    if cfg.emit.text {
        out.write("ingest/frequencies.txt", &table.render_text())?;
    }
    if cfg.emit.csv {
        out.write("ingest/frequencies.csv", &table.to_csv()?)?;
    }
    out.write("ingest/linkage.txt", &linkage)?;
    println!(
        "ingested {} autonomous / {} conventional crashes ({} excluded)",
        table.n_autonomous, table.n_conventional, table.excluded
    );

    for m in cfg.selected_models(&[])? {
        let records = classified.mode(m.mode);
        if records.is_empty() {
            log::warn!("no {} crashes; skipping coded data for `{}`", m.mode, m.label);
            continue;
        }
        let coded = encode_design(records, &catalog, &m.spec)?;
        let (csv, meta) = coded_paths(&m.label);
        out.prepare(&csv)?;
        coded.write_with_provenance(out.path(&csv), out.path(&meta), &cfg.provenance())?;
    }
    Ok(())
}

fn vif_paths(label: &str) -> (String, String) {
    (format!("screen/{label}.vif.txt"), format!("screen/{label}.vif.csv"))
}

/// VIF screen of every selected model's fixed design. Fails with a data
/// error when any column exceeds the threshold.
pub fn cmd_screen(cfg: &RunConfig, labels: &[String]) -> Result<(), CliError> {
    let out = Artifacts::for_config(cfg);
    let mut failed = Vec::new();
    for m in cfg.selected_models(labels)? {
        let coded = load_coded(&out, &m.label)?;
        let (txt, csv) = vif_paths(&m.label);
        match screen(&coded, cfg.checks.vif_threshold) {
            Ok(report) => {
                out.write(&txt, &report.render_text())?;
                out.write(&csv, &report.to_csv())?;
                println!("{}: VIF {:?}", m.label, report.verdict);
                if report.verdict == Verdict::Fail {
                    failed.push(m.label.clone());
                }
            }
            Err(ScreeningError::TooFewColumns(n)) => {
                out.write(&txt, &format!("{n} fixed column(s); nothing to screen\n"))?;
                out.write(&csv, "column,vif,flagged\n")?;
                println!("{}: fewer than two columns, not screened", m.label);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Collinear(failed.join(", ")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    pub skip_screen: bool,
    pub allow_unconverged: bool,
}

/// What `compare` needs from a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScoreFile {
    provenance: BTreeMap<String, String>,
    score: FitScore,
}

/// Fits are comparable when they predict the same responses for the same
/// rows, whatever the grouping.
fn response_fingerprint(data: &CodedDataset) -> String {
    let mut h = Sha256::new();
    for (id, y) in data.row_ids.iter().zip(&data.response) {
        h.update(id.as_bytes());
        h.update([0u8, if *y == 1.0 { 1 } else { 0 }]);
    }
    hex::encode(h.finalize())
}

fn check_screen(out: &Artifacts, label: &str) -> Result<(), CliError> {
    let (_, csv) = vif_paths(label);
    let text = std::fs::read_to_string(out.path(&csv)).map_err(|_| CliError::MissingArtifact(csv.clone()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::MissingArtifact(format!("{csv}: {e}")))?;
        if rec.get(2) == Some("true") {
            return Err(CliError::Collinear(label.to_string()));
        }
    }
    Ok(())
}

fn fit_one(cfg: &RunConfig, out: &Artifacts, m: &ResolvedModel, opts: FitOptions) -> Result<bool, CliError> {
    let coded = load_coded(out, &m.label)?;
    if opts.skip_screen {
        log::warn!("fitting `{}` without a VIF screen", m.label);
    } else {
        check_screen(out, &m.label)?;
    }
    let draws = run_mcmc(&m.spec, &coded, &cfg.mcmc)?;
    let conv = interval_ratio_diagnostic(&draws, cfg.checks.interval_prob, cfg.checks.ratio_tol)?;
    let summaries = summarize(&draws)?;
    let loglik = draws.pooled_loglik();
    let waic = waic(&loglik)?;
    let loo = psis_loo(&loglik)?;
    let layout = ParameterLayout::new(&m.spec, &coded)?;
    let roles = layout.roles();

    let report = FitReport {
        label: m.label.clone(),
        title: format!(
            "{}: {} ({} mode, response {})",
            m.label,
            m.spec.structure.label(),
            m.mode,
            m.spec.response_name
        ),
        mode: Some(m.mode),
        n_obs: coded.n_rows(),
        summaries: summaries.clone(),
        roles: roles.clone(),
        columns: coded.columns.clone(),
        reference_levels: coded.reference_levels.clone(),
        waic: waic.clone(),
        loo: loo.clone(),
        converged: conv.overall_pass,
    };

    let dir = format!("fits/{}", m.label);
    let trace_path = out.prepare(&format!("{dir}/trace.csv"))?;
    let file = std::fs::File::create(&trace_path).map_err(|e| CliError::io(&trace_path, e))?;
    draws.write_trace(std::io::BufWriter::new(file), &out.header)?;
    if cfg.emit.text {
        out.write(&format!("{dir}/convergence.txt"), &conv.render_text())?;
        out.write(&format!("{dir}/summary.txt"), &report.render_text())?;
    }
    if cfg.emit.csv {
        out.write(&format!("{dir}/convergence.csv"), &conv.to_csv())?;
        out.write(&format!("{dir}/summary.csv"), &report.to_csv())?;
    }
    if cfg.emit.plotdata {
        let params: Vec<usize> = roles
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_coefficient() && **r != ParameterRole::Intercept)
            .map(|(i, _)| i)
            .collect();
        let csv = plot_data_csv(&summaries, &draws, &params, Some(m.mode), cfg.checks.plot_max_draws);
        out.write(&format!("{dir}/plotdata.csv"), &csv)?;
    }
    let score = ScoreFile {
        provenance: cfg.provenance(),
        score: FitScore {
            label: m.label.clone(),
            dataset_fingerprint: response_fingerprint(&coded),
            waic: waic.clone(),
            loo: loo.clone(),
        },
    };
    let json = serde_json::to_string_pretty(&score).expect("score serializes") + "\n";
    let score_path = out.prepare(&format!("{dir}/score.json"))?;
    std::fs::write(&score_path, json).map_err(|e| CliError::io(&score_path, e))?;

    let mut warnings = String::new();
    for w in &draws.warnings {
        let _ = writeln!(warnings, "{w:?}");
    }
    if loo.n_bad_k > 0 {
        let _ = writeln!(
            warnings,
            "{} observation(s) with Pareto k > {BAD_K_THRESHOLD}; LOO may be unreliable",
            loo.n_bad_k
        );
    }
    for p in conv.flagged() {
        let _ = writeln!(warnings, "interval ratio {:.4} for {}", p.interval_ratio, p.name);
    }
    out.write(&format!("{dir}/warnings.txt"), &warnings)?;
    if !warnings.is_empty() {
        log::warn!("`{}`:\n{warnings}", m.label);
    }
    println!(
        "{}: WAIC {:.1}  LOO {:.1}  max interval ratio {:.3} ({})",
        m.label,
        waic.waic,
        loo.looic,
        conv.max_ratio(),
        if conv.overall_pass { "converged" } else { "NOT converged" }
    );
    Ok(conv.overall_pass)
}

/// Fit each selected model. Artifacts are written even when convergence
/// fails; the command then exits with a numerical error unless allowed.
pub fn cmd_fit(cfg: &RunConfig, labels: &[String], opts: FitOptions) -> Result<(), CliError> {
    let out = Artifacts::for_config(cfg);
    let mut unconverged = Vec::new();
    for m in cfg.selected_models(labels)? {
        if !fit_one(cfg, &out, &m, opts)? {
            unconverged.push(m.label.clone());
        }
    }
    if unconverged.is_empty() || opts.allow_unconverged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "interval ratio above {} for {}",
            cfg.checks.ratio_tol,
            unconverged.join(", ")
        )))
    }
}

fn load_score(out: &Artifacts, label: &str) -> Result<FitScore, CliError> {
    let path = out.path(&format!("fits/{label}/score.json"));
    let text = std::fs::read_to_string(&path).map_err(|_| CliError::MissingFit(label.to_string()))?;
    let file: ScoreFile = serde_json::from_str(&text)
        .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", path.display())))?;
    Ok(file.score)
}

/// Rank fits by WAIC and LOO, either the given labels or every configured
/// comparison.
pub fn cmd_compare(cfg: &RunConfig, labels: &[String], name: &str) -> Result<(), CliError> {
    let out = Artifacts::for_config(cfg);
    let groups: Vec<ComparisonEntry> = if labels.is_empty() {
        cfg.comparisons.clone()
    } else {
        vec![ComparisonEntry {
            name: name.to_string(),
            labels: labels.to_vec(),
            columns: Vec::new(),
        }]
    };
    if groups.is_empty() {
        return Err(CliError::Usage("no labels given and no [[comparison]] in the config".into()));
    }
    // Comparisons sharing a column list go into one wide table.
    let mut wide: Vec<(Vec<String>, Vec<NamedReport>)> = Vec::new();
    for g in &groups {
        let mut scores = g
            .labels
            .iter()
            .map(|l| load_score(&out, l))
            .collect::<Result<Vec<_>, _>>()?;
        for (s, col) in scores.iter_mut().zip(&g.columns) {
            s.label = col.clone();
        }
        let report = compare_models(&scores)?;
        out.write(&format!("compare/{}.txt", g.name), &report.render_text())?;
        out.write(&format!("compare/{}.csv", g.name), &report.to_csv())?;
        println!("{}: best by WAIC `{}`, by LOO `{}`", g.name, report.best_by_waic, report.best_by_loo);
        if !g.columns.is_empty() {
            match wide.iter_mut().find(|(cols, _)| *cols == g.columns) {
                Some((_, reps)) => reps.push((g.name.clone(), report)),
                None => wide.push((g.columns.clone(), vec![(g.name.clone(), report)])),
            }
        }
    }
    if !wide.is_empty() {
        let body: Vec<String> = wide
            .iter()
            .map(|(cols, reps)| ComparisonReport::render_wide(reps, cols))
            .collect();
        out.write("compare/tables.txt", &body.join("\n"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynthOptions {
    pub scenario: Option<PathBuf>,
    pub fixture: bool,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

type NamedReport = (String, ComparisonReport);

/// Write the bundled fixture, or one dataset drawn from a scenario file.
pub fn cmd_synth(cfg: Option<&RunConfig>, opts: &SynthOptions) -> Result<(), CliError> {
    let root = opts
        .out_dir
        .clone()
        .or_else(|| cfg.map(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    if opts.fixture {
        write_fixture_with_seed(&root, opts.seed.unwrap_or(FIXTURE_SEED))?;
        println!("fixture written to {}", root.display());
        return Ok(());
    }
    let path = opts
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Usage("synth needs --scenario PATH or --fixture".into()))?;
    let mut scenario = TruthScenario::load(path)?;
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    let hash = hex::encode(Sha256::digest(scenario.to_toml_string()))[..16].to_string();
    let provenance = BTreeMap::from([
        ("toolkit".to_string(), format!("hbcrash {}", env!("CARGO_PKG_VERSION"))),
        ("config_hash".to_string(), hash),
        ("seed".to_string(), scenario.seed.to_string()),
    ]);
    let out = Artifacts::new(&root, provenance.iter().map(|(k, v)| format!("{k} {v}")).collect());
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();
    let (data, truth) = generate_synthetic_with_truth(&scenario)?;
    let csv = format!("synth/{stem}.csv");
    out.prepare(&csv)?;
    data.write_with_provenance(out.path(&csv), out.path(&format!("synth/{stem}.meta.json")), &provenance)?;
    let truth_toml = toml::to_string(&truth).expect("truth serializes");
    out.write(&format!("synth/{stem}.truth.toml"), &truth_toml)?;
    println!(
        "{stem}: {} rows in {} groups, response rate {:.3}",
        data.n_rows(),
        data.n_groups_l2(),
        crate::stats::mean(&data.response)
    );
    Ok(())
}

/// Gather frequency tables, fit summaries and comparisons into one report,
/// and all plot data into one long CSV.
pub fn cmd_report(cfg: &RunConfig) -> Result<(), CliError> {
    let out = Artifacts::for_config(cfg);
    let mut text = String::new();
    if let Some(freq) = out.read_body("ingest/frequencies.txt") {
        let _ = writeln!(text, "== Variable frequencies ==\n\n{freq}");
    }
    let mut plot_rows: Vec<String> = Vec::new();
    let mut plot_header: Option<String> = None;
    let mut n_fits = 0;
    for m in cfg.selected_models(&[])? {
        let dir = format!("fits/{}", m.label);
        let Some(summary) = out.read_body(&format!("{dir}/summary.txt")) else {
            let _ = writeln!(text, "== {} ==\n\n(not fitted)\n", m.label);
            continue;
        };
        n_fits += 1;
        let _ = writeln!(text, "== {} ==\n\n{summary}", m.label);
        if let Some(conv) = out.read_body(&format!("{dir}/convergence.txt")) {
            let first = conv.lines().next().unwrap_or_default();
            let _ = writeln!(text, "{first}\n");
        }
        if let Some(plot) = out.read_body(&format!("{dir}/plotdata.csv")) {
            let mut lines = plot.lines();
            if let Some(h) = lines.next() {
                plot_header.get_or_insert_with(|| h.to_string());
            }
            plot_rows.extend(lines.map(|l| format!("{},{l}", quote_csv(&m.label))));
        }
    }
    if n_fits == 0 {
        return Err(CliError::MissingArtifact("fits/ (run `fit` first)".into()));
    }
    for g in &cfg.comparisons {
        if let Some(cmp) = out.read_body(&format!("compare/{}.txt", g.name)) {
            let _ = writeln!(text, "== Comparison {} ==\n\n{cmp}", g.name);
        }
    }
    if let Some(tables) = out.read_body("compare/tables.txt") {
        let _ = writeln!(text, "== Comparison tables ==\n\n{tables}");
    }
    out.write("report/report.txt", &text)?;
    if let Some(h) = plot_header {
        let mut csv = format!("model,{h}\n");
        for r in plot_rows {
            csv.push_str(&r);
            csv.push('\n');
        }
        out.write("report/plotdata.csv", &csv)?;
    }
    println!("report written for {n_fits} fit(s)");
    Ok(())
}

fn quote_csv(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_stripped() {
        assert_eq!(strip_header("# a 1\n# b 2\nx,y\n1,2\n"), "x,y\n1,2\n");
        assert_eq!(strip_header("x\n"), "x\n");
        assert_eq!(strip_header("# only\n"), "");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(quote_csv("plain"), "plain");
        assert_eq!(quote_csv("a,b"), "\"a,b\"");
        assert_eq!(quote_csv("q\"x"), "\"q\"\"x\"");
    }
}
