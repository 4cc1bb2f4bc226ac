//! Suite runs: run configuration, per-state evaluation and the report files.
//!
//! Layout written under the output directory:
//!
//! ```text
//! <out>/<state>/report.json   EvalReport
//! <out>/<state>/report.csv    one results row
//! <out>/<state>/rules.md      rules of the full-data CART member
//! <out>/<state>/truth.json    generator ground truth (synthetic runs)
//! <out>/results.csv           one row per state
//! <out>/stats.txt             one-sample t-tests over results.csv
//! <out>/stats.csv             the same tests, full precision
//! <out>/run_meta.json         timestamps and the resolved configuration
//! ```
//!
//! `<out>/.partial` exists while a run is in progress and stays behind when
//! it fails.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, Dataset, Schema, DEFAULT_LABEL_COLUMN};
use crate::ensemble::{train_upm, CombineRule};
use crate::error::{Result, UpmError};
use crate::evaluate::{cross_validate, EvalConfig, EvalReport, Target, RESULTS_HEADER};
use crate::exec::Execution;
use crate::preprocess::Impute;
use crate::rules::{format_rules, model_rules, RuleSet, RuleSource, RuleStyle};
use crate::stats::{format_report, report_csv_row, OneSampleReport, REPORT_CSV_HEADER};
use crate::synth::{generate_suite, slug, GeneratorTruth, SuiteSpec};

pub const PARTIAL_MARKER: &str = ".partial";

/// Results columns tested in `stats.txt`: column, display label, default μ₀.
pub const STAT_COLUMNS: [(&str, &str, f64); 3] = [
    ("accuracy_pct", "Accuracy", 90.0),
    ("f1_weighted_pct", "F1 Score", 90.0),
    ("kappa", "Kappa", 0.8),
];

/// Keys accepted by [`RunConfig::set`] and config files.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("seed", "master seed for the pipeline and the synthetic suite"),
    ("folds", "cross-validation folds (>= 2)"),
    ("rule", "vote rule: avg | majority"),
    ("global_prep", "fit preprocessing once on the whole dataset: true | false"),
    ("target", "what each fold trains: upm | random_tree | kstar | cart | random_forest"),
    ("out", "output directory"),
    ("inputs", "comma-separated CSV paths"),
    ("label_column", "label column of input CSVs"),
    ("synthetic", "evaluate the generated 17-state suite: true | false"),
    ("synth.seed", "master seed of the synthetic suite only"),
    ("synth.signal", "signal strength beta"),
    ("synth.weights", "six comma-separated informative weights"),
    ("synth.positive_rate", "target share of Placed"),
    ("synth.missing_rate", "share of cells blanked"),
    ("synth.attributes", "attributes per cohort"),
    ("clean.max_missing_fraction", "drop attributes missing more often than this"),
    ("clean.impute", "median_mode | drop_row"),
    ("clean.drop_constant", "drop constant attributes: true | false"),
    ("cluster.k", "cluster count, or auto for silhouette choice"),
    ("cart.min_leaf", "minimum instances per CART leaf"),
    ("cart.prune", "cost-complexity pruning: true | false"),
    ("cart.prune_folds", "internal folds for choosing alpha"),
    ("cart.one_se_rule", "apply the 1-SE rule: true | false"),
    ("rtree.k_attrs", "attributes tried per node, or auto"),
    ("rtree.min_leaf", "minimum instances per random-tree leaf"),
    ("forest.n_trees", "forest size"),
    ("forest.bootstrap", "bootstrap forest members: true | false"),
    ("kstar.blend", "K-Star blend percentage in (0, 100]"),
    ("formats", "per-state outputs: any of json, csv, markdown, text"),
    ("rules.source", "rule trees: cart | random_tree | forest"),
    ("execution", "parallel | sequential"),
    ("stats.mu_accuracy", "accuracy test value"),
    ("stats.mu_f1", "F1 test value"),
    ("stats.mu_kappa", "kappa test value"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFormats {
    pub json: bool,
    pub csv: bool,
    pub markdown: bool,
    pub text: bool,
}

impl Default for ReportFormats {
    fn default() -> Self {
        ReportFormats {
            json: true,
            csv: true,
            markdown: true,
            text: false,
        }
    }
}

impl std::str::FromStr for ReportFormats {
    type Err = UpmError;

    fn from_str(s: &str) -> Result<Self> {
        let mut f = ReportFormats {
            json: false,
            csv: false,
            markdown: false,
            text: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "json" => f.json = true,
                "csv" => f.csv = true,
                "markdown" | "md" => f.markdown = true,
                "text" | "txt" => f.text = true,
                other => return Err(UpmError::Config(format!("unknown report format {other:?}"))),
            }
        }
        Ok(f)
    }
}

/// Everything a suite run needs, validated before any work starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub synthetic: bool,
    pub synth: SuiteSpec,
    pub eval: EvalConfig,
    pub label_column: String,
    pub out: PathBuf,
    pub formats: ReportFormats,
    pub rule_source: RuleSource,
    pub execution: Execution,
    pub mu_accuracy: f64,
    pub mu_f1: f64,
    pub mu_kappa: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            synthetic: false,
            synth: SuiteSpec::default(),
            eval: EvalConfig::default(),
            label_column: DEFAULT_LABEL_COLUMN.to_string(),
            out: PathBuf::from("upm-out"),
            formats: ReportFormats::default(),
            rule_source: RuleSource::Cart,
            execution: Execution::default(),
            mu_accuracy: STAT_COLUMNS[0].2,
            mu_f1: STAT_COLUMNS[1].2,
            mu_kappa: STAT_COLUMNS[2].2,
        }
    }
}

fn config_err(key: &str, value: &str, what: &str) -> UpmError {
    UpmError::Config(format!("{key} = {value:?}: expected {what}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config_err(key, v, "true or false")),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str, what: &str) -> Result<T> {
    v.parse().map_err(|_| config_err(key, v, what))
}

fn parse_auto(key: &str, v: &str) -> Result<Option<usize>> {
    if v.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_num(key, v, "an integer or auto").map(Some)
    }
}

impl RunConfig {
    /// Sets one key. `seed` sets both the pipeline seed and the suite seed.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let train = &mut self.eval.pipeline.train;
        let clean = &mut self.eval.pipeline.prep.clean;
        match key.trim() {
            "seed" => {
                let s: u64 = parse_num(key, v, "an unsigned integer")?;
                self.eval.pipeline.seed = s;
                self.synth.master_seed = s;
            }
            "folds" => self.eval.folds = parse_num(key, v, "an integer")?,
            "rule" => self.eval.pipeline.rule = v.parse::<CombineRule>()?,
            "global_prep" => self.eval.global_prep = parse_bool(key, v)?,
            "target" => self.eval.target = v.parse::<Target>()?,
            "out" => self.out = PathBuf::from(v),
            "inputs" => {
                self.inputs = v
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "label_column" => self.label_column = v.to_string(),
            "synthetic" => self.synthetic = parse_bool(key, v)?,
            "synth.seed" => self.synth.master_seed = parse_num(key, v, "an unsigned integer")?,
            "synth.signal" => self.synth.signal_strength = parse_num(key, v, "a number")?,
            "synth.weights" => {
                let w: Vec<f64> = v
                    .split(',')
                    .map(|x| parse_num(key, x.trim(), "six numbers"))
                    .collect::<Result<_>>()?;
                if w.len() != self.synth.weights.len() {
                    return Err(config_err(key, v, "six numbers"));
                }
                self.synth.weights.copy_from_slice(&w);
            }
            "synth.positive_rate" => self.synth.positive_rate = parse_num(key, v, "a number")?,
            "synth.missing_rate" => self.synth.missing_rate = parse_num(key, v, "a number")?,
            "synth.attributes" => self.synth.n_attributes = parse_num(key, v, "an integer")?,
            "clean.max_missing_fraction" => {
                clean.max_missing_fraction = parse_num(key, v, "a number")?
            }
            "clean.impute" => {
                clean.impute = match v.to_ascii_lowercase().as_str() {
                    "median_mode" | "median" => Impute::MedianMode,
                    "drop_row" => Impute::DropRow,
                    _ => return Err(config_err(key, v, "median_mode or drop_row")),
                }
            }
            "clean.drop_constant" => clean.drop_constant = parse_bool(key, v)?,
            "cluster.k" => self.eval.pipeline.prep.cluster_k = parse_auto(key, v)?,
            "cart.min_leaf" => train.cart.min_leaf = parse_num(key, v, "an integer")?,
            "cart.prune" => train.cart.prune = parse_bool(key, v)?,
            "cart.prune_folds" => train.cart.prune_folds = parse_num(key, v, "an integer")?,
            "cart.one_se_rule" => train.cart.one_se_rule = parse_bool(key, v)?,
            "rtree.k_attrs" => train.rtree.k_attrs = parse_auto(key, v)?,
            "rtree.min_leaf" => train.rtree.min_leaf = parse_num(key, v, "an integer")?,
            "forest.n_trees" => train.forest.n_trees = parse_num(key, v, "an integer")?,
            "forest.bootstrap" => train.forest.bootstrap = parse_bool(key, v)?,
            "kstar.blend" => train.kstar.blend = parse_num(key, v, "a number")?,
            "formats" => self.formats = v.parse()?,
            "rules.source" => self.rule_source = v.parse()?,
            "execution" => {
                self.execution = match v.to_ascii_lowercase().as_str() {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(config_err(key, v, "parallel or sequential")),
                }
            }
            "stats.mu_accuracy" => self.mu_accuracy = parse_num(key, v, "a number")?,
            "stats.mu_f1" => self.mu_f1 = parse_num(key, v, "a number")?,
            "stats.mu_kappa" => self.mu_kappa = parse_num(key, v, "a number")?,
            other => return Err(UpmError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` document; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                UpmError::Config(format!("line {}: expected key = value", i + 1))
            })?;
            self.set(k, v)
                .map_err(|e| UpmError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| UpmError::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Checks the pipeline and fold settings only.
    pub fn validate_pipeline(&self) -> Result<()> {
        self.eval.pipeline.validate()?;
        if self.eval.folds < 2 {
            return Err(UpmError::Config("folds must be at least 2".into()));
        }
        Ok(())
    }

    /// Full check before a suite run.
    pub fn validate(&self) -> Result<()> {
        self.validate_pipeline()?;
        match (self.synthetic, self.inputs.is_empty()) {
            (true, false) => {
                return Err(UpmError::Config(
                    "give either input files or the synthetic suite, not both".into(),
                ))
            }
            (false, true) => {
                return Err(UpmError::Config(
                    "no datasets: pass input files or the synthetic suite".into(),
                ))
            }
            _ => {}
        }
        if self.synthetic {
            for spec in self.synth.cohort_specs() {
                spec.validate()?;
            }
        }
        if self.label_column.is_empty() {
            return Err(UpmError::Config("label_column is empty".into()));
        }
        for (name, mu) in [
            ("stats.mu_accuracy", self.mu_accuracy),
            ("stats.mu_f1", self.mu_f1),
            ("stats.mu_kappa", self.mu_kappa),
        ] {
            if !mu.is_finite() {
                return Err(UpmError::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Evaluation settings with the run's execution mode applied.
    pub fn eval_config(&self) -> EvalConfig {
        let mut e = self.eval;
        e.pipeline.train.exec = self.execution;
        e
    }

    fn mus(&self) -> [f64; 3] {
        [self.mu_accuracy, self.mu_f1, self.mu_kappa]
    }
}

/// Input datasets, or the generated suite with its ground truth.
pub fn load_datasets(cfg: &RunConfig) -> Result<Vec<(Dataset, Option<GeneratorTruth>)>> {
    if cfg.synthetic {
        return Ok(generate_suite(&cfg.synth, cfg.execution)?
            .into_iter()
            .map(|(ds, t)| (ds, Some(t)))
            .collect());
    }
    let schema = Schema::with_label(&cfg.label_column);
    cfg.inputs
        .iter()
        .map(|p| {
            load_csv(p, &schema)
                .map(|ds| (ds, None))
                .map_err(|e| e.in_dataset(p.display().to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateOutcome {
    pub report: EvalReport,
    pub rules: Vec<RuleSet>,
    pub truth: Option<GeneratorTruth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub n_states: usize,
    pub mean_accuracy_pct: f64,
    pub mean_f1_weighted_pct: f64,
    pub mean_kappa: f64,
}

impl SuiteSummary {
    pub fn from_reports(reports: &[&EvalReport]) -> Self {
        let n = reports.len();
        let mean = |f: &dyn Fn(&EvalReport) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                reports.iter().map(|r| f(r)).sum::<f64>() / n as f64
            }
        };
        SuiteSummary {
            n_states: n,
            mean_accuracy_pct: mean(&|r| r.accuracy_pct),
            mean_f1_weighted_pct: mean(&|r| r.f1_weighted_pct),
            mean_kappa: mean(&|r| r.kappa),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub states: Vec<StateOutcome>,
    pub summary: SuiteSummary,
    pub tests: Vec<OneSampleReport>,
    /// Tests that could not be computed, with the reason.
    pub skipped: Vec<String>,
}

impl SuiteReport {
    pub fn results_csv(&self) -> String {
        results_csv(self.states.iter().map(|s| &s.report))
    }

    pub fn stats_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tests {
            out.push_str(&format_report(t));
            out.push('\n');
        }
        for s in &self.skipped {
            let _ = writeln!(out, "{s}");
        }
        out
    }

    pub fn stats_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{REPORT_CSV_HEADER}");
        for t in &self.tests {
            let _ = writeln!(out, "{}", report_csv_row(t));
        }
        out
    }
}

pub fn results_csv<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RESULTS_HEADER}");
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Numeric values of `column` in a results CSV.
pub fn read_results_column(path: impl AsRef<Path>, column: &str) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| UpmError::io(path, e))?;
    read_column(f, column)
}

fn read_column<R: std::io::Read>(reader: R, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let pos = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| UpmError::InvalidData(format!("column {column:?} not found")))?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let cell = rec.get(pos).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    UpmError::InvalidData(format!("row {}: {column} = {cell:?} is not a number", i + 1))
                })
        })
        .collect()
}

fn column_label(column: &str) -> &str {
    STAT_COLUMNS
        .iter()
        .find(|(c, _, _)| *c == column)
        .map_or(column, |(_, label, _)| label)
}

/// One-sample t-test on one column of a results CSV.
pub fn stats_from_csv(path: impl AsRef<Path>, column: &str, mu0: f64) -> Result<OneSampleReport> {
    let values = read_results_column(path, column)?;
    OneSampleReport::compute(column_label(column), &values, mu0)
}

fn stats_from_text(text: &str, mus: [f64; 3]) -> Result<(Vec<OneSampleReport>, Vec<String>)> {
    let mut tests = Vec::new();
    let mut skipped = Vec::new();
    for ((column, label, _), mu) in STAT_COLUMNS.iter().zip(mus) {
        let values = read_column(text.as_bytes(), column)?;
        match OneSampleReport::compute(*label, &values, mu) {
            Ok(r) => tests.push(r),
            Err(e) => skipped.push(format!("{label}: not tested ({e})")),
        }
    }
    Ok((tests, skipped))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| UpmError::io(path, e))
}

fn rules_document(sets: &[RuleSet], style: RuleStyle) -> String {
    sets.iter()
        .map(|rs| format_rules(rs, style))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Cross-validates one dataset and extracts rules from a full-data model.
pub fn evaluate_state(ds: &Dataset, eval: &EvalConfig, source: RuleSource) -> Result<(EvalReport, Vec<RuleSet>)> {
    let report = cross_validate(ds, eval)?;
    let model = train_upm(ds, &eval.pipeline)?;
    let rules = model_rules(&model, ds, source)?;
    Ok((report, rules))
}

fn write_state(dir: &Path, s: &StateOutcome, formats: ReportFormats) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| UpmError::io(dir, e))?;
    if formats.json {
        write(&dir.join("report.json"), &s.report.to_json()?)?;
    }
    if formats.csv {
        write(&dir.join("report.csv"), &s.report.to_csv())?;
        write(&dir.join("rules.csv"), &rules_document(&s.rules, RuleStyle::Csv))?;
    }
    if formats.markdown {
        write(&dir.join("rules.md"), &rules_document(&s.rules, RuleStyle::Markdown))?;
    }
    if formats.text {
        write(&dir.join("rules.txt"), &rules_document(&s.rules, RuleStyle::Text))?;
    }
    if let Some(t) = &s.truth {
        write(&dir.join("truth.json"), &serde_json::to_string_pretty(t)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: &'a str,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    states: Vec<&'a str>,
    config: &'a RunConfig,
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Evaluates every dataset and writes the report tree under `cfg.out`.
///
/// States are evaluated through `cfg.execution`; files are written by this
/// thread alone, in input order. On failure the `.partial` marker is left in
/// place and the error names the dataset.
pub fn run_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let started = unix_ms();
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|e| UpmError::io(out, e))?;
    let marker = out.join(PARTIAL_MARKER);
    write(&marker, "incomplete run\n")?;

    let datasets = load_datasets(cfg)?;
    let eval = cfg.eval_config();
    let evaluated = cfg.execution.map(datasets.len(), |i| {
        let ds = &datasets[i].0;
        evaluate_state(ds, &eval, cfg.rule_source).map_err(|e| e.in_dataset(ds.name()))
    });

    let mut states = Vec::with_capacity(datasets.len());
    for ((ds, truth), result) in datasets.into_iter().zip(evaluated) {
        let (report, rules) = result?;
        let s = StateOutcome { report, rules, truth };
        write_state(&out.join(slug(ds.name())), &s, cfg.formats)?;
        states.push(s);
    }

    let results = results_csv(states.iter().map(|s| &s.report));
    write(&out.join("results.csv"), &results)?;
    // stats from the CSV text, as a reader of results.csv would compute them
    let (tests, skipped) = stats_from_text(&results, cfg.mus())?;
    let summary = SuiteSummary::from_reports(&states.iter().map(|s| &s.report).collect::<Vec<_>>());
    let report = SuiteReport {
        states,
        summary,
        tests,
        skipped,
    };
    write(&out.join("stats.txt"), &report.stats_text())?;
    write(&out.join("stats.csv"), &report.stats_csv())?;

    let meta = RunMeta {
        version: env!("CARGO_PKG_VERSION"),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        states: report.states.iter().map(|s| s.report.dataset.as_str()).collect(),
        config: cfg,
    };
    write(&out.join("run_meta.json"), &serde_json::to_string_pretty(&meta)?)?;
    fs::remove_file(&marker).map_err(|e| UpmError::io(&marker, e))?;
    Ok(report)
}
