//! Synthetic placement cohorts with a known generative model.
//!
//! Schema (150 attributes by default), in column order:
//!
//! * Aptitude, informative: `LogicalScore`, `LogicalPct`, `EnglishScore`,
//!   `EnglishPct`, `QuantScore`, `QuantPct`. Each is followed by three noisy
//!   sub-scores (`<name>Sub1..3`, correlation 0.65 with their parent) that do
//!   not enter the label model.
//! * Eight nuisance families (`Academic`, `Technical`, `Communication`,
//!   `Psychometric`, `Cognitive`, `Extracurricular`, `Attendance`,
//!   `Internship`), each with seven members sharing one latent factor
//!   (pairwise correlation 0.8) and a near copy `<family>1Dup` of the first.
//! * Fourteen demographic categoricals (`Gender`, `Board10`, ...).
//! * Independent numeric survey items `Survey01..` filling up to
//!   `n_attributes`, minus any extra informative attributes, which come last.
//!
//! Labels: `P(Placed) = sigmoid(beta * w.z / |w| + b)` over the standardised
//! informative values `z`; `b` is solved by bisection so the expected Placed
//! rate equals `positive_rate`. Each state shifts the informative means by a
//! draw from `N(0, state_shift_sd)`. Labels are drawn before any nuisance
//! column, from their own stream.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{AttributeDescriptor, Cell, Dataset, DatasetMeta, Label, DEFAULT_LABEL_COLUMN};
use crate::error::{Result, UpmError};
use crate::exec::Execution;
use crate::rng::{derive_seed, rng_from_seed, UpmRng};

pub const INFORMATIVE: [&str; 6] = [
    "LogicalScore",
    "LogicalPct",
    "EnglishScore",
    "EnglishPct",
    "QuantScore",
    "QuantPct",
];

pub const DEFAULT_WEIGHTS: [f64; 6] = [1.0, 0.2, 0.2, 0.2, 0.2, 0.2];
pub const DEFAULT_SIGNAL: f64 = 5.0;
pub const DEFAULT_POSITIVE_RATE: f64 = 0.35;
pub const DEFAULT_MISSING_RATE: f64 = 0.02;
pub const DEFAULT_ATTRIBUTES: usize = 150;
pub const MONTE_CARLO_DRAWS: usize = 20_000;

const SUBSCORES: usize = 3;
const SUBSCORE_CORR: f64 = 0.65;
const FAMILIES: [&str; 8] = [
    "Academic",
    "Technical",
    "Communication",
    "Psychometric",
    "Cognitive",
    "Extracurricular",
    "Attendance",
    "Internship",
];
const FAMILY_SIZE: usize = 7;
const FAMILY_CORR: f64 = 0.8;
const DUP_LOADING: f64 = 0.985;

const DEMOGRAPHICS: [(&str, &[&str]); 14] = [
    ("Gender", &["F", "M"]),
    ("Board10", &["CBSE", "ICSE", "State"]),
    ("Board12", &["CBSE", "ICSE", "State"]),
    ("SchoolMedium", &["English", "Hindi", "Regional"]),
    ("HomeLocation", &["Metro", "Rural", "Town", "Urban"]),
    ("Hostel", &["No", "Yes"]),
    ("FatherOccupation", &["Business", "Farming", "Salaried", "Other"]),
    ("MotherOccupation", &["Business", "Homemaker", "Salaried", "Other"]),
    ("IncomeBand", &["High", "Low", "Middle", "UpperMiddle"]),
    ("Branch", &["CE", "CSE", "ECE", "EE", "IT", "MCA", "ME"]),
    ("AdmissionQuota", &["General", "Management", "Reserved"]),
    ("Transport", &["Bus", "Own", "Walk"]),
    ("ParentEducation", &["Graduate", "None", "PostGraduate", "School"]),
    ("Siblings", &["0", "1", "2", "3+"]),
];

/// State names and cohort sizes, in dataset order.
pub const STATES: [(&str, usize); 17] = [
    ("Andhra Pradesh", 516),
    ("Bihar", 411),
    ("Chhattisgarh", 439),
    ("Delhi", 460),
    ("Gujarat", 440),
    ("Haryana", 350),
    ("Jharkhand", 425),
    ("Karnataka", 310),
    ("Kerala", 261),
    ("Madhya Pradesh", 344),
    ("Maharashtra", 958),
    ("Punjab", 453),
    ("Rajasthan", 178),
    ("Tamil Nadu", 287),
    ("Uttar Pradesh", 1192),
    ("Uttarakhand", 104),
    ("West Bengal", 32),
];

mod tag {
    pub const SHIFT: u64 = 1;
    pub const INFORMATIVE: u64 = 2;
    pub const LABELS: u64 = 3;
    pub const SUBSCORES: u64 = 4;
    pub const FAMILIES: u64 = 5;
    pub const DEMOGRAPHICS: u64 = 6;
    pub const SURVEY: u64 = 7;
    pub const MISSING: u64 = 8;
    pub const MONTE_CARLO: u64 = 9;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraSignal {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub state: String,
    pub n_instances: usize,
    pub n_attributes: usize,
    /// Label weights of the six named informative attributes.
    pub weights: [f64; 6],
    /// Additional standalone informative attributes.
    pub extra_informative: Vec<ExtraSignal>,
    pub signal_strength: f64,
    pub positive_rate: f64,
    pub missing_rate: f64,
    pub state_shift_sd: f64,
    /// Reject informative draws whose score lies within this distance of the
    /// decision boundary (0 disables).
    pub margin: f64,
    pub seed: u64,
}

impl CohortSpec {
    pub fn new(state: impl Into<String>, n_instances: usize, seed: u64) -> Self {
        CohortSpec {
            state: state.into(),
            n_instances,
            n_attributes: DEFAULT_ATTRIBUTES,
            weights: DEFAULT_WEIGHTS,
            extra_informative: Vec::new(),
            signal_strength: DEFAULT_SIGNAL,
            positive_rate: DEFAULT_POSITIVE_RATE,
            missing_rate: DEFAULT_MISSING_RATE,
            state_shift_sd: 0.25,
            margin: 0.0,
            seed,
        }
    }

    /// Near-deterministic labels driven mostly by `LogicalScore`, no missing
    /// cells and a rejection margin around the boundary.
    pub fn separable(state: impl Into<String>, n_instances: usize, seed: u64) -> Self {
        CohortSpec {
            weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            signal_strength: 40.0,
            positive_rate: 0.5,
            missing_rate: 0.0,
            margin: 0.25,
            ..CohortSpec::new(state, n_instances, seed)
        }
    }

    fn fixed_width(&self) -> usize {
        INFORMATIVE.len() * (1 + SUBSCORES)
            + FAMILIES.len() * (FAMILY_SIZE + 1)
            + DEMOGRAPHICS.len()
            + self.extra_informative.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(UpmError::Config(m));
        if self.n_instances < 2 {
            return bad(format!("n_instances must be at least 2, got {}", self.n_instances));
        }
        if self.n_attributes < self.fixed_width() {
            return bad(format!(
                "n_attributes must be at least {} for this schema",
                self.fixed_width()
            ));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad(format!("positive_rate {} outside (0, 1)", self.positive_rate));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!("missing_rate {} outside [0, 1)", self.missing_rate));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad("signal_strength must be finite and non-negative".into());
        }
        if !(self.margin >= 0.0 && self.margin < 3.0) {
            return bad("margin must be in [0, 3)".into());
        }
        if self.state_shift_sd < 0.0 {
            return bad("state_shift_sd must be non-negative".into());
        }
        let w = self.all_weights();
        if self.signal_strength > 0.0 && w.iter().all(|&x| x == 0.0) {
            return bad("at least one informative weight must be non-zero".into());
        }
        Ok(())
    }

    fn all_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .copied()
            .chain(self.extra_informative.iter().map(|e| e.weight))
            .collect()
    }

    pub fn informative_names(&self) -> Vec<String> {
        INFORMATIVE
            .iter()
            .map(|s| s.to_string())
            .chain(self.extra_informative.iter().map(|e| e.name.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTruth {
    pub state: String,
    pub seed: u64,
    pub n_instances: usize,
    /// Unit-norm coefficient per informative attribute.
    pub coefficients: Vec<(String, f64)>,
    pub signal_strength: f64,
    pub intercept: f64,
    /// Monte Carlo estimate of the best attainable accuracy, in percent.
    pub bayes_accuracy_pct: f64,
    /// Mean of max(p, 1 - p) over the generated instances, in percent.
    pub realized_bayes_accuracy_pct: f64,
    pub positive_rate_target: f64,
    pub realized_positive_rate: f64,
    /// Per-attribute state shift of the informative means, in sd units.
    pub state_shift: Vec<f64>,
    /// `(original, duplicate)` column names.
    pub duplicate_pairs: Vec<(String, String)>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn normal(rng: &mut UpmRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Informative draws with unit-norm score `s = w.z / |w|`, honouring the margin
/// around `boundary` (the score where the label probability is 1/2).
fn draw_informative(rng: &mut UpmRng, unit_w: &[f64], margin: f64, boundary: f64) -> (Vec<f64>, f64) {
    loop {
        let z: Vec<f64> = (0..unit_w.len()).map(|_| normal(rng)).collect();
        let s: f64 = z.iter().zip(unit_w).map(|(a, b)| a * b).sum();
        if margin == 0.0 || (s - boundary).abs() >= margin {
            return (z, s);
        }
    }
}

fn unit_weights(w: &[f64]) -> Vec<f64> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        vec![0.0; w.len()]
    } else {
        w.iter().map(|x| x / norm).collect()
    }
}

/// Solves the intercept on a Monte Carlo sample of scores.
///
/// With a margin the accepted scores depend on the boundary, which depends
/// on the intercept; a few fixed-point rounds settle it.
fn solve_intercept(spec: &CohortSpec, unit_w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let beta = spec.signal_strength;
    let mut boundary = 0.0;
    let mut b = 0.0;
    let rounds = if spec.margin > 0.0 { 6 } else { 1 };
    let mut scores = Vec::new();
    for _ in 0..rounds {
        let mut rng = rng_from_seed(derive_seed(spec.seed, tag::MONTE_CARLO));
        scores = (0..MONTE_CARLO_DRAWS)
            .map(|_| draw_informative(&mut rng, unit_w, spec.margin, boundary).1)
            .collect();
        let rate = |b: f64| scores.iter().map(|&s| sigmoid(beta * s + b)).sum::<f64>() / scores.len() as f64;
        let (mut lo, mut hi) = (-60.0, 60.0);
        if rate(lo) > spec.positive_rate || rate(hi) < spec.positive_rate {
            return Err(UpmError::Numeric(format!(
                "positive rate {} unreachable with signal strength {}",
                spec.positive_rate, beta
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rate(mid) < spec.positive_rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        b = 0.5 * (lo + hi);
        if (rate(b) - spec.positive_rate).abs() > 1e-6 {
            return Err(UpmError::Numeric("intercept bisection did not converge".into()));
        }
        if beta > 0.0 {
            boundary = -b / beta;
        }
    }
    Ok((b, scores))
}

struct Columns {
    attributes: Vec<AttributeDescriptor>,
    columns: Vec<Vec<Cell>>,
}

impl Columns {
    fn push_numeric(&mut self, name: String, values: Vec<f64>) {
        let i = self.attributes.len();
        self.attributes.push(AttributeDescriptor::numeric(name, i));
        self.columns
            .push(values.into_iter().map(|v| Cell::Num((v * 100.0).round() / 100.0)).collect());
    }
}

/// Generates one cohort and its ground truth.
pub fn generate_cohort(spec: &CohortSpec) -> Result<(Dataset, GeneratorTruth)> {
    spec.validate()?;
    let n = spec.n_instances;
    let beta = spec.signal_strength;
    let weights = spec.all_weights();
    let unit_w = unit_weights(&weights);
    let (b, mc_scores) = solve_intercept(spec, &unit_w)?;
    let boundary = if beta > 0.0 { -b / beta } else { 0.0 };
    let bayes = 100.0
        * mc_scores
            .iter()
            .map(|&s| {
                let p = sigmoid(beta * s + b);
                p.max(1.0 - p)
            })
            .sum::<f64>()
        / mc_scores.len() as f64;

    let n_inf = unit_w.len();
    let mut rng = rng_from_seed(derive_seed(spec.seed, tag::SHIFT));
    let shift: Vec<f64> = (0..n_inf).map(|_| spec.state_shift_sd * normal(&mut rng)).collect();

    let mut rng = rng_from_seed(derive_seed(spec.seed, tag::INFORMATIVE));
    let draws: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| draw_informative(&mut rng, &unit_w, spec.margin, boundary))
        .collect();

    let mut rng = rng_from_seed(derive_seed(spec.seed, tag::LABELS));
    let probs: Vec<f64> = draws.iter().map(|(_, s)| sigmoid(beta * s + b)).collect();
    let labels: Vec<Label> = probs
        .iter()
        .map(|&p| {
            if rng.random::<f64>() < p {
                Label::Placed
            } else {
                Label::Unplaced
            }
        })
        .collect();

    let mut cols = Columns {
        attributes: Vec::new(),
        columns: Vec::new(),
    };
    let mut sub_rng = rng_from_seed(derive_seed(spec.seed, tag::SUBSCORES));
    for (k, name) in INFORMATIVE.iter().enumerate() {
        let (center, scale) = if name.ends_with("Pct") { (60.0, 12.0) } else { (50.0, 10.0) };
        let z: Vec<f64> = draws.iter().map(|(z, _)| z[k]).collect();
        cols.push_numeric(
            name.to_string(),
            z.iter().map(|v| center + scale * (v + shift[k])).collect(),
        );
        for s in 1..=SUBSCORES {
            let e = (1.0 - SUBSCORE_CORR * SUBSCORE_CORR).sqrt();
            let vals = z
                .iter()
                .map(|v| 5.0 + 2.0 * (SUBSCORE_CORR * v + e * normal(&mut sub_rng)))
                .collect();
            cols.push_numeric(format!("{name}Sub{s}"), vals);
        }
    }

    let mut fam_rng = rng_from_seed(derive_seed(spec.seed, tag::FAMILIES));
    let mut duplicate_pairs = Vec::new();
    let load = FAMILY_CORR.sqrt();
    let e = (1.0 - FAMILY_CORR).sqrt();
    for fam in FAMILIES {
        let factor: Vec<f64> = (0..n).map(|_| normal(&mut fam_rng)).collect();
        let mut first = Vec::new();
        for j in 1..=FAMILY_SIZE {
            let v: Vec<f64> = factor
                .iter()
                .map(|f| load * f + e * normal(&mut fam_rng))
                .collect();
            if j == 1 {
                first = v.clone();
            }
            cols.push_numeric(format!("{fam}{j}"), v.iter().map(|x| 50.0 + 10.0 * x).collect());
        }
        let d = (1.0 - DUP_LOADING * DUP_LOADING).sqrt();
        let dup = first
            .iter()
            .map(|x| 50.0 + 10.0 * (DUP_LOADING * x + d * normal(&mut fam_rng)))
            .collect();
        cols.push_numeric(format!("{fam}1Dup"), dup);
        duplicate_pairs.push((format!("{fam}1"), format!("{fam}1Dup")));
    }

    let mut dem_rng = rng_from_seed(derive_seed(spec.seed, tag::DEMOGRAPHICS));
    for (name, cats) in DEMOGRAPHICS {
        // fixed unequal category frequencies, heaviest first
        let weights: Vec<f64> = (0..cats.len()).map(|c| 1.0 / (c as f64 + 1.5)).collect();
        let total: f64 = weights.iter().sum();
        let cells = (0..n)
            .map(|_| {
                let mut u = dem_rng.random::<f64>() * total;
                let mut c = cats.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        c = i;
                        break;
                    }
                    u -= w;
                }
                Cell::Cat(c as u32)
            })
            .collect();
        let i = cols.attributes.len();
        cols.attributes.push(AttributeDescriptor::categorical(
            name,
            cats.iter().map(|s| s.to_string()).collect(),
            i,
        ));
        cols.columns.push(cells);
    }

    let mut survey_rng = rng_from_seed(derive_seed(spec.seed, tag::SURVEY));
    let n_survey = spec.n_attributes - spec.fixed_width();
    for j in 1..=n_survey {
        let v = (0..n).map(|_| 3.0 + normal(&mut survey_rng)).collect();
        cols.push_numeric(format!("Survey{j:02}"), v);
    }
    for (x, extra) in spec.extra_informative.iter().enumerate() {
        let k = INFORMATIVE.len() + x;
        cols.push_numeric(
            extra.name.clone(),
            draws.iter().map(|(z, _)| 50.0 + 10.0 * (z[k] + shift[k])).collect(),
        );
    }

    let mut miss_rng = rng_from_seed(derive_seed(spec.seed, tag::MISSING));
    let mut rows: Vec<Vec<Cell>> = (0..n).map(|_| Vec::with_capacity(cols.columns.len())).collect();
    for col in &cols.columns {
        for (row, &cell) in rows.iter_mut().zip(col) {
            let missing = spec.missing_rate > 0.0 && miss_rng.random::<f64>() < spec.missing_rate;
            row.push(if missing { Cell::Missing } else { cell });
        }
    }

    let placed = labels.iter().filter(|&&l| l == Label::Placed).count();
    let realized_bayes =
        100.0 * probs.iter().map(|&p| p.max(1.0 - p)).sum::<f64>() / n as f64;
    let ds = Dataset::new(
        DatasetMeta {
            name: spec.state.clone(),
            source: format!("synthetic seed {}", spec.seed),
        },
        cols.attributes,
        rows,
        labels,
    )?;
    let truth = GeneratorTruth {
        state: spec.state.clone(),
        seed: spec.seed,
        n_instances: n,
        coefficients: spec.informative_names().into_iter().zip(unit_w).collect(),
        signal_strength: beta,
        intercept: b,
        bayes_accuracy_pct: bayes,
        realized_bayes_accuracy_pct: realized_bayes,
        positive_rate_target: spec.positive_rate,
        realized_positive_rate: placed as f64 / n as f64,
        state_shift: shift,
        duplicate_pairs,
    };
    Ok((ds, truth))
}

/// Settings shared by every cohort of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub master_seed: u64,
    pub weights: [f64; 6],
    pub signal_strength: f64,
    pub positive_rate: f64,
    pub missing_rate: f64,
    pub n_attributes: usize,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            master_seed: 42,
            weights: DEFAULT_WEIGHTS,
            signal_strength: DEFAULT_SIGNAL,
            positive_rate: DEFAULT_POSITIVE_RATE,
            missing_rate: DEFAULT_MISSING_RATE,
            n_attributes: DEFAULT_ATTRIBUTES,
        }
    }
}

impl SuiteSpec {
    pub fn cohort_specs(&self) -> Vec<CohortSpec> {
        STATES
            .iter()
            .enumerate()
            .map(|(i, &(state, n))| CohortSpec {
                weights: self.weights,
                signal_strength: self.signal_strength,
                positive_rate: self.positive_rate,
                missing_rate: self.missing_rate,
                n_attributes: self.n_attributes,
                ..CohortSpec::new(state, n, derive_seed(self.master_seed, i as u64))
            })
            .collect()
    }
}

/// One cohort per state, seeds derived from the master seed.
pub fn state_suite(master_seed: u64, signal_strength: f64, positive_rate: f64) -> Result<Vec<(Dataset, GeneratorTruth)>> {
    generate_suite(
        &SuiteSpec {
            master_seed,
            signal_strength,
            positive_rate,
            ..SuiteSpec::default()
        },
        Execution::default(),
    )
}

pub fn generate_suite(spec: &SuiteSpec, exec: Execution) -> Result<Vec<(Dataset, GeneratorTruth)>> {
    let specs = spec.cohort_specs();
    exec.try_map(specs.len(), |i| generate_cohort(&specs[i]))
}

/// File-system friendly state name.
pub fn slug(state: &str) -> String {
    state
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Writes `<dir>/<slug>.csv` and `<dir>/<slug>.truth.json`.
pub fn write_cohort(dir: &Path, ds: &Dataset, truth: &GeneratorTruth) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| UpmError::io(dir, e))?;
    let stem = slug(ds.name());
    ds.save_csv(dir.join(format!("{stem}.csv")), DEFAULT_LABEL_COLUMN)?;
    let p = dir.join(format!("{stem}.truth.json"));
    std::fs::write(&p, serde_json::to_string_pretty(truth)?).map_err(|e| UpmError::io(&p, e))?;
    Ok(())
}
