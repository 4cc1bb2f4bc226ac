use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{ClassCounts, Dataset, Label};
use crate::ensemble::{self, CombineRule, Member, PipelineConfig};
use crate::error::{Result, UpmError};
use crate::folds::{stratified_kfold, FoldPlan};
use crate::learners::{self, Classifier, Distribution, FeatureMatrix};
use crate::preprocess::Prepared;
use crate::rng::{derive_seed, stream};

use super::metrics::{accuracy, kappa, weighted_f1, ConfusionMatrix};

/// What each fold trains: the full ensemble or one base learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    Ensemble,
    Learner(Member),
}

impl std::str::FromStr for Target {
    type Err = UpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "upm" | "ensemble" => Ok(Target::Ensemble),
            other => other.parse::<Member>().map(Target::Learner),
        }
    }
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Ensemble => "upm",
            Target::Learner(m) => m.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub pipeline: PipelineConfig,
    pub folds: usize,
    /// Fit preprocessing once on the whole dataset instead of inside each fold.
    pub global_prep: bool,
    pub target: Target,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            pipeline: PipelineConfig::default(),
            folds: 10,
            global_prep: false,
            target: Target::Ensemble,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub index: usize,
    pub fold: usize,
    pub actual: Label,
    pub predicted: Label,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub test_classes: ClassCounts,
    pub confusion: ConfusionMatrix,
    pub accuracy_pct: f64,
    pub f1_weighted_pct: f64,
    pub kappa: f64,
    /// Attributes the fold's preprocessing kept.
    pub selected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub n: usize,
    pub target: String,
    pub rule: CombineRule,
    pub folds: usize,
    pub seed: u64,
    pub global_prep: bool,
    pub accuracy_pct: f64,
    pub f1_weighted_pct: f64,
    pub kappa: f64,
    pub confusion: ConfusionMatrix,
    pub class_counts: ClassCounts,
    pub fold_plan: FoldPlan,
    pub fold_reports: Vec<FoldReport>,
    pub predictions: Vec<InstancePrediction>,
    pub config: PipelineConfig,
}

pub const RESULTS_HEADER: &str = "state,accuracy_pct,f1_weighted_pct,kappa";

impl EvalReport {
    pub fn csv_row(&self) -> String {
        let name = if self.dataset.contains([',', '"', '\n']) {
            format!("\"{}\"", self.dataset.replace('"', "\"\""))
        } else {
            self.dataset.clone()
        };
        format!(
            "{},{},{},{}",
            name, self.accuracy_pct, self.f1_weighted_pct, self.kappa
        )
    }

    /// One-row CSV with header: state, accuracy, weighted F1, kappa.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{RESULTS_HEADER}");
        let _ = writeln!(s, "{}", self.csv_row());
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Model trained on one fold: the ensemble or a single member.
enum FoldModel {
    Ensemble(Box<ensemble::EnsembleModel>),
    Single(Box<dyn Classifier + Send + Sync>),
}

impl FoldModel {
    fn predict(&self, x: &[f64]) -> Result<(Label, Distribution)> {
        match self {
            FoldModel::Ensemble(m) => {
                let p = m.predict_transformed(x)?;
                Ok((p.class, p.distribution))
            }
            FoldModel::Single(c) => {
                let d = c.distribution(x)?;
                Ok((learners::argmax(&d), d))
            }
        }
    }
}

fn train_target(prepared: Prepared, cfg: &PipelineConfig, target: Target) -> Result<FoldModel> {
    let tc = learners::TrainConfig {
        seed: cfg.seed,
        ..cfg.train
    };
    let single = |m: Member| -> Result<FoldModel> {
        let x = FeatureMatrix::from_dataset(&prepared.data)?;
        let model: Box<dyn Classifier + Send + Sync> = match m {
            Member::RandomTree => Box::new(learners::train_random_tree_matrix(&x, &tc)?),
            Member::KStar => Box::new(learners::train_kstar_matrix(&x, &tc)?),
            Member::Cart => Box::new(learners::train_cart_matrix(&x, &tc)?),
            Member::RandomForest => Box::new(learners::train_random_forest_matrix(&x, &tc)?),
        };
        Ok(FoldModel::Single(model))
    };
    match target {
        Target::Ensemble => Ok(FoldModel::Ensemble(Box::new(
            ensemble::train_upm_prepared(prepared, cfg)?,
        ))),
        Target::Learner(m) => single(m),
    }
}

struct FoldOutcome {
    report: FoldReport,
    predictions: Vec<InstancePrediction>,
}

/// Stratified k-fold cross-validation with metrics on the pooled matrix.
pub fn cross_validate(ds_raw: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.pipeline.validate()?;
    let seed = cfg.pipeline.seed;
    let plan = stratified_kfold(ds_raw, cfg.folds, derive_seed(seed, stream::FOLDS))?;
    let global = if cfg.global_prep {
        Some(ensemble::prepare(ds_raw, &cfg.pipeline)?)
    } else {
        None
    };
    let exec = cfg.pipeline.train.exec;
    let outcomes = exec.try_map(plan.k, |f| -> Result<FoldOutcome> {
        let (train, test) = plan.split(f);
        let fold_seed = derive_seed(derive_seed(seed, stream::FOLD_PIPELINE), f as u64);
        let fold_cfg = PipelineConfig {
            seed: fold_seed,
            ..cfg.pipeline
        };
        let train_raw = ds_raw.subset(&train)?;
        if !train_raw.class_distribution().both_present() {
            return Err(UpmError::InvalidData(format!(
                "{}: fold {} has a single-class training split; use a larger dataset or fewer folds",
                ds_raw.name(),
                f
            )));
        }
        let (prepared, test_data) = match &global {
            Some(g) => (
                Prepared {
                    data: g.data.subset(&train)?,
                    transform: g.transform.clone(),
                    clusters: g.clusters.clone(),
                },
                g.data.subset(&test)?,
            ),
            None => {
                let p = ensemble::prepare(&train_raw, &fold_cfg)?;
                let t = p.transform.apply(&ds_raw.subset(&test)?)?;
                (p, t)
            }
        };
        let selected = prepared
            .data
            .attributes()
            .iter()
            .map(|a| a.name.clone())
            .collect();
        let n_train = prepared.data.n_rows();
        let model = train_target(prepared, &fold_cfg, cfg.target)?;
        let x = FeatureMatrix::from_dataset(&test_data)?;
        let mut cm = ConfusionMatrix::default();
        let mut predictions = Vec::with_capacity(test.len());
        for (r, &i) in test.iter().enumerate() {
            let (predicted, distribution) = model.predict(x.row(r))?;
            let actual = ds_raw.labels()[i];
            cm.record(actual, predicted);
            predictions.push(InstancePrediction {
                index: i,
                fold: f,
                actual,
                predicted,
                distribution,
            });
        }
        Ok(FoldOutcome {
            report: FoldReport {
                fold: f,
                seed: fold_seed,
                n_train,
                n_test: test.len(),
                test_classes: ClassCounts::from_labels(test_data.labels()),
                confusion: cm,
                accuracy_pct: accuracy(&cm)?,
                f1_weighted_pct: weighted_f1(&cm)?,
                kappa: kappa(&cm)?,
                selected,
            },
            predictions,
        })
    })?;
    let mut pooled = ConfusionMatrix::default();
    let mut predictions = Vec::with_capacity(ds_raw.n_rows());
    let mut fold_reports = Vec::with_capacity(plan.k);
    for o in outcomes {
        pooled = pooled.add(&o.report.confusion);
        predictions.extend(o.predictions);
        fold_reports.push(o.report);
    }
    predictions.sort_by_key(|p| p.index);
    Ok(EvalReport {
        dataset: ds_raw.name().to_string(),
        n: ds_raw.n_rows(),
        target: cfg.target.name().to_string(),
        rule: cfg.pipeline.rule,
        folds: plan.k,
        seed,
        global_prep: cfg.global_prep,
        accuracy_pct: accuracy(&pooled)?,
        f1_weighted_pct: weighted_f1(&pooled)?,
        kappa: kappa(&pooled)?,
        confusion: pooled,
        class_counts: ds_raw.class_distribution(),
        fold_plan: plan,
        fold_reports,
        predictions,
        config: cfg.pipeline,
    })
}
