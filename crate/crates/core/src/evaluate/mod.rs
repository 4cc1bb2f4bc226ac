//! Stratified cross-validation of the pipeline and its three indicators.

mod cv;
mod metrics;

pub use cv::{cross_validate, EvalConfig, EvalReport, FoldReport, InstancePrediction, Target, RESULTS_HEADER};
pub use metrics::{accuracy, kappa, weighted_f1, ConfusionMatrix};
