//! Unified prediction model for campus-placement outcomes.
//!
//! Pipeline: attribute-clustering preprocessing, a four-learner voting
//! ensemble (Random Tree, K-Star, Simple CART, Random Forest), tree-to-rule
//! extraction, stratified cross-validation and one-sample t statistics.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod folds;
pub mod learners;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod rules;
pub mod stats;
pub mod synth;

pub use data::{load_csv, read_csv, Cell, Dataset, Label, Schema};
pub use error::{Result, UpmError};
pub use exec::Execution;
