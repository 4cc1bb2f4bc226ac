//! Stratified k-fold planning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Result, UpmError};
use crate::rng::rng_from_seed;

/// Assignment of every instance to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// `(train, test)` instance indices for fold `f`, each ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignments.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    /// Per-fold counts of `label`.
    pub fn class_counts(&self, labels: &[Label], label: Label) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for (&a, &l) in self.assignments.iter().zip(labels) {
            if l == label {
                counts[a] += 1;
            }
        }
        counts
    }
}

/// Stratified plan over a label vector.
///
/// Each class is shuffled with the seeded generator, the classes are
/// concatenated (Placed first) and positions are dealt round-robin over the
/// folds. Totals and per-class counts therefore differ by at most one between
/// folds, and remainders land on the lowest-numbered folds.
pub fn stratified_kfold_labels(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(UpmError::InvalidArgument(format!(
            "fold count {k} must be in [2, {n}]"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut assignments = vec![0; n];
    let mut pos = 0usize;
    for class in Label::ALL {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    stratified_kfold_labels(ds.labels(), k, seed)
}
