use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UpmError};
use crate::exec::Execution;
use crate::rng::{derive_seed, rng_from_seed};

use super::config::TrainConfig;
use super::grow::{grow, GrowParams};
use super::matrix::{FeatureKind, FeatureMatrix};
use super::tree::{Algorithm, Distribution, TreeModel};

/// Bagged random trees whose leaf distributions are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Seed of each member; member `i` draws its resample and attribute
    /// samples from this stream alone.
    pub seeds: Vec<u64>,
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    pub fn features(&self) -> &[FeatureKind] {
        &self.trees[0].features
    }

    pub fn predict(&self, x: &[f64]) -> Result<Distribution> {
        if x.len() != self.features().len() {
            return Err(UpmError::SchemaMismatch(format!(
                "instance has {} features, forest expects {}",
                x.len(),
                self.features().len()
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Distribution {
        let mut acc = [0.0; 2];
        for t in &self.trees {
            let d = t.predict_unchecked(x);
            acc[0] += d[0];
            acc[1] += d[1];
        }
        let n = self.trees.len() as f64;
        let p0 = acc[0] / n;
        [p0, 1.0 - p0]
    }
}

/// One random tree on the rows of `m` (or a bootstrap resample of them)
/// drawn entirely from `seed`.
pub fn random_tree_seeded(
    m: &FeatureMatrix,
    cfg: &TrainConfig,
    seed: u64,
    bootstrap: bool,
) -> TreeModel {
    let mut rng = rng_from_seed(seed);
    let n = m.n_rows();
    let rows: Vec<usize> = if bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let params = GrowParams {
        min_leaf: cfg.rtree.min_leaf,
        attrs_per_node: Some(cfg.rtree.attrs_for(m.n_features())),
    };
    let nodes = grow(m, &rows, params, &mut Some(&mut rng));
    TreeModel::from_nodes(m.kinds.clone(), nodes, Algorithm::RandomTree, seed)
}

pub(crate) fn fit_forest(
    m: &FeatureMatrix,
    cfg: &TrainConfig,
    master: u64,
    exec: Execution,
) -> ForestModel {
    let n_trees = cfg.forest.n_trees;
    let seeds: Vec<u64> = (0..n_trees).map(|i| derive_seed(master, i as u64)).collect();
    let trees = exec.map(n_trees, |i| {
        random_tree_seeded(m, cfg, seeds[i], cfg.forest.bootstrap)
    });
    ForestModel {
        n_trees,
        bootstrap: cfg.forest.bootstrap,
        seeds,
        trees,
    }
}
