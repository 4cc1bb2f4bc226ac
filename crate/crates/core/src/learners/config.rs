use serde::{Deserialize, Serialize};

use crate::error::{Result, UpmError};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartConfig {
    pub min_leaf: usize,
    /// Minimal cost-complexity pruning with internal cross-validation.
    pub prune: bool,
    pub prune_folds: usize,
    pub one_se_rule: bool,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            min_leaf: 2,
            prune: true,
            prune_folds: 5,
            one_se_rule: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomTreeConfig {
    /// Attributes sampled per node; `None` means `floor(log2 A) + 1`.
    pub k_attrs: Option<usize>,
    pub min_leaf: usize,
}

impl Default for RandomTreeConfig {
    fn default() -> Self {
        RandomTreeConfig {
            k_attrs: None,
            min_leaf: 1,
        }
    }
}

impl RandomTreeConfig {
    pub fn attrs_for(&self, n_features: usize) -> usize {
        let default = (usize::BITS - 1 - n_features.max(1).leading_zeros()) as usize + 1;
        self.k_attrs.unwrap_or(default).clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Resample each member's training set with replacement.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStarConfig {
    /// Blend percentage in (0, 100].
    pub blend: f64,
}

impl Default for KStarConfig {
    fn default() -> Self {
        KStarConfig { blend: 20.0 }
    }
}

/// Hyperparameters for the four base learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub cart: CartConfig,
    pub rtree: RandomTreeConfig,
    pub forest: ForestConfig,
    pub kstar: KStarConfig,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 1,
            cart: CartConfig::default(),
            rtree: RandomTreeConfig::default(),
            forest: ForestConfig::default(),
            kstar: KStarConfig::default(),
            exec: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(UpmError::Config(format!("{what} must be at least 1")));
        if self.cart.min_leaf == 0 {
            return bad("cart.min_leaf");
        }
        if self.cart.prune && self.cart.prune_folds < 2 {
            return Err(UpmError::Config("cart.prune_folds must be at least 2".into()));
        }
        if self.rtree.min_leaf == 0 {
            return bad("rtree.min_leaf");
        }
        if self.rtree.k_attrs == Some(0) {
            return bad("rtree.k_attrs");
        }
        if self.forest.n_trees == 0 {
            return bad("forest.n_trees");
        }
        if !(self.kstar.blend > 0.0 && self.kstar.blend <= 100.0) {
            return Err(UpmError::Config(format!(
                "kstar.blend {} outside (0, 100]",
                self.kstar.blend
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_attribute_sample() {
        let c = RandomTreeConfig::default();
        assert_eq!(c.attrs_for(1), 1);
        assert_eq!(c.attrs_for(2), 2);
        assert_eq!(c.attrs_for(12), 4);
        assert_eq!(c.attrs_for(16), 5);
        assert_eq!(c.attrs_for(150), 8);
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = TrainConfig::default();
        c.kstar.blend = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.forest.n_trees = 0;
        assert!(c.validate().is_err());
    }
}
