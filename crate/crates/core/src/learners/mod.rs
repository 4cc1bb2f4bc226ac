//! The four base learners: Simple CART, Random Tree, Random Forest and K-Star.

mod cart;
mod config;
mod forest;
mod grow;
mod kstar;
mod matrix;
mod tree;

pub use config::{CartConfig, ForestConfig, KStarConfig, RandomTreeConfig, TrainConfig};
pub use forest::{random_tree_seeded, ForestModel};
pub use kstar::{AttributeFlag, KStarDiagnostics, KStarModel, N0_TOLERANCE};
pub use matrix::{FeatureKind, FeatureMatrix};
pub use tree::{
    argmax, gini, Algorithm, Distribution, Node, PruningInfo, SplitKind, SplitPredicate,
    TreeMeta, TreeModel,
};

use crate::data::Dataset;
use crate::error::{Result, UpmError};
use crate::rng::{derive_seed, stream};

/// Anything that maps an instance to a class distribution.
pub trait Classifier {
    fn distribution(&self, x: &[f64]) -> Result<Distribution>;
}

impl Classifier for TreeModel {
    fn distribution(&self, x: &[f64]) -> Result<Distribution> {
        self.predict(x)
    }
}

impl Classifier for ForestModel {
    fn distribution(&self, x: &[f64]) -> Result<Distribution> {
        self.predict(x)
    }
}

impl Classifier for KStarModel {
    fn distribution(&self, x: &[f64]) -> Result<Distribution> {
        self.predict(x)
    }
}

fn check_trainable(m: &FeatureMatrix) -> Result<()> {
    match m.n_rows() {
        0 => Err(UpmError::InvalidData("cannot train on an empty dataset".into())),
        1 => Err(UpmError::InvalidData("cannot train on a single instance".into())),
        _ => Ok(()),
    }
}

fn prepare(ds: &Dataset, cfg: &TrainConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let m = FeatureMatrix::from_dataset(ds)?;
    check_trainable(&m)?;
    Ok(m)
}

pub fn train_cart(ds: &Dataset, cfg: &TrainConfig) -> Result<TreeModel> {
    train_cart_matrix(&prepare(ds, cfg)?, cfg)
}

pub fn train_cart_matrix(m: &FeatureMatrix, cfg: &TrainConfig) -> Result<TreeModel> {
    check_trainable(m)?;
    let seed = derive_seed(cfg.seed, stream::CART);
    let fit = cart::fit_cart(m, &cfg.cart, seed);
    let mut t = TreeModel::from_nodes(m.kinds.clone(), fit.nodes, Algorithm::Cart, seed);
    t.meta.pruning = fit.pruning;
    Ok(t)
}

pub fn train_random_tree(ds: &Dataset, cfg: &TrainConfig) -> Result<TreeModel> {
    train_random_tree_matrix(&prepare(ds, cfg)?, cfg)
}

pub fn train_random_tree_matrix(m: &FeatureMatrix, cfg: &TrainConfig) -> Result<TreeModel> {
    check_trainable(m)?;
    let seed = derive_seed(cfg.seed, stream::RANDOM_TREE);
    Ok(random_tree_seeded(m, cfg, seed, false))
}

pub fn train_random_forest(ds: &Dataset, cfg: &TrainConfig) -> Result<ForestModel> {
    train_random_forest_matrix(&prepare(ds, cfg)?, cfg)
}

pub fn train_random_forest_matrix(m: &FeatureMatrix, cfg: &TrainConfig) -> Result<ForestModel> {
    check_trainable(m)?;
    let master = derive_seed(cfg.seed, stream::FOREST);
    Ok(forest::fit_forest(m, cfg, master, cfg.exec))
}

pub fn train_kstar(ds: &Dataset, cfg: &TrainConfig) -> Result<KStarModel> {
    train_kstar_matrix(&prepare(ds, cfg)?, cfg)
}

pub fn train_kstar_matrix(m: &FeatureMatrix, cfg: &TrainConfig) -> Result<KStarModel> {
    cfg.validate()?;
    kstar::fit_kstar(m, cfg.kstar.blend)
}

pub fn kstar_predict(m: &KStarModel, x: &[f64]) -> Result<Distribution> {
    m.predict(x)
}

/// Routes `x` through a tree, or averages it over a forest's members.
pub fn predict_tree<M: Classifier + ?Sized>(m: &M, x: &[f64]) -> Result<Distribution> {
    m.distribution(x)
}
