//! The voting ensemble over the four base learners.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, ClassCounts, Dataset, Label};
use crate::error::{Result, UpmError};
use crate::exec::Execution;
use crate::learners::{
    self, Distribution, FeatureMatrix, ForestModel, KStarModel, TrainConfig, TreeModel,
};
use crate::preprocess::{self, AttributeClusterSet, PrepConfig, Prepared, Transform};
use crate::rng::{derive_seed, stream};

pub const MODEL_FORMAT: &str = "upm-model-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    #[default]
    AverageOfProbabilities,
    MajorityVote,
}

impl CombineRule {
    pub fn short_name(self) -> &'static str {
        match self {
            CombineRule::AverageOfProbabilities => "avg",
            CombineRule::MajorityVote => "majority",
        }
    }
}

impl fmt::Display for CombineRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for CombineRule {
    type Err = UpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "avg" | "average" | "average_of_probabilities" => Ok(CombineRule::AverageOfProbabilities),
            "majority" | "vote" | "majority_vote" => Ok(CombineRule::MajorityVote),
            other => Err(UpmError::Config(format!(
                "unknown combination rule {other:?} (expected avg or majority)"
            ))),
        }
    }
}

/// Base learner identifiers, in the order members are stored and reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    RandomTree,
    KStar,
    Cart,
    RandomForest,
}

impl Member {
    pub const ALL: [Member; 4] = [
        Member::RandomTree,
        Member::KStar,
        Member::Cart,
        Member::RandomForest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Member::RandomTree => "random_tree",
            Member::KStar => "kstar",
            Member::Cart => "cart",
            Member::RandomForest => "random_forest",
        }
    }
}

impl FromStr for Member {
    type Err = UpmError;

    fn from_str(s: &str) -> Result<Self> {
        Member::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| UpmError::Config(format!("unknown learner {s:?}")))
    }
}

/// Everything needed to train the pipeline from raw data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub prep: PrepConfig,
    pub train: TrainConfig,
    pub rule: CombineRule,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            prep: PrepConfig::default(),
            train: TrainConfig::default(),
            rule: CombineRule::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.prep.clean.validate()?;
        if self.prep.cluster_k == Some(0) {
            return Err(UpmError::Config("cluster_k must be at least 1".into()));
        }
        self.train.validate()
    }

    /// Learner settings with the learners' seed derived from the master seed.
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train
        }
    }

    fn prep_seed(&self) -> u64 {
        derive_seed(self.seed, stream::CLUSTER)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Members {
    pub random_tree: TreeModel,
    pub kstar: KStarModel,
    pub cart: TreeModel,
    pub random_forest: ForestModel,
}

impl Members {
    /// Distributions in [`Member::ALL`] order for a transformed instance.
    pub fn distributions(&self, x: &[f64]) -> Result<[Distribution; 4]> {
        Ok([
            self.random_tree.predict(x)?,
            self.kstar.predict(x)?,
            self.cart.predict(x)?,
            self.random_forest.predict(x)?,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub seed: u64,
    pub config: PipelineConfig,
    /// Majority class of the training data; last resort for ties.
    pub majority: Label,
    pub class_counts: ClassCounts,
    pub n_train: usize,
}

/// A trained model: preprocessing transform, four members and the vote rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format: String,
    pub transform: Transform,
    pub clusters: Option<AttributeClusterSet>,
    pub members: Members,
    pub rule: CombineRule,
    pub meta: EnsembleMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedPrediction {
    pub class: Label,
    pub distribution: Distribution,
    pub members: [(Member, Distribution); 4],
}

/// Sum of four values in an order that does not depend on their positions.
fn order_free_sum(mut v: [f64; 4]) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Combines four member distributions.
///
/// Average rule: the mean distribution, decided by its argmax. Majority rule:
/// each member votes for its argmax (exact ties vote Placed) and the output
/// distribution holds the vote shares. A tie in either rule goes to the class
/// with more member votes, then to the class with the higher mean
/// probability, then to `tie_fallback`.
pub fn combine(dists: &[Distribution; 4], rule: CombineRule, tie_fallback: Label) -> (Label, Distribution) {
    let mean = [
        order_free_sum(dists.map(|d| d[0])) / 4.0,
        order_free_sum(dists.map(|d| d[1])) / 4.0,
    ];
    let placed_votes = dists
        .iter()
        .filter(|d| learners::argmax(d) == Label::Placed)
        .count();
    let votes = [placed_votes as f64, (4 - placed_votes) as f64];
    let decide = |primary: [f64; 2], chain: &[[f64; 2]]| -> Label {
        for d in std::iter::once(&primary).chain(chain) {
            if d[0] > d[1] {
                return Label::Placed;
            }
            if d[1] > d[0] {
                return Label::Unplaced;
            }
        }
        tie_fallback
    };
    match rule {
        CombineRule::AverageOfProbabilities => (decide(mean, &[votes]), mean),
        CombineRule::MajorityVote => {
            let share = [votes[0] / 4.0, votes[1] / 4.0];
            (decide(votes, &[mean]), share)
        }
    }
}

fn member_err(member: Member) -> impl FnOnce(UpmError) -> UpmError {
    move |e| UpmError::Member {
        member: member.as_str(),
        source: Box::new(e),
    }
}

/// Trains the four members on already transformed data.
pub fn train_members(data: &Dataset, cfg: &PipelineConfig) -> Result<Members> {
    let m = FeatureMatrix::from_dataset(data)?;
    let tc = cfg.train_config();
    Ok(Members {
        random_tree: learners::train_random_tree_matrix(&m, &tc)
            .map_err(member_err(Member::RandomTree))?,
        kstar: learners::train_kstar_matrix(&m, &tc).map_err(member_err(Member::KStar))?,
        cart: learners::train_cart_matrix(&m, &tc).map_err(member_err(Member::Cart))?,
        random_forest: learners::train_random_forest_matrix(&m, &tc)
            .map_err(member_err(Member::RandomForest))?,
    })
}

fn require_both_classes(ds: &Dataset) -> Result<ClassCounts> {
    let counts = ds.class_distribution();
    if !counts.both_present() {
        return Err(UpmError::InvalidData(format!(
            "{}: training data must contain both classes (Placed {}, Unplaced {})",
            ds.name(),
            counts.placed,
            counts.unplaced
        )));
    }
    Ok(counts)
}

/// Phase 1 for a pipeline config.
pub fn prepare(ds_raw: &Dataset, cfg: &PipelineConfig) -> Result<Prepared> {
    preprocess::preprocess(ds_raw, &cfg.prep, cfg.prep_seed(), cfg.train.exec)
}

/// clean → cluster → select, then all four learners.
pub fn train_upm(ds_raw: &Dataset, cfg: &PipelineConfig) -> Result<EnsembleModel> {
    cfg.validate()?;
    require_both_classes(ds_raw)?;
    let prepared = prepare(ds_raw, cfg)?;
    train_upm_prepared(prepared, cfg)
}

/// Trains the members on the output of [`prepare`].
pub fn train_upm_prepared(prepared: Prepared, cfg: &PipelineConfig) -> Result<EnsembleModel> {
    cfg.validate()?;
    let counts = require_both_classes(&prepared.data)?;
    let members = train_members(&prepared.data, cfg)?;
    Ok(EnsembleModel {
        format: MODEL_FORMAT.to_string(),
        transform: prepared.transform,
        clusters: prepared.clusters,
        members,
        rule: cfg.rule,
        meta: EnsembleMeta {
            seed: cfg.seed,
            config: *cfg,
            majority: counts.majority(),
            class_counts: counts,
            n_train: prepared.data.n_rows(),
        },
    })
}

pub(crate) fn cells_to_features(cells: &[Cell]) -> Vec<f64> {
    cells
        .iter()
        .map(|c| c.as_f64().expect("transformed rows are complete"))
        .collect()
}

impl EnsembleModel {
    /// Prediction for an instance already in the transformed schema.
    pub fn predict_transformed(&self, x: &[f64]) -> Result<CombinedPrediction> {
        let d = self.members.distributions(x)?;
        let (class, distribution) = combine(&d, self.rule, self.meta.majority);
        Ok(CombinedPrediction {
            class,
            distribution,
            members: [
                (Member::RandomTree, d[0]),
                (Member::KStar, d[1]),
                (Member::Cart, d[2]),
                (Member::RandomForest, d[3]),
            ],
        })
    }

    /// Applies the stored transform to a raw-schema row and predicts it.
    pub fn predict(&self, x_raw: &[Cell]) -> Result<CombinedPrediction> {
        let cells = self.transform.apply_row(x_raw)?;
        self.predict_transformed(&cells_to_features(&cells))
    }

    /// Predicts every row of a raw-schema dataset.
    pub fn predict_dataset(&self, ds_raw: &Dataset, exec: Execution) -> Result<Vec<CombinedPrediction>> {
        let t = self.transform.apply(ds_raw)?;
        let m = FeatureMatrix::from_dataset(&t)?;
        exec.try_map(m.n_rows(), |i| self.predict_transformed(m.row(i)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: EnsembleModel = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT {
            return Err(UpmError::SchemaMismatch(format!(
                "unsupported model format {:?}",
                m.format
            )));
        }
        Ok(m)
    }
}

/// Standalone form of [`EnsembleModel::predict`].
pub fn predict(m: &EnsembleModel, x_raw: &[Cell]) -> Result<CombinedPrediction> {
    m.predict(x_raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const AVG: CombineRule = CombineRule::AverageOfProbabilities;
    const MAJ: CombineRule = CombineRule::MajorityVote;

    #[test]
    fn unanimous_identical_members() {
        let d = [0.3, 0.7];
        for rule in [AVG, MAJ] {
            let (c, _) = combine(&[d; 4], rule, Label::Placed);
            assert_eq!(c, Label::Unplaced);
        }
        assert_eq!(combine(&[d; 4], AVG, Label::Placed).1, d);
    }

    #[test]
    fn average_rule_arithmetic() {
        let ds = [[0.9, 0.1], [0.6, 0.4], [0.4, 0.6], [0.3, 0.7]];
        let (c, d) = combine(&ds, AVG, Label::Unplaced);
        assert_eq!(c, Label::Placed);
        assert!((d[0] - 0.55).abs() < 1e-15 && (d[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn majority_two_two_uses_mean_then_fallback() {
        let ds = [[0.52, 0.48], [0.54, 0.46], [0.49, 0.51], [0.49, 0.51]];
        // votes P,P,U,U; mean P-side 0.51
        let (c, d) = combine(&ds, MAJ, Label::Unplaced);
        assert_eq!(c, Label::Placed);
        assert_eq!(d, [0.5, 0.5]);
        let tied = [[0.6, 0.4], [0.6, 0.4], [0.4, 0.6], [0.4, 0.6]];
        assert_eq!(combine(&tied, MAJ, Label::Unplaced).0, Label::Unplaced);
        assert_eq!(combine(&tied, MAJ, Label::Placed).0, Label::Placed);
    }

    #[test]
    fn majority_three_one_by_count() {
        let ds = [[0.51, 0.49], [0.51, 0.49], [0.51, 0.49], [0.0, 1.0]];
        assert_eq!(combine(&ds, MAJ, Label::Unplaced), (Label::Placed, [0.75, 0.25]));
        // the average rule disagrees here
        assert_eq!(combine(&ds, AVG, Label::Placed).0, Label::Unplaced);
    }

    #[test]
    fn rule_parsing() {
        assert_eq!("avg".parse::<CombineRule>().unwrap(), AVG);
        assert_eq!("majority".parse::<CombineRule>().unwrap(), MAJ);
        assert!("mean".parse::<CombineRule>().is_err());
    }

    fn dist() -> impl Strategy<Value = Distribution> {
        prop_oneof![
            (0.0f64..=1.0).prop_map(|p| [p, 1.0 - p]),
            prop::sample::select(vec![[0.5, 0.5], [1.0, 0.0], [0.0, 1.0], [0.25, 0.75]]),
        ]
    }

    proptest! {
        #[test]
        fn permutation_invariant(ds in prop::array::uniform4(dist()), perm in Just([0usize,1,2,3]).prop_shuffle(), fb in 0usize..2) {
            let fb = Label::from_index(fb);
            let shuffled = [ds[perm[0]], ds[perm[1]], ds[perm[2]], ds[perm[3]]];
            for rule in [AVG, MAJ] {
                prop_assert_eq!(combine(&ds, rule, fb), combine(&shuffled, rule, fb));
            }
        }

        #[test]
        fn unanimity(ps in prop::array::uniform4(0.5f64..=1.0), unplaced in any::<bool>(), fb in 0usize..2) {
            let ds = if unplaced {
                ps.map(|p| if p == 0.5 { [0.4, 0.6] } else { [1.0 - p, p] })
            } else {
                ps.map(|p| [p, 1.0 - p])
            };
            let first = learners::argmax(&ds[0]);
            prop_assert!(ds.iter().all(|d| learners::argmax(d) == first));
            for rule in [AVG, MAJ] {
                prop_assert_eq!(combine(&ds, rule, Label::from_index(fb)).0, first);
            }
        }

        #[test]
        fn average_in_convex_hull(ds in prop::array::uniform4(dist())) {
            let (_, d) = combine(&ds, AVG, Label::Placed);
            let lo = ds.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
            let hi = ds.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(d[0] >= lo - 1e-15 && d[0] <= hi + 1e-15);
            prop_assert!((d[0] + d[1] - 1.0).abs() < 1e-12);
        }
    }
}
