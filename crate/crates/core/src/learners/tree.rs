use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Result, UpmError};

use super::matrix::FeatureKind;

/// Class probabilities `[P(Placed), P(Unplaced)]`.
pub type Distribution = [f64; 2];

/// Most probable class; exact ties go to `Placed`.
pub fn argmax(d: &Distribution) -> Label {
    if d[1] > d[0] {
        Label::Unplaced
    } else {
        Label::Placed
    }
}

pub(crate) fn distribution_of(counts: [u32; 2]) -> Distribution {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return [0.5, 0.5];
    }
    [counts[0] as f64 / n, counts[1] as f64 / n]
}

/// Gini impurity `1 - sum p_i^2` of a class-count vector.
pub fn gini(class_counts: &[f64]) -> Result<f64> {
    let total: f64 = class_counts.iter().sum();
    if class_counts.iter().any(|&c| c < 0.0) {
        return Err(UpmError::InvalidArgument("negative class count".into()));
    }
    if total <= 0.0 {
        return Err(UpmError::InvalidArgument("gini of an empty node".into()));
    }
    Ok(1.0 - class_counts.iter().map(|c| (c / total).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum SplitKind {
    /// `x <= threshold` goes left.
    NumericLe { threshold: f64 },
    /// Category in the set goes left.
    CategoricalIn { categories: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPredicate {
    pub attribute: usize,
    #[serde(flatten)]
    pub kind: SplitKind,
}

impl SplitPredicate {
    #[inline]
    pub fn test(&self, x: &[f64]) -> bool {
        let v = x[self.attribute];
        match &self.kind {
            SplitKind::NumericLe { threshold } => v <= *threshold,
            SplitKind::CategoricalIn { categories } => categories.contains(&(v as u32)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        counts: [u32; 2],
        distribution: Distribution,
    },
    Split {
        predicate: SplitPredicate,
        left: usize,
        right: usize,
        counts: [u32; 2],
    },
}

impl Node {
    pub fn counts(&self) -> [u32; 2] {
        match self {
            Node::Leaf { counts, .. } | Node::Split { counts, .. } => *counts,
        }
    }

    pub fn leaf(counts: [u32; 2]) -> Node {
        Node::Leaf {
            counts,
            distribution: distribution_of(counts),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cart,
    RandomTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningInfo {
    /// Complexity parameter of the selected subtree.
    pub alpha: f64,
    /// The alpha sequence of the grown tree.
    pub alphas: Vec<f64>,
    /// Cross-validated error rate per alpha.
    pub cv_errors: Vec<f64>,
    pub selected: usize,
    pub grown_leaves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMeta {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub depth: usize,
    pub leaf_count: usize,
    pub pruning: Option<PruningInfo>,
}

/// Binary classification tree stored as a preorder node arena (root at 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub features: Vec<FeatureKind>,
    pub nodes: Vec<Node>,
    pub meta: TreeMeta,
}

impl TreeModel {
    pub(crate) fn from_nodes(
        features: Vec<FeatureKind>,
        nodes: Vec<Node>,
        algorithm: Algorithm,
        seed: u64,
    ) -> TreeModel {
        let depth = depth_of(&nodes, 0);
        let leaf_count = nodes.iter().filter(|n| n.is_leaf()).count();
        TreeModel {
            features,
            nodes,
            meta: TreeMeta {
                algorithm,
                seed,
                depth,
                leaf_count,
                pruning: None,
            },
        }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Index of the leaf that `x` reaches.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    predicate,
                    left,
                    right,
                    ..
                } => i = if predicate.test(x) { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Distribution> {
        if x.len() != self.features.len() {
            return Err(UpmError::SchemaMismatch(format!(
                "instance has {} features, tree expects {}",
                x.len(),
                self.features.len()
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Distribution {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { distribution, .. } => *distribution,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.meta.leaf_count
    }

    pub fn depth(&self) -> usize {
        self.meta.depth
    }
}

fn depth_of(nodes: &[Node], i: usize) -> usize {
    match &nodes[i] {
        Node::Leaf { .. } => 0,
        Node::Split { left, right, .. } => 1 + depth_of(nodes, *left).max(depth_of(nodes, *right)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5.0, 5.0]).unwrap(), 0.5);
        assert_eq!(gini(&[10.0, 0.0]).unwrap(), 0.0);
        // 1 - (9/16 + 1/16)
        assert_eq!(gini(&[3.0, 1.0]).unwrap(), 0.375);
        assert!(gini(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn routing_depth_one() {
        let nodes = vec![
            Node::Split {
                predicate: SplitPredicate {
                    attribute: 0,
                    kind: SplitKind::NumericLe { threshold: 0.5 },
                },
                left: 1,
                right: 2,
                counts: [3, 3],
            },
            Node::leaf([3, 0]),
            Node::leaf([0, 3]),
        ];
        let t = TreeModel::from_nodes(vec![FeatureKind::Numeric], nodes, Algorithm::Cart, 0);
        assert_eq!(t.predict(&[0.3]).unwrap(), [1.0, 0.0]);
        assert_eq!(t.predict(&[0.7]).unwrap(), [0.0, 1.0]);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.leaf_count(), 2);
        assert!(t.predict(&[0.3, 1.0]).is_err());
    }

    #[test]
    fn single_leaf_predicts_its_distribution() {
        let t = TreeModel::from_nodes(
            vec![FeatureKind::Numeric],
            vec![Node::leaf([1, 3])],
            Algorithm::RandomTree,
            0,
        );
        for x in [-5.0, 0.0, 9.0] {
            assert_eq!(t.predict(&[x]).unwrap(), [0.25, 0.75]);
        }
    }

    #[test]
    fn argmax_tie_goes_to_placed() {
        assert_eq!(argmax(&[0.5, 0.5]), Label::Placed);
        assert_eq!(argmax(&[0.4, 0.6]), Label::Unplaced);
    }
}
