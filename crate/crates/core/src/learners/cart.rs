//! Simple CART: full Gini growth followed by minimal cost-complexity pruning
//! with the complexity parameter chosen by internal cross-validation.

use crate::data::Label;
use crate::folds::stratified_kfold_labels;
use crate::rng::{derive_seed, stream};

use super::config::CartConfig;
use super::grow::{grow, GrowParams};
use super::matrix::FeatureMatrix;
use super::tree::{argmax, distribution_of, Node, PruningInfo};

/// Relative slack when comparing link strengths.
const ALPHA_EPS: f64 = 1e-12;

/// Misclassified training instances if `counts` were a leaf.
fn leaf_errors(counts: [u32; 2]) -> f64 {
    let pred = argmax(&distribution_of(counts));
    (counts[0] + counts[1] - counts[pred.index()]) as f64
}

/// Nested cost-complexity sequence of a grown tree.
///
/// `collapse_step[t]` is the index `k` of the first subtree `T_k` in which
/// internal node `t` is a leaf (`usize::MAX` for leaves of the grown tree).
/// `alphas[k]` is the complexity parameter at which `T_k` becomes optimal, in
/// units of training error rate per leaf.
#[derive(Debug, Clone)]
pub(crate) struct PruneSequence {
    pub alphas: Vec<f64>,
    pub collapse_step: Vec<usize>,
}

impl PruneSequence {
    pub(crate) fn build(nodes: &[Node], n_train: usize) -> PruneSequence {
        let n = nodes.len();
        let mut collapse_step = vec![usize::MAX; n];
        let mut alphas = Vec::new();
        let scale = n_train.max(1) as f64;
        let mut step = 0usize;
        loop {
            // (subtree errors, subtree leaves) of the current tree, bottom-up
            let mut sub = vec![(0.0f64, 0usize); n];
            let mut best = f64::INFINITY;
            let mut links = Vec::new();
            let active = active_nodes(nodes, &collapse_step);
            for t in (0..n).rev() {
                if !active[t] {
                    continue;
                }
                match &nodes[t] {
                    Node::Split {
                        left,
                        right,
                        counts,
                        ..
                    } if collapse_step[t] == usize::MAX => {
                        let (el, ll) = sub[*left];
                        let (er, lr) = sub[*right];
                        sub[t] = (el + er, ll + lr);
                        let g = (leaf_errors(*counts) - sub[t].0) / scale / (sub[t].1 - 1) as f64;
                        links.push((t, g));
                        best = best.min(g);
                    }
                    node => sub[t] = (leaf_errors(node.counts()), 1),
                }
            }
            if step == 0 {
                // T_0: drop splits that do not reduce training error
                alphas.push(0.0);
                for &(t, g) in &links {
                    if g <= ALPHA_EPS {
                        collapse_step[t] = 0;
                    }
                }
                step = 1;
                continue;
            }
            if links.is_empty() {
                break;
            }
            alphas.push(best.max(*alphas.last().unwrap()));
            let cut = best + ALPHA_EPS * best.abs().max(1.0 / scale);
            for &(t, g) in &links {
                if g <= cut {
                    collapse_step[t] = step;
                }
            }
            step += 1;
        }
        PruneSequence {
            alphas,
            collapse_step,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.alphas.len()
    }

    /// Largest `k` with `alphas[k] <= alpha`.
    pub(crate) fn index_for(&self, alpha: f64) -> usize {
        self.alphas
            .iter()
            .rposition(|&a| a <= alpha * (1.0 + ALPHA_EPS) + ALPHA_EPS * 1e-3)
            .unwrap_or(0)
    }

    /// Class distribution that subtree `T_k` assigns to `x`.
    pub(crate) fn predict(&self, nodes: &[Node], k: usize, x: &[f64]) -> Label {
        let mut t = 0;
        loop {
            match &nodes[t] {
                Node::Split {
                    predicate,
                    left,
                    right,
                    ..
                } if self.collapse_step[t] > k => {
                    t = if predicate.test(x) { *left } else { *right };
                }
                node => return argmax(&distribution_of(node.counts())),
            }
        }
    }

    /// Copies `T_k` into a fresh preorder arena.
    pub(crate) fn materialize(&self, nodes: &[Node], k: usize) -> Vec<Node> {
        let mut out = Vec::new();
        self.copy(nodes, k, 0, &mut out);
        out
    }

    fn copy(&self, nodes: &[Node], k: usize, t: usize, out: &mut Vec<Node>) -> usize {
        let id = out.len();
        match &nodes[t] {
            Node::Split {
                predicate,
                left,
                right,
                counts,
            } if self.collapse_step[t] > k => {
                out.push(Node::leaf(*counts));
                let l = self.copy(nodes, k, *left, out);
                let r = self.copy(nodes, k, *right, out);
                out[id] = Node::Split {
                    predicate: predicate.clone(),
                    left: l,
                    right: r,
                    counts: *counts,
                };
            }
            node => out.push(Node::leaf(node.counts())),
        }
        id
    }
}

/// Nodes reachable from the root without passing a collapsed split.
fn active_nodes(nodes: &[Node], collapse_step: &[usize]) -> Vec<bool> {
    let mut active = vec![false; nodes.len()];
    active[0] = true;
    // preorder arena: parents precede children
    for t in 0..nodes.len() {
        if let Node::Split { left, right, .. } = &nodes[t] {
            if active[t] && collapse_step[t] == usize::MAX {
                active[*left] = true;
                active[*right] = true;
            }
        }
    }
    active
}

pub(crate) struct CartFit {
    pub nodes: Vec<Node>,
    pub pruning: Option<PruningInfo>,
}

fn grow_full(m: &FeatureMatrix, rows: &[usize], cfg: &CartConfig) -> Vec<Node> {
    grow(
        m,
        rows,
        GrowParams {
            min_leaf: cfg.min_leaf,
            attrs_per_node: None,
        },
        &mut None,
    )
}

/// Grows and (optionally) prunes a CART tree on all rows of `m`.
pub(crate) fn fit_cart(m: &FeatureMatrix, cfg: &CartConfig, seed: u64) -> CartFit {
    let all: Vec<usize> = (0..m.n_rows()).collect();
    let grown = grow_full(m, &all, cfg);
    let grown_leaves = grown.iter().filter(|n| n.is_leaf()).count();
    if !cfg.prune || m.n_rows() < cfg.prune_folds || grown.len() == 1 {
        return CartFit {
            nodes: grown,
            pruning: None,
        };
    }
    let seq = PruneSequence::build(&grown, m.n_rows());
    let plan = match stratified_kfold_labels(
        m.labels(),
        cfg.prune_folds,
        derive_seed(seed, stream::PRUNE_FOLDS),
    ) {
        Ok(p) => p,
        Err(_) => {
            return CartFit {
                nodes: grown,
                pruning: None,
            }
        }
    };
    // geometric midpoints of consecutive alphas represent each interval
    let betas: Vec<f64> = (0..seq.len())
        .map(|k| {
            if k + 1 < seq.len() {
                (seq.alphas[k] * seq.alphas[k + 1]).sqrt()
            } else {
                seq.alphas[k]
            }
        })
        .collect();
    let mut errors = vec![0usize; seq.len()];
    for f in 0..plan.k {
        let (train, test) = plan.split(f);
        let nodes = grow_full(m, &train, cfg);
        let fseq = PruneSequence::build(&nodes, train.len());
        for (k, &beta) in betas.iter().enumerate() {
            let j = fseq.index_for(beta);
            errors[k] += test
                .iter()
                .filter(|&&i| fseq.predict(&nodes, j, m.row(i)) != m.label(i))
                .count();
        }
    }
    let n = m.n_rows() as f64;
    let cv: Vec<f64> = errors.iter().map(|&e| e as f64 / n).collect();
    let (mut kmin, mut rmin) = (0, f64::INFINITY);
    for (k, &r) in cv.iter().enumerate() {
        if r <= rmin {
            kmin = k;
            rmin = r;
        }
    }
    let selected = if cfg.one_se_rule {
        let se = (rmin * (1.0 - rmin) / n).sqrt();
        (0..cv.len())
            .rev()
            .find(|&k| cv[k] <= rmin + se + 1e-12)
            .unwrap_or(kmin)
    } else {
        kmin
    };
    CartFit {
        nodes: seq.materialize(&grown, selected),
        pruning: Some(PruningInfo {
            alpha: seq.alphas[selected],
            alphas: seq.alphas.clone(),
            cv_errors: cv,
            selected,
            grown_leaves,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::matrix::FeatureKind;

    fn matrix(xs: &[f64], labels: &[usize]) -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["x".into()],
            vec![FeatureKind::Numeric],
            xs.iter().map(|&x| vec![x]).collect(),
            labels.iter().map(|&l| Label::from_index(l)).collect(),
        )
        .unwrap()
    }

    /// Nested subtree check: every leaf of T_{k+1} is a node of T_k.
    #[test]
    fn sequence_is_nested_and_non_decreasing() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let labels: Vec<usize> = (0..40).map(|i| ((i * 7 + i / 3) % 5 == 0) as usize).collect();
        let m = matrix(&xs, &labels);
        let cfg = CartConfig {
            min_leaf: 1,
            ..CartConfig::default()
        };
        let nodes = grow_full(&m, &(0..40).collect::<Vec<_>>(), &cfg);
        let seq = PruneSequence::build(&nodes, 40);
        assert!(seq.alphas.windows(2).all(|w| w[0] <= w[1]));
        let last = seq.materialize(&nodes, seq.len() - 1);
        assert_eq!(last.len(), 1);
        let mut prev_leaves = usize::MAX;
        for k in 0..seq.len() {
            let leaves = seq.materialize(&nodes, k).iter().filter(|n| n.is_leaf()).count();
            assert!(leaves < prev_leaves || k == 0);
            prev_leaves = leaves;
        }
    }

    #[test]
    fn weakest_link_values_by_hand() {
        // root [4,4] -> left [4,1] (pure children [4,0],[0,1]), right [0,3]
        use super::super::tree::{SplitKind, SplitPredicate};
        let split = |t: f64| SplitPredicate {
            attribute: 0,
            kind: SplitKind::NumericLe { threshold: t },
        };
        let nodes = vec![
            Node::Split {
                predicate: split(5.0),
                left: 1,
                right: 4,
                counts: [4, 4],
            },
            Node::Split {
                predicate: split(3.0),
                left: 2,
                right: 3,
                counts: [4, 1],
            },
            Node::leaf([4, 0]),
            Node::leaf([0, 1]),
            Node::leaf([0, 3]),
        ];
        let seq = PruneSequence::build(&nodes, 8);
        // g(node1) = (1 - 0)/8/1 = 0.125, then g(root) = (4 - 1)/8/1 = 0.375
        assert_eq!(seq.alphas, vec![0.0, 0.125, 0.375]);
        assert_eq!(seq.collapse_step[1], 1);
        assert_eq!(seq.collapse_step[0], 2);
        assert_eq!(seq.index_for(0.2), 1);
        assert_eq!(seq.index_for(0.5), 2);
    }

    #[test]
    fn pruning_removes_noise_splits() {
        // clean threshold at 50 with a few flipped labels
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let labels: Vec<usize> = (0..100)
            .map(|i| {
                let base = (i >= 50) as usize;
                if i % 17 == 3 {
                    1 - base
                } else {
                    base
                }
            })
            .collect();
        let m = matrix(&xs, &labels);
        let fit = fit_cart(&m, &CartConfig::default(), 9);
        let info = fit.pruning.unwrap();
        let leaves = fit.nodes.iter().filter(|n| n.is_leaf()).count();
        assert!(leaves < info.grown_leaves);
        assert!(leaves >= 2);
    }
}
