//! Greedy Gini tree growth shared by CART, Random Tree and forest members.

use rand::seq::index::sample;

use crate::rng::UpmRng;

use super::matrix::{FeatureKind, FeatureMatrix};
use super::tree::{Node, SplitKind, SplitPredicate};

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub min_leaf: usize,
    /// Attributes sampled per node; `None` evaluates all of them.
    pub attrs_per_node: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub predicate: SplitPredicate,
    /// Decrease of `n * gini`, i.e. unnormalised impurity decrease.
    pub gain: f64,
}

/// `n * gini(counts)` for two classes.
#[inline]
fn weighted_impurity(c0: f64, c1: f64) -> f64 {
    let n = c0 + c1;
    if n == 0.0 {
        0.0
    } else {
        n - (c0 * c0 + c1 * c1) / n
    }
}

#[inline]
fn gain_tol(n: usize) -> f64 {
    1e-10 * n as f64
}

fn class_counts(m: &FeatureMatrix, rows: &[usize]) -> [u32; 2] {
    let mut c = [0u32; 2];
    for &i in rows {
        c[m.label(i).index()] += 1;
    }
    c
}

/// Best split over `attrs` (ascending). Gains within tolerance of the current
/// best keep the earlier candidate, so ties resolve to the lowest attribute
/// index and then the smallest threshold / category id. Zero-gain candidates
/// are returned too; the caller decides whether to accept them.
pub(crate) fn best_split(
    m: &FeatureMatrix,
    rows: &[usize],
    attrs: &[usize],
    min_leaf: usize,
) -> Option<Candidate> {
    let counts = class_counts(m, rows);
    let parent = weighted_impurity(counts[0] as f64, counts[1] as f64);
    let tol = gain_tol(rows.len());
    let n = rows.len();
    let mut best: Option<Candidate> = None;
    let mut consider = |pred: SplitPredicate, gain: f64| {
        let better = match &best {
            None => true,
            Some(b) => gain > b.gain + tol,
        };
        if better {
            best = Some(Candidate {
                predicate: pred,
                gain,
            });
        }
    };
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &j in attrs {
        match m.kinds[j] {
            FeatureKind::Numeric => {
                sorted.clear();
                sorted.extend(rows.iter().map(|&i| (m.value(i, j), m.label(i).index())));
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut left = [0.0f64; 2];
                for p in 1..n {
                    left[sorted[p - 1].1] += 1.0;
                    let (lo, hi) = (sorted[p - 1].0, sorted[p].0);
                    if lo == hi || p < min_leaf || n - p < min_leaf {
                        continue;
                    }
                    let right = [counts[0] as f64 - left[0], counts[1] as f64 - left[1]];
                    let gain = parent
                        - weighted_impurity(left[0], left[1])
                        - weighted_impurity(right[0], right[1]);
                    consider(
                        SplitPredicate {
                            attribute: j,
                            kind: SplitKind::NumericLe {
                                threshold: midpoint(lo, hi),
                            },
                        },
                        gain,
                    );
                }
            }
            FeatureKind::Categorical { n_categories } => {
                let c = n_categories as usize;
                let mut per = vec![[0.0f64; 2]; c];
                for &i in rows {
                    per[m.value(i, j) as usize][m.label(i).index()] += 1.0;
                }
                for (cat, left) in per.iter().enumerate() {
                    let size = (left[0] + left[1]) as usize;
                    if size < min_leaf || n - size < min_leaf || size == 0 || size == n {
                        continue;
                    }
                    let right = [counts[0] as f64 - left[0], counts[1] as f64 - left[1]];
                    let gain = parent
                        - weighted_impurity(left[0], left[1])
                        - weighted_impurity(right[0], right[1]);
                    consider(
                        SplitPredicate {
                            attribute: j,
                            kind: SplitKind::CategoricalIn {
                                categories: vec![cat as u32],
                            },
                        },
                        gain,
                    );
                }
            }
        }
    }
    best
}

/// Midpoint strictly between two adjacent distinct values when representable.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    if mid > lo && mid < hi {
        mid
    } else {
        // adjacent floats: route lo left, hi right
        lo
    }
}

/// Grows a tree over `rows` (duplicates allowed, e.g. bootstrap samples).
///
/// A node becomes a leaf when it is pure, too small to split into two
/// children of `min_leaf`, or has no admissible split. Positive-gain splits
/// are preferred: first among the sampled attributes, then among all
/// attributes. If no attribute gives a positive gain, the first admissible
/// zero-gain split is taken so that patterns like XOR can still be separated.
pub(crate) fn grow(
    m: &FeatureMatrix,
    rows: &[usize],
    params: GrowParams,
    rng: &mut Option<&mut UpmRng>,
) -> Vec<Node> {
    let mut nodes = Vec::new();
    let all: Vec<usize> = (0..m.n_features()).collect();
    grow_node(m, rows.to_vec(), params, rng, &all, &mut nodes);
    nodes
}

fn grow_node(
    m: &FeatureMatrix,
    rows: Vec<usize>,
    params: GrowParams,
    rng: &mut Option<&mut UpmRng>,
    all: &[usize],
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let counts = class_counts(m, &rows);
    nodes.push(Node::leaf(counts));
    if counts[0] == 0 || counts[1] == 0 || rows.len() < 2 * params.min_leaf {
        return id;
    }
    let tol = gain_tol(rows.len());
    let sampled: Option<Vec<usize>> = match (params.attrs_per_node, rng.as_deref_mut()) {
        (Some(k), Some(r)) if k < all.len() => {
            let mut s = sample(r, all.len(), k).into_vec();
            s.sort_unstable();
            Some(s)
        }
        _ => None,
    };
    let mut chosen = match &sampled {
        Some(s) => best_split(m, &rows, s, params.min_leaf).filter(|c| c.gain > tol),
        None => None,
    };
    if chosen.is_none() {
        chosen = best_split(m, &rows, all, params.min_leaf);
    }
    let Some(split) = chosen else {
        return id;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| split.predicate.test(m.row(i)));
    drop(rows);
    let left = grow_node(m, left_rows, params, rng, all, nodes);
    let right = grow_node(m, right_rows, params, rng, all, nodes);
    nodes[id] = Node::Split {
        predicate: split.predicate,
        left,
        right,
        counts,
    };
    id
}
