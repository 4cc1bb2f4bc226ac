//! K-Star: instance-based scoring with per-attribute transformation
//! probabilities whose spread is set by the blend parameter.

use serde::{Deserialize, Serialize};

use crate::data::{ClassCounts, Label};
use crate::error::{Result, UpmError};

use super::matrix::{FeatureKind, FeatureMatrix};
use super::tree::Distribution;

const MAX_BISECTION: usize = 200;
/// Tolerance on the achieved effective instance count.
pub const N0_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStarModel {
    pub blend: f64,
    pub train: FeatureMatrix,
    pub priors: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeFlag {
    /// Target effective count is below the number of tied nearest values;
    /// the limiting (nearest-only) weights were used.
    BelowTies,
    /// Every training value transforms identically; weights are uniform.
    Uninformative,
    /// Bisection stopped outside the tolerance.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStarDiagnostics {
    pub target_n0: f64,
    /// Achieved effective count per attribute.
    pub achieved_n0: Vec<f64>,
    pub flags: Vec<(usize, AttributeFlag)>,
    /// Every instance scored zero and the class priors were returned.
    pub prior_fallback: bool,
}

pub(crate) fn fit_kstar(m: &FeatureMatrix, blend: f64) -> Result<KStarModel> {
    if m.n_rows() == 0 {
        return Err(UpmError::InvalidData("K-Star needs training instances".into()));
    }
    let c = ClassCounts::from_labels(m.labels());
    let n = c.total() as f64;
    Ok(KStarModel {
        blend,
        train: m.clone(),
        priors: [c.placed as f64 / n, c.unplaced as f64 / n],
    })
}

/// Effective count `(sum w)^2 / sum w^2` from log-weights.
fn effective_count(logw: &[f64]) -> f64 {
    let mx = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return 0.0;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &l in logw {
        let w = (l - mx).exp();
        s1 += w;
        s2 += w * w;
    }
    s1 * s1 / s2
}

struct Solved {
    logw: Vec<f64>,
    n0: f64,
    flag: Option<AttributeFlag>,
}

fn uniform(n: usize, flag: Option<AttributeFlag>) -> Solved {
    Solved {
        logw: vec![0.0; n],
        n0: n as f64,
        flag,
    }
}

/// Weights exp(-(d - dmin)/x0) with x0 solved on a log scale.
fn solve_numeric(d: &[f64], target: f64) -> Solved {
    let n = d.len();
    let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let rel: Vec<f64> = d.iter().map(|&v| v - dmin).collect();
    let ties = rel.iter().filter(|&&r| r == 0.0).count();
    if ties == n {
        return uniform(n, Some(AttributeFlag::Uninformative));
    }
    if target >= n as f64 {
        return uniform(n, None);
    }
    if target <= ties as f64 {
        let logw = rel
            .iter()
            .map(|&r| if r == 0.0 { 0.0 } else { f64::NEG_INFINITY })
            .collect();
        let flag = (target < ties as f64).then_some(AttributeFlag::BelowTies);
        return Solved {
            logw,
            n0: ties as f64,
            flag,
        };
    }
    let gap = rel.iter().cloned().filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min);
    let span = rel.iter().cloned().fold(0.0, f64::max);
    let weights = |lx: f64| -> Vec<f64> {
        let inv = (-lx).exp();
        rel.iter().map(|&r| -r * inv).collect()
    };
    let mut lo = gap.ln() - 10.0;
    let mut hi = span.ln() + 10.0;
    while effective_count(&weights(lo)) > target && lo > -745.0 {
        lo -= 10.0;
    }
    while effective_count(&weights(hi)) < target && hi < 700.0 {
        hi += 10.0;
    }
    solve_by_bisection(lo, hi, target, weights, true)
}

/// Weights s on the query's category and (1-s)/(C-1) elsewhere.
fn solve_categorical(values: &[f64], q: f64, n_categories: u32, target: f64) -> Solved {
    let n = values.len();
    let matches = values.iter().filter(|&&v| v == q).count();
    if n_categories < 2 || matches == 0 || matches == n {
        return uniform(n, Some(AttributeFlag::Uninformative));
    }
    if target >= n as f64 {
        return uniform(n, None);
    }
    if target <= matches as f64 {
        let logw = values
            .iter()
            .map(|&v| if v == q { 0.0 } else { f64::NEG_INFINITY })
            .collect();
        let flag = (target < matches as f64).then_some(AttributeFlag::BelowTies);
        return Solved {
            logw,
            n0: matches as f64,
            flag,
        };
    }
    let c = n_categories as f64;
    let weights = |s: f64| -> Vec<f64> {
        let (ls, lr) = (s.ln(), ((1.0 - s) / (c - 1.0)).ln());
        values.iter().map(|&v| if v == q { ls } else { lr }).collect()
    };
    // n0 falls from N at s = 1/C towards the match count as s -> 1
    solve_by_bisection(1.0 / c, 1.0, target, weights, false)
}

fn solve_by_bisection(
    mut lo: f64,
    mut hi: f64,
    target: f64,
    weights: impl Fn(f64) -> Vec<f64>,
    increasing: bool,
) -> Solved {
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        let w = weights(mid);
        let n0 = effective_count(&w);
        let err = (n0 - target).abs();
        if best.as_ref().is_none_or(|b| err < b.2) {
            best = Some((n0, w, err));
        }
        if err <= N0_TOLERANCE * 1e-3 || mid == lo || mid == hi {
            break;
        }
        if (n0 < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (n0, logw, err) = best.expect("at least one bisection step");
    Solved {
        logw,
        n0,
        flag: (err > N0_TOLERANCE).then_some(AttributeFlag::NotConverged),
    }
}

impl KStarModel {
    pub fn target_n0(&self) -> f64 {
        1.0 + self.blend / 100.0 * (self.train.n_rows() as f64 - 1.0)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Distribution> {
        self.train.check_instance(x)?;
        Ok(self.predict_with_diagnostics(x).0)
    }

    pub fn predict_with_diagnostics(&self, x: &[f64]) -> (Distribution, KStarDiagnostics) {
        let m = &self.train;
        let n = m.n_rows();
        let target = self.target_n0();
        let mut total = vec![0.0f64; n];
        let mut achieved = Vec::with_capacity(m.n_features());
        let mut flags = Vec::new();
        let mut column = vec![0.0; n];
        for (j, (kind, &xj)) in m.kinds.iter().zip(x).enumerate() {
            for (i, c) in column.iter_mut().enumerate() {
                *c = m.value(i, j);
            }
            let solved = match *kind {
                FeatureKind::Numeric => {
                    let d: Vec<f64> = column.iter().map(|&v| (v - xj).abs()).collect();
                    solve_numeric(&d, target)
                }
                FeatureKind::Categorical { n_categories } => {
                    solve_categorical(&column, xj, n_categories, target)
                }
            };
            achieved.push(solved.n0);
            if let Some(f) = solved.flag {
                flags.push((j, f));
            }
            // normalise over the training column
            let z = log_sum_exp(solved.logw.iter().copied());
            for (t, l) in total.iter_mut().zip(&solved.logw) {
                *t += l - z;
            }
        }
        let score = |class: Label| {
            log_sum_exp(
                total
                    .iter()
                    .zip(m.labels())
                    .filter(|(_, &l)| l == class)
                    .map(|(&t, _)| t),
            )
        };
        let (s0, s1) = (score(Label::Placed), score(Label::Unplaced));
        let mx = s0.max(s1);
        let mut prior_fallback = false;
        let dist = if mx == f64::NEG_INFINITY {
            prior_fallback = true;
            self.priors
        } else {
            let (e0, e1) = ((s0 - mx).exp(), (s1 - mx).exp());
            let p0 = e0 / (e0 + e1);
            [p0, 1.0 - p0]
        };
        (
            dist,
            KStarDiagnostics {
                target_n0: target,
                achieved_n0: achieved,
                flags,
                prior_fallback,
            },
        )
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_count_bounds() {
        assert_eq!(effective_count(&[0.0; 5]), 5.0);
        assert_eq!(effective_count(&[0.0, f64::NEG_INFINITY]), 1.0);
        let n0 = effective_count(&[0.0, (0.5f64).ln()]);
        assert!((n0 - 2.25 / 1.25).abs() < 1e-12);
    }

    #[test]
    fn numeric_solver_hits_target() {
        let d: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        for target in [1.5, 5.0, 10.8, 30.0, 49.0] {
            let s = solve_numeric(&d, target);
            assert!(s.flag.is_none(), "{target}");
            assert!((s.n0 - target).abs() < N0_TOLERANCE);
            assert!((effective_count(&s.logw) - target).abs() < N0_TOLERANCE);
        }
    }

    #[test]
    fn categorical_solver_hits_target() {
        let vals: Vec<f64> = (0..40).map(|i| (i % 4) as f64).collect();
        for target in [12.0, 20.0, 35.0] {
            let s = solve_categorical(&vals, 1.0, 4, target);
            assert!(s.flag.is_none());
            assert!((s.n0 - target).abs() < N0_TOLERANCE);
        }
        let s = solve_categorical(&vals, 1.0, 4, 5.0);
        assert_eq!(s.flag, Some(AttributeFlag::BelowTies));
        assert_eq!(s.n0, 10.0);
    }

    #[test]
    fn degenerate_columns_are_flagged() {
        let s = solve_numeric(&[0.3; 4], 2.0);
        assert_eq!(s.flag, Some(AttributeFlag::Uninformative));
        let s = solve_categorical(&[2.0; 4], 1.0, 3, 2.0);
        assert_eq!(s.flag, Some(AttributeFlag::Uninformative));
    }
}
