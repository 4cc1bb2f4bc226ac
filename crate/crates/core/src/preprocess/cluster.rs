//! Clustering over attributes.
//!
//! Attributes are points; the distance between two attributes is
//! `1 - association`. Clusters come from k-medoids (k-medoids++ seeding then
//! PAM swaps), and k is picked by mean silhouette when not given. Each cluster
//! is represented by its member most associated with the label.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, UpmError};
use crate::exec::Execution;
use crate::rng::{derive_seed, rng_from_seed};

use super::assoc;

pub const MAX_AUTO_CLUSTERS: usize = 15;
const SWAP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeClusterSet {
    /// Attribute names of the dataset the clusters were computed on.
    pub attribute_names: Vec<String>,
    /// Member attribute indices per cluster, each ascending; clusters ordered by first member.
    pub clusters: Vec<Vec<usize>>,
    pub medoids: Vec<usize>,
    /// One representative per cluster (same order as `clusters`).
    pub representatives: Vec<usize>,
    /// Association of each attribute with the label.
    pub relevance: Vec<f64>,
    pub k_used: usize,
    /// Mean silhouette of the chosen clustering (`None` when k was trivial).
    pub silhouette: Option<f64>,
}

impl AttributeClusterSet {
    /// Representatives in ascending attribute order.
    pub fn selected(&self) -> Vec<usize> {
        let mut s = self.representatives.clone();
        s.sort_unstable();
        s
    }

    pub fn selected_names(&self) -> Vec<&str> {
        self.selected()
            .into_iter()
            .map(|i| self.attribute_names[i].as_str())
            .collect()
    }
}

/// Dense symmetric distance matrix.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DistanceMatrix { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Result of one k-medoids run.
#[derive(Debug, Clone, PartialEq)]
pub struct Medoids {
    /// Medoid point indices, ascending.
    pub medoids: Vec<usize>,
    /// Position in `medoids` of each point's nearest medoid.
    pub assignment: Vec<usize>,
    pub cost: f64,
}

fn assign(dm: &DistanceMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let assignment = (0..dm.len())
        .map(|p| {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dm.get(p, m);
                if d < bd {
                    bd = d;
                    best = slot;
                }
            }
            cost += bd;
            best
        })
        .collect();
    (assignment, cost)
}

/// k-medoids++ seeding followed by best-improvement PAM swaps.
pub fn k_medoids(dm: &DistanceMatrix, k: usize, seed: u64) -> Medoids {
    let n = dm.len();
    assert!(k >= 1 && k <= n, "k must be in [1, n]");
    let mut rng = rng_from_seed(seed);
    let mut medoids = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|p| dm.get(p, medoids[0])).collect();
    while medoids.len() < k {
        let weights: Vec<f64> = nearest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let next = if total <= 0.0 {
            (0..n).find(|p| !medoids.contains(p)).unwrap()
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (p, w) in weights.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = p;
                    break;
                }
                target -= w;
            }
            if medoids.contains(&pick) {
                (0..n).find(|p| !medoids.contains(p)).unwrap()
            } else {
                pick
            }
        };
        medoids.push(next);
        for (p, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dm.get(p, next));
        }
    }

    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }
    loop {
        // nearest and second-nearest medoid distance per point
        let mut d1 = vec![f64::INFINITY; n];
        let mut d2 = vec![f64::INFINITY; n];
        let mut near = vec![0usize; n];
        for p in 0..n {
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dm.get(p, m);
                if d < d1[p] {
                    d2[p] = d1[p];
                    d1[p] = d;
                    near[p] = slot;
                } else if d < d2[p] {
                    d2[p] = d;
                }
            }
        }
        let mut best = (0.0, usize::MAX, usize::MAX);
        let mut delta = vec![0.0f64; k];
        for h in (0..n).filter(|&h| !is_medoid[h]) {
            delta.iter_mut().for_each(|v| *v = 0.0);
            let mut shared = 0.0;
            for p in 0..n {
                let dh = dm.get(p, h);
                // change when some other medoid is removed
                let keep = dh.min(d1[p]) - d1[p];
                shared += keep;
                // extra change when p's own medoid is the one removed
                delta[near[p]] += dh.min(d2[p]) - d1[p] - keep;
            }
            for (slot, d) in delta.iter().enumerate() {
                let total = shared + d;
                if total < best.0 - SWAP_EPS {
                    best = (total, slot, h);
                }
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        is_medoid[medoids[best.1]] = false;
        is_medoid[best.2] = true;
        medoids[best.1] = best.2;
    }
    medoids.sort_unstable();
    let (assignment, cost) = assign(dm, &medoids);
    Medoids {
        medoids,
        assignment,
        cost,
    }
}

/// Mean silhouette width; singleton clusters contribute 0.
pub fn mean_silhouette(dm: &DistanceMatrix, assignment: &[usize], k: usize) -> f64 {
    let n = dm.len();
    let mut sizes = vec![0usize; k];
    for &a in assignment {
        sizes[a] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0f64; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[assignment[j]] += dm.get(i, j);
            }
        }
        let own = assignment[i];
        if sizes[own] <= 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            continue;
        }
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

/// Clusters the attributes of a cleaned dataset.
///
/// With `k = None`, every k in `[2, min(15, A - 1)]` is tried and the highest
/// mean silhouette wins (ties to the smaller k). With two attributes there is
/// nothing to choose from and each attribute forms its own cluster.
pub fn cluster_attributes(
    ds: &Dataset,
    k: Option<usize>,
    seed: u64,
    exec: Execution,
) -> Result<AttributeClusterSet> {
    let a = ds.n_attributes();
    if a < 2 {
        return Err(UpmError::InvalidArgument(format!(
            "attribute clustering needs at least 2 attributes, got {a}"
        )));
    }
    if let Some(k) = k {
        if k == 0 || k > a {
            return Err(UpmError::InvalidArgument(format!(
                "cluster count {k} must be in [1, {a}]"
            )));
        }
    }
    let cols = assoc::columns(ds)?;
    let am = assoc::association_matrix(&cols, exec);
    let dm = DistanceMatrix::from_fn(a, |i, j| (1.0 - am[i * a + j]).max(0.0));
    let relevance = assoc::relevance(&cols, ds.labels());

    let (run, silhouette) = match k {
        Some(k) => {
            let run = k_medoids(&dm, k, derive_seed(seed, k as u64));
            let s = (k >= 2 && k < a).then(|| mean_silhouette(&dm, &run.assignment, k));
            (run, s)
        }
        None if a == 2 => (k_medoids(&dm, 2, derive_seed(seed, 2)), None),
        None => {
            let hi = MAX_AUTO_CLUSTERS.min(a - 1);
            let runs: Vec<(Medoids, f64)> = exec.map(hi - 1, |off| {
                let k = off + 2;
                let run = k_medoids(&dm, k, derive_seed(seed, k as u64));
                let s = mean_silhouette(&dm, &run.assignment, k);
                (run, s)
            });
            let mut best = 0;
            for (i, (_, s)) in runs.iter().enumerate() {
                if *s > runs[best].1 + 1e-12 {
                    best = i;
                }
            }
            let (run, s) = runs.into_iter().nth(best).unwrap();
            (run, Some(s))
        }
    };

    let k_used = run.medoids.len();
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k_used];
    for (p, &slot) in run.assignment.iter().enumerate() {
        clusters[slot].push(p);
    }
    let mut order: Vec<usize> = (0..k_used).filter(|&c| !clusters[c].is_empty()).collect();
    order.sort_by_key(|&c| clusters[c][0]);
    let medoids: Vec<usize> = order.iter().map(|&c| run.medoids[c]).collect();
    let clusters: Vec<Vec<usize>> = order.into_iter().map(|c| clusters[c].clone()).collect();
    let representatives = clusters
        .iter()
        .map(|members| {
            let mut best = members[0];
            for &m in &members[1..] {
                if relevance[m] > relevance[best] {
                    best = m;
                }
            }
            best
        })
        .collect();
    Ok(AttributeClusterSet {
        attribute_names: ds.attributes().iter().map(|a| a.name.clone()).collect(),
        k_used: clusters.len(),
        clusters,
        medoids,
        representatives,
        relevance,
        silhouette,
    })
}
