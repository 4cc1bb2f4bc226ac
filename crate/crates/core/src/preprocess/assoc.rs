//! Pairwise association measures between columns, and between a column and the label.
//!
//! * numeric / numeric: |Pearson r|
//! * categorical / categorical: Cramér's V
//! * numeric / categorical: correlation ratio η (the multiple correlation of
//!   the numeric column on the one-hot encoding of the categorical one)
//! * numeric / label: |point-biserial r|; categorical / label: Cramér's V

use crate::data::{AttributeKind, Cell, Dataset, Label};
use crate::error::{Result, UpmError};
use crate::exec::Execution;

/// Column view with everything precomputed for fast pairwise measures.
#[derive(Debug, Clone)]
pub(crate) enum Column {
    /// Centred values divided by `sqrt(sum of squares)`; all zeros for constants.
    Numeric { unit: Vec<f64> },
    Categorical { ids: Vec<u32>, n_categories: usize },
}

pub(crate) fn columns(ds: &Dataset) -> Result<Vec<Column>> {
    (0..ds.n_attributes())
        .map(|j| match &ds.attributes()[j].kind {
            AttributeKind::Numeric => {
                let vals = ds
                    .column(j)
                    .map(|c| match c {
                        Cell::Num(v) => Ok(*v),
                        _ => Err(missing(ds, j)),
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Column::Numeric {
                    unit: unit_vector(&vals),
                })
            }
            AttributeKind::Categorical { categories } => {
                let ids = ds
                    .column(j)
                    .map(|c| match c {
                        Cell::Cat(v) => Ok(*v),
                        _ => Err(missing(ds, j)),
                    })
                    .collect::<Result<Vec<u32>>>()?;
                Ok(Column::Categorical {
                    ids,
                    n_categories: categories.len(),
                })
            }
        })
        .collect()
}

fn missing(ds: &Dataset, j: usize) -> UpmError {
    UpmError::InvalidData(format!(
        "attribute {:?} has missing cells; clean the dataset first",
        ds.attributes()[j].name
    ))
}

fn unit_vector(vals: &[f64]) -> Vec<f64> {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let centred: Vec<f64> = vals.iter().map(|v| v - mean).collect();
    let norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= f64::EPSILON * mean.abs().max(1.0) * n {
        return vec![0.0; vals.len()];
    }
    centred.into_iter().map(|v| v / norm).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// |Pearson r| between two raw numeric vectors.
pub fn abs_pearson(a: &[f64], b: &[f64]) -> f64 {
    dot(&unit_vector(a), &unit_vector(b)).abs().min(1.0)
}

/// Cramér's V of two category-id vectors. Only observed categories count
/// towards the `min(r, c) - 1` normaliser.
pub fn cramers_v(a: &[u32], na: usize, b: &[u32], nb: usize) -> f64 {
    let n = a.len() as f64;
    let mut table = vec![0.0f64; na * nb];
    let mut ra = vec![0.0f64; na];
    let mut cb = vec![0.0f64; nb];
    for (&x, &y) in a.iter().zip(b) {
        table[x as usize * nb + y as usize] += 1.0;
        ra[x as usize] += 1.0;
        cb[y as usize] += 1.0;
    }
    let rows = ra.iter().filter(|&&c| c > 0.0).count();
    let cols = cb.iter().filter(|&&c| c > 0.0).count();
    let dof = rows.min(cols);
    if dof < 2 {
        return 0.0;
    }
    let mut chi2 = 0.0;
    for i in 0..na {
        if ra[i] == 0.0 {
            continue;
        }
        for j in 0..nb {
            if cb[j] == 0.0 {
                continue;
            }
            let e = ra[i] * cb[j] / n;
            let d = table[i * nb + j] - e;
            chi2 += d * d / e;
        }
    }
    (chi2 / (n * (dof - 1) as f64)).sqrt().min(1.0)
}

/// Correlation ratio of a unit-normalised numeric column against category ids.
fn correlation_ratio(unit: &[f64], ids: &[u32], n_categories: usize) -> f64 {
    // unit is centred with total sum of squares 1 (or all zero)
    let mut sums = vec![0.0f64; n_categories];
    let mut counts = vec![0.0f64; n_categories];
    for (&v, &c) in unit.iter().zip(ids) {
        sums[c as usize] += v;
        counts[c as usize] += 1.0;
    }
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0.0)
        .map(|(s, n)| s * s / n)
        .sum();
    between.max(0.0).sqrt().min(1.0)
}

pub(crate) fn association(a: &Column, b: &Column) -> f64 {
    match (a, b) {
        (Column::Numeric { unit: x }, Column::Numeric { unit: y }) => dot(x, y).abs().min(1.0),
        (
            Column::Categorical {
                ids: x,
                n_categories: nx,
            },
            Column::Categorical {
                ids: y,
                n_categories: ny,
            },
        ) => cramers_v(x, *nx, y, *ny),
        (Column::Numeric { unit }, Column::Categorical { ids, n_categories })
        | (Column::Categorical { ids, n_categories }, Column::Numeric { unit }) => {
            correlation_ratio(unit, ids, *n_categories)
        }
    }
}

/// Symmetric association matrix (row-major, ones on the diagonal).
pub(crate) fn association_matrix(cols: &[Column], exec: Execution) -> Vec<f64> {
    let a = cols.len();
    let upper: Vec<Vec<f64>> = exec.map(a, |i| {
        ((i + 1)..a)
            .map(|j| association(&cols[i], &cols[j]))
            .collect()
    });
    let mut m = vec![1.0; a * a];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            m[i * a + j] = v;
            m[j * a + i] = v;
        }
    }
    m
}

/// Association of each column with the label.
pub(crate) fn relevance(cols: &[Column], labels: &[Label]) -> Vec<f64> {
    let y: Vec<f64> = labels
        .iter()
        .map(|l| if *l == Label::Placed { 1.0 } else { 0.0 })
        .collect();
    let y_unit = unit_vector(&y);
    let y_ids: Vec<u32> = labels.iter().map(|l| l.index() as u32).collect();
    cols.iter()
        .map(|c| match c {
            Column::Numeric { unit } => dot(unit, &y_unit).abs().min(1.0),
            Column::Categorical { ids, n_categories } => cramers_v(ids, *n_categories, &y_ids, 2),
        })
        .collect()
}
