use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, Cell, Dataset};
use crate::error::{Result, UpmError};

use super::transform::{ImputeValue, KeptAttribute, MinMax, Transform, TRANSFORM_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impute {
    /// Numeric cells get the column median, categorical cells the mode.
    MedianMode,
    /// Rows with any missing cell are dropped while fitting.
    DropRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    pub max_missing_fraction: f64,
    pub impute: Impute,
    pub drop_constant: bool,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            max_missing_fraction: 0.5,
            impute: Impute::MedianMode,
            drop_constant: true,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(UpmError::Config(format!(
                "max_missing_fraction {} outside [0, 1]",
                self.max_missing_fraction
            )));
        }
        Ok(())
    }
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Most frequent category; ties go to the lowest id.
fn mode(cells: impl Iterator<Item = u32>, n_categories: usize) -> Option<u32> {
    let mut counts = vec![0usize; n_categories];
    for c in cells {
        counts[c as usize] += 1;
    }
    let (best, &count) = counts
        .iter()
        .enumerate()
        .rev()
        .max_by_key(|(_, &c)| c)?;
    (count > 0).then_some(best as u32)
}

/// Drops sparse and constant attributes, imputes, and min-max scales numerics.
pub fn clean(ds: &Dataset, cfg: &CleanConfig) -> Result<(Dataset, Transform)> {
    cfg.validate()?;
    let n = ds.n_rows() as f64;
    let mut candidates: Vec<usize> = (0..ds.n_attributes())
        .filter(|&j| {
            let missing = ds.column(j).filter(|c| c.is_missing()).count() as f64;
            missing / n <= cfg.max_missing_fraction
        })
        .collect();

    let rows: Vec<usize> = match cfg.impute {
        Impute::MedianMode => (0..ds.n_rows()).collect(),
        Impute::DropRow => (0..ds.n_rows())
            .filter(|&i| candidates.iter().all(|&j| !ds.row(i)[j].is_missing()))
            .collect(),
    };
    if rows.is_empty() {
        return Err(UpmError::InvalidData(
            "no rows left after dropping rows with missing cells".into(),
        ));
    }

    let present = |j: usize| rows.iter().map(move |&i| ds.row(i)[j]).filter(|c| !c.is_missing());

    // all-missing columns have no distinct value and count as constant
    candidates.retain(|&j| {
        let mut it = present(j);
        let first = it.next();
        let constant = match first {
            None => true,
            Some(f) => it.all(|c| c == f),
        };
        !(constant && (cfg.drop_constant || first.is_none()))
    });
    if candidates.is_empty() {
        return Err(UpmError::InvalidData(
            "every attribute was dropped during cleaning".into(),
        ));
    }

    let mut kept = Vec::with_capacity(candidates.len());
    let mut impute = Vec::with_capacity(candidates.len());
    let mut scale = Vec::with_capacity(candidates.len());
    for &j in &candidates {
        let attr = &ds.attributes()[j];
        kept.push(KeptAttribute {
            index: j,
            name: attr.name.clone(),
            kind: attr.kind.clone(),
        });
        match &attr.kind {
            AttributeKind::Numeric => {
                let mut vals: Vec<f64> = present(j).filter_map(|c| c.as_f64()).collect();
                let med = median(&mut vals).expect("non-constant column has values");
                // vals is sorted by median()
                impute.push(ImputeValue::Median(med));
                scale.push(Some(MinMax {
                    min: vals[0],
                    max: vals[vals.len() - 1],
                }));
            }
            AttributeKind::Categorical { categories } => {
                let ids = present(j).filter_map(|c| match c {
                    Cell::Cat(c) => Some(c),
                    _ => None,
                });
                impute.push(ImputeValue::Mode(
                    mode(ids, categories.len()).expect("non-constant column has values"),
                ));
                scale.push(None);
            }
        }
    }
    let transform = Transform {
        version: TRANSFORM_VERSION,
        raw_width: ds.n_attributes(),
        kept,
        impute,
        scale,
    };
    let fitted_rows = if rows.len() == ds.n_rows() {
        ds.clone()
    } else {
        ds.subset(&rows)?
    };
    let out = transform.apply(&fitted_rows)?;
    Ok((out, transform))
}
