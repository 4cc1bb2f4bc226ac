use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, Dataset, Label};
use crate::error::{Result, UpmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical { n_categories: u32 },
}

/// Dense row-major feature table the learners train on.
///
/// Categorical cells hold their category id as an `f64`. Missing cells are
/// not representable: preprocessing must remove them first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    n_rows: usize,
    values: Vec<f64>,
    labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn new(
        names: Vec<String>,
        kinds: Vec<FeatureKind>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        if names.len() != kinds.len() {
            return Err(UpmError::InvalidData("names and kinds differ in length".into()));
        }
        if rows.len() != labels.len() {
            return Err(UpmError::InvalidData("rows and labels differ in length".into()));
        }
        let a = kinds.len();
        let mut values = Vec::with_capacity(rows.len() * a);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != a {
                return Err(UpmError::RaggedRow {
                    row: i + 1,
                    expected: a,
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            names,
            kinds,
            n_rows: rows.len(),
            values,
            labels,
        })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let kinds = ds
            .attributes()
            .iter()
            .map(|a| match &a.kind {
                AttributeKind::Numeric => FeatureKind::Numeric,
                AttributeKind::Categorical { categories } => FeatureKind::Categorical {
                    n_categories: categories.len() as u32,
                },
            })
            .collect();
        let names = ds.attributes().iter().map(|a| a.name.clone()).collect();
        let rows = ds
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .map(|c| {
                        c.as_f64().ok_or_else(|| {
                            UpmError::InvalidData(format!(
                                "row {}: learners require complete rows; preprocess first",
                                i + 1
                            ))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(names, kinds, rows, ds.labels().to_vec())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.kinds.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let a = self.kinds.len();
        &self.values[i * a..(i + 1) * a]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.kinds.len() + j]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        let a = self.kinds.len();
        let mut values = Vec::with_capacity(idx.len() * a);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            n_rows: idx.len(),
            values,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn check_instance(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(UpmError::SchemaMismatch(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(())
    }
}
