use serde::{Deserialize, Serialize};

use crate::data::{AttributeDescriptor, AttributeKind, Cell, Dataset, DatasetMeta, KindHint, Schema};
use crate::error::{Result, UpmError};

pub const TRANSFORM_VERSION: u32 = 1;

/// One raw attribute that survives preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeptAttribute {
    /// Column position in the raw schema.
    pub index: usize,
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeValue {
    Median(f64),
    Mode(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    /// Maps into [0, 1], clipping values outside the fitted range.
    pub fn scale(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            return 0.0;
        }
        ((v - self.min) / span).clamp(0.0, 1.0)
    }

    pub fn unscale(&self, v: f64) -> f64 {
        self.min + v * (self.max - self.min)
    }
}

/// Fitted preprocessing: which raw columns to keep and how to fill and scale them.
///
/// Applying a transform only reads the stored parameters; nothing is refitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub version: u32,
    /// Number of attributes in the raw schema the transform was fitted on.
    pub raw_width: usize,
    pub kept: Vec<KeptAttribute>,
    /// Fill value per kept attribute, in raw units.
    pub impute: Vec<ImputeValue>,
    /// Min-max parameters per kept attribute (`None` for categoricals).
    pub scale: Vec<Option<MinMax>>,
}

impl Transform {
    pub fn n_kept(&self) -> usize {
        self.kept.len()
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        self.kept.iter().map(|k| k.index).collect()
    }

    /// Keeps entries `positions` of this transform (positions into `kept`).
    pub fn restrict(&self, positions: &[usize]) -> Transform {
        Transform {
            version: self.version,
            raw_width: self.raw_width,
            kept: positions.iter().map(|&p| self.kept[p].clone()).collect(),
            impute: positions.iter().map(|&p| self.impute[p]).collect(),
            scale: positions.iter().map(|&p| self.scale[p]).collect(),
        }
    }

    /// Output schema produced by [`apply`](Self::apply).
    pub fn output_attributes(&self) -> Vec<AttributeDescriptor> {
        self.kept
            .iter()
            .enumerate()
            .map(|(i, k)| AttributeDescriptor {
                name: k.name.clone(),
                kind: k.kind.clone(),
                index: i,
            })
            .collect()
    }

    /// CSV hints that reproduce the fitted kinds for the kept columns.
    pub fn schema_hints(&self, label_column: &str) -> Schema {
        let mut schema = Schema::with_label(label_column);
        for k in &self.kept {
            let hint = match &k.kind {
                AttributeKind::Numeric => KindHint::Numeric,
                AttributeKind::Categorical { categories } => {
                    KindHint::Categorical(Some(categories.clone()))
                }
            };
            schema.hints.insert(k.name.clone(), hint);
        }
        schema
    }

    pub fn check_schema(&self, attributes: &[AttributeDescriptor]) -> Result<()> {
        if attributes.len() != self.raw_width {
            return Err(UpmError::SchemaMismatch(format!(
                "transform expects {} raw attributes, got {}",
                self.raw_width,
                attributes.len()
            )));
        }
        for k in &self.kept {
            let a = &attributes[k.index];
            if a.name != k.name || a.kind != k.kind {
                return Err(UpmError::SchemaMismatch(format!(
                    "attribute {} is {:?}, transform expects {:?}",
                    k.index, a.name, k.name
                )));
            }
        }
        Ok(())
    }

    /// Transforms one raw row.
    pub fn apply_row(&self, row: &[Cell]) -> Result<Vec<Cell>> {
        if row.len() != self.raw_width {
            return Err(UpmError::SchemaMismatch(format!(
                "row has {} cells, transform expects {}",
                row.len(),
                self.raw_width
            )));
        }
        self.kept
            .iter()
            .zip(&self.impute)
            .zip(&self.scale)
            .map(|((k, imp), scale)| {
                let cell = match (row[k.index], imp) {
                    (Cell::Missing, ImputeValue::Median(m)) => Cell::Num(*m),
                    (Cell::Missing, ImputeValue::Mode(c)) => Cell::Cat(*c),
                    (c, _) => c,
                };
                match (cell, scale) {
                    (Cell::Num(v), Some(mm)) => Ok(Cell::Num(mm.scale(v))),
                    (Cell::Num(v), None) => Ok(Cell::Num(v)),
                    (Cell::Cat(c), _) => Ok(Cell::Cat(c)),
                    (Cell::Missing, _) => unreachable!("missing cells are imputed above"),
                }
            })
            .collect()
    }

    /// Applies the stored parameters to a dataset on the raw schema.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        self.check_schema(ds.attributes())?;
        let rows = ds
            .rows()
            .iter()
            .map(|r| self.apply_row(r))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(
            DatasetMeta {
                name: ds.meta().name.clone(),
                source: ds.meta().source.clone(),
            },
            self.output_attributes(),
            rows,
            ds.labels().to_vec(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Transform = serde_json::from_str(s)?;
        if t.version != TRANSFORM_VERSION {
            return Err(UpmError::SchemaMismatch(format!(
                "unsupported transform version {}",
                t.version
            )));
        }
        if t.impute.len() != t.kept.len() || t.scale.len() != t.kept.len() {
            return Err(UpmError::SchemaMismatch(
                "transform arrays have different lengths".into(),
            ));
        }
        Ok(t)
    }
}

pub fn apply_transform(t: &Transform, ds: &Dataset) -> Result<Dataset> {
    t.apply(ds)
}
