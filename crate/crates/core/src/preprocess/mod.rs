//! Automated preprocessing: cleaning, attribute clustering and selection.

mod assoc;
mod clean;
mod cluster;
mod transform;

pub use assoc::{abs_pearson, cramers_v};
pub use clean::{clean, CleanConfig, Impute};
pub use cluster::{
    cluster_attributes, k_medoids, mean_silhouette, AttributeClusterSet, DistanceMatrix, Medoids,
    MAX_AUTO_CLUSTERS,
};
pub use transform::{
    apply_transform, ImputeValue, KeptAttribute, MinMax, Transform, TRANSFORM_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, UpmError};
use crate::exec::Execution;

/// Keeps the representative attributes of `acs` from a cleaned dataset.
///
/// `clean_transform` is the transform that produced `ds`; the returned
/// transform maps raw rows straight to the reduced schema.
pub fn select_and_transform(
    ds: &Dataset,
    acs: &AttributeClusterSet,
    clean_transform: &Transform,
) -> Result<(Dataset, Transform)> {
    let names: Vec<&str> = ds.attributes().iter().map(|a| a.name.as_str()).collect();
    if names != acs.attribute_names.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(UpmError::SchemaMismatch(
            "cluster set was computed on a different schema".into(),
        ));
    }
    if clean_transform.n_kept() != ds.n_attributes() {
        return Err(UpmError::SchemaMismatch(
            "clean transform does not produce this dataset's schema".into(),
        ));
    }
    let selected = acs.selected();
    Ok((ds.select_columns(&selected)?, clean_transform.restrict(&selected)))
}

/// Settings for the whole preprocessing phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub clean: CleanConfig,
    /// Fixed cluster count; `None` picks k by silhouette.
    pub cluster_k: Option<usize>,
}

/// Output of [`preprocess`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Dataset,
    pub transform: Transform,
    /// `None` when cleaning left a single attribute.
    pub clusters: Option<AttributeClusterSet>,
}

/// clean → cluster_attributes → select_and_transform.
pub fn preprocess(ds: &Dataset, cfg: &PrepConfig, seed: u64, exec: Execution) -> Result<Prepared> {
    let (cleaned, clean_t) = clean(ds, &cfg.clean)?;
    if cleaned.n_attributes() < 2 {
        return Ok(Prepared {
            data: cleaned,
            transform: clean_t,
            clusters: None,
        });
    }
    let k = cfg.cluster_k.map(|k| k.min(cleaned.n_attributes()));
    let acs = cluster_attributes(&cleaned, k, seed, exec)?;
    let (data, transform) = select_and_transform(&cleaned, &acs, &clean_t)?;
    Ok(Prepared {
        data,
        transform,
        clusters: Some(acs),
    })
}
