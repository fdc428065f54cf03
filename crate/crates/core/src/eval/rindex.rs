use serde::{Deserialize, Serialize};

use super::{kmeans, matched_accuracy, pattern_score};
use crate::patterngan::{r_indices, SurrealModel};
use crate::{Matrix, Result};

const GAP_KMEANS_INIT: usize = 10;

/// Pattern-level versus individual-level recovery for one R-index model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RindexGap {
    pub pattern_score: f64,
    pub individual_accuracy: f64,
}

/// Matched accuracy of k-means clusters (k = number of truth clusters) found
/// in an R-index matrix.
pub fn rindex_individual_accuracy(r: &Matrix, truth_labels: &[usize], seed: u64) -> Result<f64> {
    let mut k: Vec<usize> = truth_labels.to_vec();
    k.sort_unstable();
    k.dedup();
    let km = kmeans(r, k.len(), seed, GAP_KMEANS_INIT)?;
    Ok(matched_accuracy(&km.labels, truth_labels)?.accuracy)
}

/// Score learned pattern directions against the planted deviation vectors,
/// then cluster patients on their R-indices and score those labels.
pub fn rindex_cluster_gap(
    model: &SurrealModel,
    patients_z: &Matrix,
    truth_labels: &[usize],
    truth_vectors: &[Vec<f64>],
    seed: u64,
) -> Result<RindexGap> {
    let ps = pattern_score(&model.pattern_directions()?, truth_vectors)?;
    let r = r_indices(model, patients_z)?;
    Ok(RindexGap {
        pattern_score: ps,
        individual_accuracy: rindex_individual_accuracy(&r, truth_labels, seed)?,
    })
}
