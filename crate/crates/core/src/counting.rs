//! Person-count estimates from spatial breathing profiles.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cluster::{distance_matrix, silhouette, ward_linkage};
use crate::error::{Error, Result};
use crate::profile::{augment_profile, SpatialBreathingProfile};
use crate::rng;

/// Augmented copies evaluated per profile.
pub const AUGMENTATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMethod {
    Clustering,
    AttentionClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    pub count: usize,
    pub method: CountMethod,
    /// Predicted count -> number of augmentations voting for it.
    pub votes: BTreeMap<usize, usize>,
    /// Winning votes over the number of augmentations.
    pub confidence: f64,
}

impl CountEstimate {
    /// Estimate for a scene without any surviving breathing source.
    pub fn nobody(method: CountMethod) -> Self {
        CountEstimate {
            count: 0,
            method,
            votes: BTreeMap::new(),
            confidence: 1.0,
        }
    }
}

/// Majority vote; ties go to the smaller count.
pub fn majority_vote(predictions: &[usize]) -> (usize, BTreeMap<usize, usize>, f64) {
    let mut votes = BTreeMap::new();
    for &p in predictions {
        *votes.entry(p).or_insert(0) += 1;
    }
    let mut winner = (0, 0);
    // BTreeMap iterates in ascending count order, so strict '>' keeps the smaller on ties.
    for (&count, &n) in &votes {
        if n > winner.1 {
            winner = (count, n);
        }
    }
    let confidence = if predictions.is_empty() {
        0.0
    } else {
        winner.1 as f64 / predictions.len() as f64
    };
    (winner.0, votes, confidence)
}

/// Seeds of the row-shuffle augmentations used for voting.
pub fn augmentation_seeds(seed: u64) -> [u64; AUGMENTATIONS] {
    let mut r = rng::substream(seed, "augmentation-seeds", 0);
    std::array::from_fn(|_| r.gen())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringParams {
    pub k_max: usize,
    /// Below this best mean silhouette the profile is one group.
    pub silhouette_floor: f64,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        ClusteringParams {
            k_max: 8,
            silhouette_floor: 0.25,
        }
    }
}

/// Number of groups among the rows and the mean silhouette of the chosen cut
/// (`None` when no cut was scored).
///
/// Ward clustering is cut at every `k` in `2..=min(k_max, rows)` and the
/// `k` with the highest mean silhouette wins (smaller `k` on ties).
pub fn cluster_count(rows: &[Vec<f64>], params: &ClusteringParams) -> (usize, Option<f64>) {
    match rows.len() {
        0 => return (0, None),
        1 => return (1, None),
        _ => {}
    }
    let dendrogram = ward_linkage(rows);
    let dist = distance_matrix(rows);
    let mut best: Option<(usize, f64)> = None;
    for k in 2..=params.k_max.min(rows.len()) {
        let s = silhouette(&dist, &dendrogram.cut(k));
        if best.map_or(true, |(_, bs)| s > bs) {
            best = Some((k, s));
        }
    }
    match best {
        Some((k, s)) if s >= params.silhouette_floor => (k, Some(s)),
        Some((_, s)) => (1, Some(s)),
        None => (1, None),
    }
}

pub fn count_by_clustering(p: &SpatialBreathingProfile, params: &ClusteringParams, seed: u64) -> Result<CountEstimate> {
    if params.k_max < 2 {
        return Err(Error::Config("k_max must be at least 2".into()));
    }
    if p.is_empty() {
        return Ok(CountEstimate::nobody(CountMethod::Clustering));
    }
    let predictions: Vec<usize> = augmentation_seeds(seed)
        .iter()
        .map(|&s| cluster_count(&augment_profile(p, s).rows, params).0)
        .collect();
    let (count, votes, confidence) = majority_vote(&predictions);
    Ok(CountEstimate {
        count,
        method: CountMethod::Clustering,
        votes,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_examples() {
        let preds = [2, 2, 3, 2, 3, 2, 3, 2, 3, 2];
        let (c, votes, conf) = majority_vote(&preds);
        assert_eq!(c, 2);
        assert_eq!(votes[&2], 6);
        assert_eq!(votes[&3], 4);
        assert!((conf - 0.6).abs() < 1e-12);
        let (c, _, conf) = majority_vote(&[7, 5, 5, 7, 3]);
        assert_eq!(c, 5);
        assert!((conf - 0.4).abs() < 1e-12);
    }

    #[test]
    fn trivial_row_counts() {
        let params = ClusteringParams::default();
        assert_eq!(cluster_count(&[], &params).0, 0);
        assert_eq!(cluster_count(&[vec![1.0, 0.0]], &params).0, 1);
        let same = vec![vec![0.6, 0.8]; 5];
        assert_eq!(cluster_count(&same, &params).0, 1);
    }

    #[test]
    fn empty_profile_counts_zero() {
        let p = SpatialBreathingProfile::empty(vec![(0, 0)]);
        let est = count_by_clustering(&p, &ClusteringParams::default(), 1).unwrap();
        assert_eq!(est.count, 0);
    }
}
