//! Counting and centroid-detection accuracy metrics.
//!
//! Counting error is the mean absolute percentage error over volumes.
//! Detection accuracy matches estimated centroids to ground truth greedily
//! by distance under a threshold; with all confidences equal the
//! precision/recall curve collapses to a single operating point, so the
//! average precision at a threshold is precision times recall, and the mean
//! average precision averages that over a threshold set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point3;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("estimated and ground-truth count lists differ in length: {estimated} vs {gt}")]
    LengthMismatch { estimated: usize, gt: usize },
    #[error("count lists must be non-empty")]
    EmptyCounts,
    #[error("ground-truth count at index {index} is zero")]
    ZeroGtCount { index: usize },
    #[error("threshold set must be non-empty")]
    EmptyThresholds,
}

/// Mean absolute percentage error of per-volume counts, in percent.
pub fn mape(estimated_counts: &[usize], gt_counts: &[usize]) -> Result<f64, MetricsError> {
    if estimated_counts.len() != gt_counts.len() {
        return Err(MetricsError::LengthMismatch {
            estimated: estimated_counts.len(),
            gt: gt_counts.len(),
        });
    }
    if gt_counts.is_empty() {
        return Err(MetricsError::EmptyCounts);
    }
    let mut total = 0.0;
    for (index, (&est, &gt)) in estimated_counts.iter().zip(gt_counts).enumerate() {
        if gt == 0 {
            return Err(MetricsError::ZeroGtCount { index });
        }
        total += (est as f64 - gt as f64).abs() / gt as f64;
    }
    Ok(100.0 * total / gt_counts.len() as f64)
}

/// One accepted (ground truth, estimate) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMatch {
    pub gt_index: usize,
    pub est_index: usize,
    pub distance: f64,
}

/// A one-to-one matching between estimated and ground-truth centroids.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub pairs: Vec<PairMatch>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Greedy one-to-one matching of centroids.
///
/// All (gt, estimate) pairs with scaled distance strictly below `max_dist`
/// are sorted by (distance, gt index, estimate index) and accepted in order,
/// skipping pairs whose ground truth or estimate is already taken.
pub fn greedy_match(
    estimated: &[Point3],
    gt: &[Point3],
    max_dist: f64,
    spacing: [f64; 3],
) -> Matching {
    let mut candidates = Vec::new();
    for (gt_index, g) in gt.iter().enumerate() {
        for (est_index, e) in estimated.iter().enumerate() {
            let distance = g.scaled_distance(e, spacing);
            if distance < max_dist {
                candidates.push(PairMatch {
                    gt_index,
                    est_index,
                    distance,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.gt_index.cmp(&b.gt_index))
            .then(a.est_index.cmp(&b.est_index))
    });

    let mut gt_taken = vec![false; gt.len()];
    let mut est_taken = vec![false; estimated.len()];
    let mut pairs = Vec::new();
    for pair in candidates {
        if gt_taken[pair.gt_index] || est_taken[pair.est_index] {
            continue;
        }
        gt_taken[pair.gt_index] = true;
        est_taken[pair.est_index] = true;
        pairs.push(pair);
    }

    let true_positives = pairs.len();
    Matching {
        true_positives,
        false_positives: estimated.len() - true_positives,
        false_negatives: gt.len() - true_positives,
        pairs,
    }
}

/// Average precision at one distance threshold.
///
/// With uniform confidences the PR curve is the single point (P, R) and the
/// area under its step curve is P * R. Conventions: no estimates and no
/// ground truth scores 1; no estimates (with ground truth) or no ground
/// truth (with estimates) scores 0.
pub fn ap_at(estimated: &[Point3], gt: &[Point3], threshold: f64, spacing: [f64; 3]) -> f64 {
    match (estimated.is_empty(), gt.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let matching = greedy_match(estimated, gt, threshold, spacing);
    let precision = matching.true_positives as f64 / estimated.len() as f64;
    let recall = matching.true_positives as f64 / gt.len() as f64;
    precision * recall
}

/// Mean of [`ap_at`] over a threshold set.
pub fn map_over(
    estimated: &[Point3],
    gt: &[Point3],
    thresholds: &[f64],
    spacing: [f64; 3],
) -> Result<f64, MetricsError> {
    if thresholds.is_empty() {
        return Err(MetricsError::EmptyThresholds);
    }
    let sum: f64 = thresholds
        .iter()
        .map(|&t| ap_at(estimated, gt, t, spacing))
        .sum();
    Ok(sum / thresholds.len() as f64)
}

/// Matching counts and rates of one volume at one threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Per-volume evaluation detail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEval {
    pub gt_count: usize,
    pub est_count: usize,
    pub per_t: BTreeMap<String, ThresholdCounts>,
}

/// Aggregated evaluation over one or more volumes.
///
/// `ap` holds the mean over volumes of each threshold's per-volume average
/// precision, keyed by the decimal threshold string; `map` is the mean of
/// those values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mape: f64,
    pub ap: BTreeMap<String, f64>,
    pub map: f64,
    pub per_volume: Vec<VolumeEval>,
}

/// Decimal string key for a threshold ("6" for 6.0, "6.5" otherwise).
pub fn threshold_key(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

impl EvalReport {
    /// Evaluate estimated-vs-ground-truth centroid sets for a batch of
    /// volumes at every threshold.
    pub fn evaluate(
        volumes: &[(Vec<Point3>, Vec<Point3>)],
        thresholds: &[f64],
        spacing: [f64; 3],
    ) -> Result<EvalReport, MetricsError> {
        if thresholds.is_empty() {
            return Err(MetricsError::EmptyThresholds);
        }
        let est_counts: Vec<usize> = volumes.iter().map(|(est, _)| est.len()).collect();
        let gt_counts: Vec<usize> = volumes.iter().map(|(_, gt)| gt.len()).collect();
        let mape = mape(&est_counts, &gt_counts)?;

        let mut per_volume = Vec::with_capacity(volumes.len());
        let mut ap_sums: BTreeMap<String, f64> = BTreeMap::new();
        for (est, gt) in volumes {
            let mut per_t = BTreeMap::new();
            for &t in thresholds {
                let matching = greedy_match(est, gt, t, spacing);
                let precision = if est.is_empty() {
                    0.0
                } else {
                    matching.true_positives as f64 / est.len() as f64
                };
                let recall = if gt.is_empty() {
                    0.0
                } else {
                    matching.true_positives as f64 / gt.len() as f64
                };
                per_t.insert(
                    threshold_key(t),
                    ThresholdCounts {
                        tp: matching.true_positives,
                        fp: matching.false_positives,
                        false_negatives: matching.false_negatives,
                        precision,
                        recall,
                    },
                );
                *ap_sums.entry(threshold_key(t)).or_insert(0.0) +=
                    ap_at(est, gt, t, spacing);
            }
            per_volume.push(VolumeEval {
                gt_count: gt.len(),
                est_count: est.len(),
                per_t,
            });
        }

        let n = volumes.len() as f64;
        let ap: BTreeMap<String, f64> =
            ap_sums.into_iter().map(|(k, sum)| (k, sum / n)).collect();
        let map = ap.values().sum::<f64>() / ap.len() as f64;
        Ok(EvalReport {
            mape,
            ap,
            map,
            per_volume,
        })
    }
}
