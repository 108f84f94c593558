//! Silhouette scoring of a labeled clustering.

use serde::{Deserialize, Serialize};

use super::{ClusterError, CondensedDistances};

/// How the inter-cluster term `b(i)` aggregates over the other clusters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SilhouetteVariant {
    /// `b(i)` is the mean over the other clusters of the mean distance from
    /// `i` to each cluster's members. This is the scoring the cluster-count
    /// selection uses.
    #[default]
    #[serde(rename = "mean")]
    MeanOverOtherClusters,
    /// Conventional silhouette: `b(i)` is the minimum of those per-cluster
    /// mean distances. Offered for comparison.
    #[serde(rename = "nearest")]
    NearestOtherCluster,
}

/// Mean silhouette score with the default mean-over-clusters variant.
///
/// Per point `i` in cluster `c`: `a(i)` is the mean distance to the other
/// members of `c` (0 for singletons), `b(i)` aggregates the mean distances
/// to every other cluster, and `s(i) = (b - a) / max(a, b)` with `s(i) = 0`
/// for singleton clusters and when `max(a, b) = 0`. The score is the mean
/// of `s(i)` and needs at least 2 clusters over at least 2 points.
pub fn silhouette(distances: &CondensedDistances, labels: &[usize]) -> Result<f64, ClusterError> {
    silhouette_with(distances, labels, SilhouetteVariant::MeanOverOtherClusters)
}

/// [`silhouette`] with an explicit variant.
pub fn silhouette_with(
    distances: &CondensedDistances,
    labels: &[usize],
    variant: SilhouetteVariant,
) -> Result<f64, ClusterError> {
    let n = distances.n_points();
    if labels.len() != n {
        return Err(ClusterError::LabelLength {
            labels: labels.len(),
            points: n,
        });
    }
    let k = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    if k < 2 || n < 2 {
        return Err(ClusterError::UndefinedSilhouette { k });
    }
    let mut counts = vec![0usize; k];
    for &label in labels {
        counts[label] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(ClusterError::LabelGap { k, missing });
    }

    // per-point sum of distances to each cluster
    let mut sums = vec![0.0f64; n * k];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distances.get(i, j);
            sums[i * k + labels[j]] += d;
            sums[j * k + labels[i]] += d;
        }
    }

    let mut total = 0.0;
    for i in 0..n {
        let c = labels[i];
        if counts[c] == 1 {
            continue; // singleton: s(i) = 0
        }
        let a = sums[i * k + c] / (counts[c] - 1) as f64;
        let b = match variant {
            SilhouetteVariant::MeanOverOtherClusters => {
                let mut acc = 0.0;
                for q in 0..k {
                    if q != c {
                        acc += sums[i * k + q] / counts[q] as f64;
                    }
                }
                acc / (k - 1) as f64
            }
            SilhouetteVariant::NearestOtherCluster => {
                let mut best = f64::INFINITY;
                for q in 0..k {
                    if q != c {
                        best = best.min(sums[i * k + q] / counts[q] as f64);
                    }
                }
                best
            }
        };
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}
