//! Majority-vote fusion of per-axis centroid sets.

use super::{
    ahc_average_linkage, pairwise_distances, select_k_with, ClusterError, SilhouetteVariant,
};
use crate::axis::Axis;
use crate::geom::Point3;

/// The centroid set one axis contributed to fusion.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisCentroids {
    pub axis: Axis,
    pub centroids: Vec<Point3>,
}

impl AxisCentroids {
    pub fn new(axis: Axis, centroids: Vec<Point3>) -> Self {
        AxisCentroids { axis, centroids }
    }
}

/// Final fused centroids with the axes that supported each of them.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionResult {
    pub centroids: Vec<Point3>,
    pub count: usize,
    /// Distinct contributing axes per centroid, in (x, y, z) order.
    pub support: Vec<Vec<Axis>>,
}

/// Round-half-up median of the per-axis cluster counts.
fn median_count(counts: &mut [usize]) -> usize {
    counts.sort_unstable();
    let mid = counts.len() / 2;
    if counts.len() % 2 == 1 {
        counts[mid]
    } else {
        (counts[mid - 1] + counts[mid] + 1) / 2
    }
}

/// Fuse 1-3 per-axis centroid sets.
///
/// A single input passes through unchanged with single-axis support.
/// Otherwise all centroids are pooled, clustered again with average linkage,
/// and the cluster count is selected by silhouette over
/// `median(per-axis counts) +- margin` (clamped to `[2, pool size]`).
/// Clusters whose members come from fewer than 2 distinct axes are treated
/// as outliers and discarded; the surviving cluster means are the fused
/// centroids.
pub fn fuse_axes(
    inputs: &[AxisCentroids],
    margin: usize,
    spacing: [f64; 3],
    variant: SilhouetteVariant,
) -> Result<FusionResult, ClusterError> {
    if inputs.is_empty() {
        return Err(ClusterError::EmptyFusion);
    }
    for (i, input) in inputs.iter().enumerate() {
        if inputs[..i].iter().any(|other| other.axis == input.axis) {
            return Err(ClusterError::DuplicateAxis(input.axis));
        }
    }

    if inputs.len() == 1 {
        let input = &inputs[0];
        return Ok(FusionResult {
            centroids: input.centroids.clone(),
            count: input.centroids.len(),
            support: vec![vec![input.axis]; input.centroids.len()],
        });
    }

    let mut ordered: Vec<&AxisCentroids> = inputs.iter().collect();
    ordered.sort_by_key(|input| input.axis);
    let mut points = Vec::new();
    let mut point_axis = Vec::new();
    for input in &ordered {
        for c in &input.centroids {
            points.push(*c);
            point_axis.push(input.axis);
        }
    }
    let n_pool = points.len();
    let mut counts: Vec<usize> = ordered.iter().map(|i| i.centroids.len()).collect();
    let median = median_count(&mut counts);

    let k_max = (median + margin).clamp(2, n_pool);
    let k_min = median.saturating_sub(margin).clamp(2, k_max);

    let distances = pairwise_distances(&points, spacing)?;
    let dendrogram = ahc_average_linkage(&distances);
    let selected = select_k_with(&dendrogram, &distances, &points, (k_min, k_max), variant)?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); selected.k];
    for (idx, &label) in selected.labels.iter().enumerate() {
        members[label].push(idx);
    }

    let mut centroids = Vec::new();
    let mut support = Vec::new();
    for (cluster, member_indices) in members.iter().enumerate() {
        let axes: Vec<Axis> = Axis::ALL
            .into_iter()
            .filter(|axis| member_indices.iter().any(|&i| point_axis[i] == *axis))
            .collect();
        if axes.len() < 2 {
            continue; // single-axis cluster: outlier, voted out
        }
        centroids.push(selected.centroids[cluster]);
        support.push(axes);
    }

    Ok(FusionResult {
        count: centroids.len(),
        centroids,
        support,
    })
}
