//! 3D centroid estimation from per-slice detections.
//!
//! Detections are lifted to pseudo-3D points by reading the box center
//! through the slice coordinate convention and using the slice index as the
//! third coordinate. An average-linkage dendrogram built once over the
//! lifted points is then cut at every candidate cluster count; the count
//! with the highest silhouette score wins. Per-axis centroid sets are
//! finally fused by a second clustering pass with majority voting.

mod fusion;
mod linkage;
mod silhouette;

pub use fusion::{fuse_axes, AxisCentroids, FusionResult};
pub use linkage::{
    ahc_average_linkage, average_linkage_coefficients, cut, Dendrogram, LinkageCoefficients, Merge,
};
pub use silhouette::{silhouette, silhouette_with, SilhouetteVariant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::{slice_uv_mapping, Axis};
use crate::detect::DetectionSet;
use crate::geom::Point3;

/// A 2D detection lifted to a 3D point: the box center fills the two
/// in-slice coordinates and the slice index fills the coordinate along the
/// source axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoPoint3D {
    pub position: Point3,
    pub source_axis: Axis,
    pub source_slice: usize,
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("axis {axis} has {count} lifted points; clustering needs at least 2")]
    TooFewPoints { axis: Axis, count: usize },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("spacing {0:?} is invalid; all components must be positive and finite")]
    InvalidSpacing([f64; 3]),
    #[error("cluster count {k} out of range [1, {n}]")]
    CutOutOfRange { k: usize, n: usize },
    #[error("silhouette is undefined for {k} cluster(s); need at least 2")]
    UndefinedSilhouette { k: usize },
    #[error("labels do not cover 0..{k}: cluster {missing} is empty")]
    LabelGap { k: usize, missing: usize },
    #[error("label set and distance matrix disagree: {labels} labels vs {points} points")]
    LabelLength { labels: usize, points: usize },
    #[error("invalid cluster count range [{k_min}, {k_max}] for {n} points")]
    InvalidKRange { k_min: usize, k_max: usize, n: usize },
    #[error("fusion needs at least one per-axis result")]
    EmptyFusion,
    #[error("axis {0} appears twice in fusion input")]
    DuplicateAxis(Axis),
}

/// Condensed upper-triangular pairwise distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedDistances {
    n: usize,
    data: Vec<f64>,
}

impl CondensedDistances {
    /// Wrap an existing condensed buffer of length `n * (n - 1) / 2`.
    pub fn from_raw(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n.saturating_sub(1) / 2);
        CondensedDistances { n, data }
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Distance between points `i` and `j`; 0 on the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.data[a * self.n - a * (a + 1) / 2 + b - a - 1]
    }
}

/// Euclidean distances after per-axis multiplication by `spacing`.
pub fn pairwise_distances(
    points: &[Point3],
    spacing: [f64; 3],
) -> Result<CondensedDistances, ClusterError> {
    if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(ClusterError::InvalidSpacing(spacing));
    }
    for (index, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(ClusterError::NonFinite { index });
        }
    }
    let n = points.len();
    let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            data.push(points[i].scaled_distance(&points[j], spacing));
        }
    }
    Ok(CondensedDistances { n, data })
}

/// Lift one axis group of a detection set to pseudo-3D points, preserving
/// the group order.
pub fn lift(detections: &DetectionSet, axis: Axis) -> Vec<PseudoPoint3D> {
    let mapping = slice_uv_mapping(axis);
    detections
        .axis(axis)
        .iter()
        .map(|d| {
            let (u, v) = d.bounds.center();
            let (x, y, z) = mapping.to_volume(u, v, d.slice_index as f64);
            PseudoPoint3D {
                position: Point3::new(x, y, z),
                source_axis: axis,
                source_slice: d.slice_index,
            }
        })
        .collect()
}

/// A clustering at a chosen cluster count.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub k: usize,
    /// Per-point cluster assignment in `0..k`.
    pub labels: Vec<usize>,
    /// Mean position of each cluster, in unscaled voxel coordinates.
    pub centroids: Vec<Point3>,
    /// Silhouette score of the selected clustering; `None` when undefined
    /// (k = 1 pass-through results).
    pub silhouette: Option<f64>,
}

/// Mean position per cluster label.
pub fn centroids_of(points: &[Point3], labels: &[usize], k: usize) -> Vec<Point3> {
    let mut sums = vec![[0.0f64; 3]; k];
    let mut counts = vec![0usize; k];
    for (p, &label) in points.iter().zip(labels) {
        sums[label][0] += p.x;
        sums[label][1] += p.y;
        sums[label][2] += p.z;
        counts[label] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| {
            let n = c as f64;
            Point3::new(s[0] / n, s[1] / n, s[2] / n)
        })
        .collect()
}

/// Sweep cluster counts over `[k_min, k_max]`, scoring each cut of the
/// dendrogram by silhouette, and return the best clustering (ties prefer the
/// smaller count). Uses the mean-over-other-clusters silhouette.
pub fn select_k(
    dendrogram: &Dendrogram,
    distances: &CondensedDistances,
    points: &[Point3],
    k_range: (usize, usize),
) -> Result<ClusterResult, ClusterError> {
    select_k_with(
        dendrogram,
        distances,
        points,
        k_range,
        SilhouetteVariant::MeanOverOtherClusters,
    )
}

/// [`select_k`] with an explicit silhouette variant.
pub fn select_k_with(
    dendrogram: &Dendrogram,
    distances: &CondensedDistances,
    points: &[Point3],
    (k_min, k_max): (usize, usize),
    variant: SilhouetteVariant,
) -> Result<ClusterResult, ClusterError> {
    let n = distances.n_points();
    if n < 2 || k_min < 2 || k_min > k_max || k_max > n {
        return Err(ClusterError::InvalidKRange { k_min, k_max, n });
    }
    debug_assert_eq!(points.len(), n);

    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for k in k_min..=k_max {
        let labels = cut(dendrogram, k)?;
        let score = silhouette_with(distances, &labels, variant)?;
        let improves = match &best {
            Some((best_score, _, _)) => score > *best_score,
            None => true,
        };
        if improves {
            best = Some((score, k, labels));
        }
    }
    let (score, k, labels) = best.expect("k range is non-empty");
    let centroids = centroids_of(points, &labels, k);
    Ok(ClusterResult {
        k,
        labels,
        centroids,
        silhouette: Some(score),
    })
}

/// Full per-axis pipeline: lift, distances, dendrogram, silhouette sweep.
///
/// `spacing` is applied only inside the distance computation; reported
/// centroids stay in unscaled voxel coordinates. The requested range is
/// clamped to the number of lifted points.
pub fn cluster_axis(
    detections: &DetectionSet,
    axis: Axis,
    spacing: [f64; 3],
    k_range: (usize, usize),
    variant: SilhouetteVariant,
) -> Result<ClusterResult, ClusterError> {
    let lifted = lift(detections, axis);
    if lifted.len() < 2 {
        return Err(ClusterError::TooFewPoints {
            axis,
            count: lifted.len(),
        });
    }
    let points: Vec<Point3> = lifted.iter().map(|p| p.position).collect();
    let distances = pairwise_distances(&points, spacing)?;
    let dendrogram = ahc_average_linkage(&distances);
    let k_max = k_range.1.min(points.len());
    let k_min = k_range.0.min(k_max).max(2);
    select_k_with(&dendrogram, &distances, &points, (k_min, k_max), variant)
}

/// Serialized form of a per-axis clustering result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResultFile {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub axis: Option<Axis>,
    pub k: usize,
    pub silhouette: Option<f64>,
    pub centroids: Vec<Point3>,
}

impl ClusterResultFile {
    pub fn from_result(axis: Option<Axis>, result: &ClusterResult) -> Self {
        ClusterResultFile {
            axis,
            k: result.k,
            silhouette: result.silhouette,
            centroids: result.centroids.clone(),
        }
    }
}

/// Serialized form of a fused (final) centroid set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionResultFile {
    pub count: usize,
    pub centroids: Vec<Point3>,
    pub support: Vec<Vec<Axis>>,
}

impl From<&FusionResult> for FusionResultFile {
    fn from(result: &FusionResult) -> Self {
        FusionResultFile {
            count: result.count,
            centroids: result.centroids.clone(),
            support: result.support.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{Detection2D, DetectionSet};
    use crate::geom::BoundingBox2D;

    fn detection(axis: Axis, slice: usize, bounds: BoundingBox2D) -> Detection2D {
        Detection2D {
            axis,
            slice_index: slice,
            bounds,
            score: 1.0,
        }
    }

    #[test]
    fn lift_follows_the_slice_convention() {
        let set = DetectionSet::from_detections(vec![
            detection(Axis::Z, 15, BoundingBox2D::new(10.0, 12.0, 20.0, 22.0)),
            detection(Axis::X, 3, BoundingBox2D::new(5.0, 7.0, 5.0, 7.0)),
        ]);
        let z = lift(&set, Axis::Z);
        assert_eq!(z.len(), 1);
        assert_eq!(z[0].position, Point3::new(15.0, 17.0, 15.0));
        assert_eq!(z[0].source_slice, 15);

        let x = lift(&set, Axis::X);
        assert_eq!(x[0].position, Point3::new(3.0, 5.0, 7.0));

        assert!(lift(&set, Axis::Y).is_empty());
    }

    #[test]
    fn lifted_coordinate_along_source_axis_is_the_slice_index() {
        let set = DetectionSet::from_detections(
            (0..20)
                .map(|i| {
                    detection(
                        Axis::Y,
                        i,
                        BoundingBox2D::new(i as f64, 2.0, i as f64 + 3.0, 8.0),
                    )
                })
                .collect(),
        );
        for p in lift(&set, Axis::Y) {
            assert_eq!(p.position.y, p.source_slice as f64);
        }
    }

    #[test]
    fn pairwise_distance_cases() {
        let points = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 4.0, 0.0)];
        let d = pairwise_distances(&points, [1.0; 3]).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(1, 1), 0.0);

        let scaled = pairwise_distances(&points, [2.0, 1.0, 1.0]).unwrap();
        assert_eq!(scaled.get(0, 1), 52.0_f64.sqrt());

        let single = pairwise_distances(&points[..1], [1.0; 3]).unwrap();
        assert_eq!(single.n_points(), 1);
        assert!(single.data().is_empty());
    }

    #[test]
    fn pairwise_rejects_bad_input() {
        let points = vec![Point3::new(0.0, 0.0, f64::NAN)];
        assert!(matches!(
            pairwise_distances(&points, [1.0; 3]),
            Err(ClusterError::NonFinite { index: 0 })
        ));
        assert!(matches!(
            pairwise_distances(&[], [0.0, 1.0, 1.0]),
            Err(ClusterError::InvalidSpacing(_))
        ));
    }

    #[test]
    fn select_k_finds_two_tight_pairs() {
        let points = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(100.0, 0.0, 0.0),
            Point3::new(100.0, 0.0, 1.0),
        ];
        let d = pairwise_distances(&points, [1.0; 3]).unwrap();
        let dend = ahc_average_linkage(&d);
        let result = select_k(&dend, &d, &points, (2, 4)).unwrap();
        assert_eq!(result.k, 2);
        assert_eq!(result.labels, vec![0, 0, 1, 1]);
        assert!((result.silhouette.unwrap() - 0.990_000_25).abs() < 1e-6);
        assert_eq!(result.centroids[0], Point3::new(0.0, 0.0, 0.5));
        assert_eq!(result.centroids[1], Point3::new(100.0, 0.0, 0.5));
    }

    #[test]
    fn select_k_single_candidate_range() {
        let points = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(50.0, 0.0, 0.0),
        ];
        let d = pairwise_distances(&points, [1.0; 3]).unwrap();
        let dend = ahc_average_linkage(&d);
        let result = select_k(&dend, &d, &points, (2, 2)).unwrap();
        assert_eq!(result.k, 2);
    }

    #[test]
    fn select_k_rejects_bad_ranges() {
        let points = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let d = pairwise_distances(&points, [1.0; 3]).unwrap();
        let dend = ahc_average_linkage(&d);
        assert!(select_k(&dend, &d, &points, (2, 3)).is_err());
        assert!(select_k(&dend, &d, &points, (3, 2)).is_err());
        assert!(select_k(&dend, &d, &points, (1, 2)).is_err());
    }

    #[test]
    fn cluster_axis_needs_two_points() {
        let set = DetectionSet::from_detections(vec![detection(
            Axis::Z,
            4,
            BoundingBox2D::new(0.0, 0.0, 2.0, 2.0),
        )]);
        assert!(matches!(
            cluster_axis(
                &set,
                Axis::Z,
                [1.0; 3],
                (2, 8),
                SilhouetteVariant::MeanOverOtherClusters
            ),
            Err(ClusterError::TooFewPoints { axis: Axis::Z, count: 1 })
        ));
    }

    #[test]
    fn cluster_axis_handles_a_single_slice_plane() {
        // all z equal: distances are in-plane, clustering stays well-defined
        let set = DetectionSet::from_detections(vec![
            detection(Axis::Z, 4, BoundingBox2D::new(0.0, 0.0, 2.0, 2.0)),
            detection(Axis::Z, 4, BoundingBox2D::new(1.0, 0.0, 3.0, 2.0)),
            detection(Axis::Z, 4, BoundingBox2D::new(40.0, 40.0, 44.0, 44.0)),
            detection(Axis::Z, 4, BoundingBox2D::new(41.0, 40.0, 45.0, 44.0)),
        ]);
        let result = cluster_axis(
            &set,
            Axis::Z,
            [1.0; 3],
            (2, 4),
            SilhouetteVariant::MeanOverOtherClusters,
        )
        .unwrap();
        assert_eq!(result.k, 2);
        assert!(result.centroids.iter().all(|c| c.z == 4.0));
    }

    #[test]
    fn result_files_round_trip() {
        let result = ClusterResult {
            k: 2,
            labels: vec![0, 1],
            centroids: vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)],
            silhouette: Some(0.5),
        };
        let file = ClusterResultFile::from_result(Some(Axis::Z), &result);
        let json = serde_json::to_string(&file).unwrap();
        assert_eq!(serde_json::from_str::<ClusterResultFile>(&json).unwrap(), file);

        let fusion = FusionResult {
            centroids: vec![Point3::new(0.0, 0.0, 0.0)],
            count: 1,
            support: vec![vec![Axis::X, Axis::Z]],
        };
        let file = FusionResultFile::from(&fusion);
        let json = serde_json::to_string(&file).unwrap();
        assert_eq!(serde_json::from_str::<FusionResultFile>(&json).unwrap(), file);
    }
}
