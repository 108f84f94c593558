//! End-to-end fixtures through the library: volume -> slices -> detections
//! -> lifted points -> clustering -> fusion -> metrics.

use slicecluster_core::axis::Axis;
use slicecluster_core::cluster::{
    ahc_average_linkage, cluster_axis, cut, fuse_axes, lift, pairwise_distances, select_k,
    silhouette, AxisCentroids, SilhouetteVariant,
};
use slicecluster_core::detect::{simulate_detections, DetectionSet, NoiseModel};
use slicecluster_core::geom::Point3;
use slicecluster_core::metrics::greedy_match;
use slicecluster_core::slicing::gt_boxes_for_axis;
use slicecluster_core::synth::{rasterize_ellipsoid, voxel_centroid, EllipsoidSpec};
use slicecluster_core::volume::{LabeledVolume, VolumeDims};

fn volume_from_specs(dims: VolumeDims, specs: &[EllipsoidSpec]) -> LabeledVolume {
    let mut labels = vec![0u16; dims.voxel_count()];
    for spec in specs {
        for (x, y, z) in rasterize_ellipsoid(spec, dims) {
            labels[x + y * dims.x_len + z * dims.x_len * dims.y_len] = spec.label;
        }
    }
    LabeledVolume::from_labels(dims, labels).unwrap()
}

fn five_sphere_specs() -> Vec<EllipsoidSpec> {
    let centers = [
        (14.0, 14.0, 14.0),
        (48.0, 14.0, 16.0),
        (14.0, 48.0, 18.0),
        (48.0, 48.0, 46.0),
        (31.0, 31.0, 48.0),
    ];
    centers
        .iter()
        .enumerate()
        .map(|(i, &(x, y, z))| EllipsoidSpec {
            center: Point3::new(x, y, z),
            semi_axes: [7.0, 6.0, 6.5],
            rotation: [0.3 * i as f64, 0.2, 0.1 * i as f64],
            label: (i + 1) as u16,
        })
        .collect()
}

#[test]
fn five_separated_nuclei_recovered_on_every_axis_and_fused() {
    let dims = VolumeDims::cube(64);
    let specs = five_sphere_specs();
    let volume = volume_from_specs(dims, &specs);
    let gt_centroids: Vec<Point3> = (1..=5)
        .map(|label| voxel_centroid(&volume, label).unwrap())
        .collect();

    let noise = NoiseModel::default();
    let mut per_axis = Vec::new();
    for axis in Axis::ALL {
        let boxes = gt_boxes_for_axis(&volume, axis);
        let detections = simulate_detections(&boxes, dims, &noise, &[axis]).unwrap();
        let result = cluster_axis(
            &detections,
            axis,
            [1.0; 3],
            (2, 10),
            SilhouetteVariant::MeanOverOtherClusters,
        )
        .unwrap();
        assert_eq!(result.k, 5, "axis {axis}");
        let matching = greedy_match(&result.centroids, &gt_centroids, 5.0, [1.0; 3]);
        assert_eq!(matching.true_positives, 5);
        for pair in &matching.pairs {
            assert!(pair.distance < 1.0, "axis {axis}: {}", pair.distance);
        }
        per_axis.push(AxisCentroids::new(axis, result.centroids));
    }

    let fused = fuse_axes(
        &per_axis,
        5,
        [1.0; 3],
        SilhouetteVariant::MeanOverOtherClusters,
    )
    .unwrap();
    assert_eq!(fused.count, 5);
    assert!(fused.support.iter().all(|s| s.len() == 3));
    let matching = greedy_match(&fused.centroids, &gt_centroids, 5.0, [1.0; 3]);
    assert_eq!(matching.true_positives, 5);
    for pair in &matching.pairs {
        assert!(pair.distance < 1.0);
    }
}

#[test]
fn zero_noise_lifting_reproduces_gt_box_centers() {
    let dims = VolumeDims::cube(64);
    let volume = volume_from_specs(dims, &five_sphere_specs());
    for axis in Axis::ALL {
        let boxes = gt_boxes_for_axis(&volume, axis);
        let detections = simulate_detections(&boxes, dims, &NoiseModel::default(), &[axis]).unwrap();
        let lifted = lift(&detections, axis);
        let expected = lift(&DetectionSet::from_gt_boxes(&boxes), axis);
        assert_eq!(lifted, expected, "axis {axis}");
        for p in &lifted {
            let coord = match axis {
                Axis::X => p.position.x,
                Axis::Y => p.position.y,
                Axis::Z => p.position.z,
            };
            assert_eq!(coord, p.source_slice as f64);
        }
    }
}

#[test]
fn single_nucleus_with_forced_k2_is_degenerate_but_defined() {
    let dims = VolumeDims::cube(32);
    let spec = EllipsoidSpec {
        center: Point3::new(16.0, 16.0, 16.0),
        semi_axes: [5.0, 5.0, 4.4],
        rotation: [0.0; 3],
        label: 1,
    };
    let volume = volume_from_specs(dims, &[spec]);
    let boxes = gt_boxes_for_axis(&volume, Axis::Z);
    assert_eq!(boxes.len(), 9, "sphere spans 9 z-slices");
    let detections = DetectionSet::from_gt_boxes(&boxes);
    let result = cluster_axis(
        &detections,
        Axis::Z,
        [1.0; 3],
        (2, 2),
        SilhouetteVariant::MeanOverOtherClusters,
    )
    .unwrap();
    assert_eq!(result.k, 2);
    assert_eq!(result.centroids.len(), 2);
}

#[test]
fn three_tight_balls_select_three_clusters() {
    // points within radius eps of three well-separated centers
    let centers = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(60.0, 0.0, 10.0),
        Point3::new(30.0, 70.0, 40.0),
    ];
    let offsets = [
        (0.0, 0.0, 0.0),
        (0.1, -0.05, 0.02),
        (-0.08, 0.11, -0.04),
        (0.03, 0.06, 0.09),
    ];
    let mut points = Vec::new();
    for c in &centers {
        for &(dx, dy, dz) in &offsets {
            points.push(Point3::new(c.x + dx, c.y + dy, c.z + dz));
        }
    }
    let d = pairwise_distances(&points, [1.0; 3]).unwrap();
    let dend = ahc_average_linkage(&d);
    let result = select_k(&dend, &d, &points, (2, 6)).unwrap();
    assert_eq!(result.k, 3);

    // brute-force sweep confirms the argmax
    let best_by_sweep = (2..=6)
        .map(|k| {
            let labels = cut(&dend, k).unwrap();
            (k, silhouette(&d, &labels).unwrap())
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert_eq!(best_by_sweep.0, 3);
}

#[test]
fn anisotropic_spacing_changes_distances_not_centroids() {
    let dims = VolumeDims::cube(64);
    let volume = volume_from_specs(dims, &five_sphere_specs());
    let boxes = gt_boxes_for_axis(&volume, Axis::Z);
    let detections = DetectionSet::from_gt_boxes(&boxes);
    let isotropic = cluster_axis(
        &detections,
        Axis::Z,
        [1.0; 3],
        (2, 10),
        SilhouetteVariant::MeanOverOtherClusters,
    )
    .unwrap();
    let anisotropic = cluster_axis(
        &detections,
        Axis::Z,
        [1.0, 1.0, 2.0],
        (2, 10),
        SilhouetteVariant::MeanOverOtherClusters,
    )
    .unwrap();
    // same well-separated structure; centroids stay in voxel coordinates
    assert_eq!(isotropic.k, anisotropic.k);
    let m = greedy_match(&anisotropic.centroids, &isotropic.centroids, 0.5, [1.0; 3]);
    assert_eq!(m.true_positives, isotropic.k);
}
