//! Per-slice 2D detections: simulation from ground-truth boxes, duplicate
//! removal, and the JSON-lines interchange format.
//!
//! This is the boundary where an external 2D detector's output would enter
//! the pipeline; the simulator stands in for one by corrupting ground-truth
//! boxes with a configurable noise model.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::{slice_uv_mapping, Axis};
use crate::geom::BoundingBox2D;
use crate::rng::seeded_rng;
use crate::slicing::SliceGtBox;
use crate::volume::VolumeDims;

/// One 2D detection on one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection2D {
    pub axis: Axis,
    pub slice_index: usize,
    pub bounds: BoundingBox2D,
    pub score: f64,
}

/// Detector error model. All simulated detections carry score 1.0; the score
/// field exists so ingested real detections with confidences still parse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Isotropic Gaussian jitter on box centers, in pixels.
    #[serde(default)]
    pub sigma_center: f64,
    /// Gaussian jitter on each box half-extent, floored at 0.5 pixels.
    #[serde(default)]
    pub sigma_size: f64,
    /// Per-box drop probability.
    #[serde(default)]
    pub p_miss: f64,
    /// Expected spurious boxes per slice (Poisson).
    #[serde(default)]
    pub fp_rate: f64,
    /// Uniform side-length range for spurious boxes, in pixels.
    #[serde(default = "default_fp_size_range")]
    pub fp_size_range: [f64; 2],
    pub seed: u64,
}

fn default_fp_size_range() -> [f64; 2] {
    [4.0, 16.0]
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_center: 0.0,
            sigma_size: 0.0,
            p_miss: 0.0,
            fp_rate: 0.0,
            fp_size_range: default_fp_size_range(),
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn check(&self) -> Result<(), DetectError> {
        let finite = self.sigma_center.is_finite()
            && self.sigma_size.is_finite()
            && self.p_miss.is_finite()
            && self.fp_rate.is_finite()
            && self.fp_size_range.iter().all(|s| s.is_finite());
        if !finite {
            return Err(DetectError::InvalidNoise("all parameters must be finite".into()));
        }
        if self.sigma_center < 0.0 || self.sigma_size < 0.0 || self.fp_rate < 0.0 {
            return Err(DetectError::InvalidNoise(
                "sigma_center, sigma_size and fp_rate must be >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(DetectError::InvalidNoise("p_miss must lie in [0, 1]".into()));
        }
        let [lo, hi] = self.fp_size_range;
        if lo < 0.0 || lo > hi {
            return Err(DetectError::InvalidNoise(
                "fp_size_range must satisfy 0 <= min <= max".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: slice {slice} out of range along axis {axis} (volume has {len} slices)")]
    SliceOutOfRange {
        line: usize,
        axis: Axis,
        slice: usize,
        len: usize,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Detections grouped by axis, each group in canonical
/// (slice, u_min, v_min, ...) order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionSet {
    groups: [Vec<Detection2D>; 3],
}

fn axis_slot(axis: Axis) -> usize {
    match axis {
        Axis::X => 0,
        Axis::Y => 1,
        Axis::Z => 2,
    }
}

fn canonical_key(d: &Detection2D) -> (usize, f64, f64, f64, f64, f64) {
    (
        d.slice_index,
        d.bounds.u_min,
        d.bounds.v_min,
        d.bounds.u_max,
        d.bounds.v_max,
        d.score,
    )
}

fn canonical_cmp(a: &Detection2D, b: &Detection2D) -> std::cmp::Ordering {
    let (sa, a1, a2, a3, a4, a5) = canonical_key(a);
    let (sb, b1, b2, b3, b4, b5) = canonical_key(b);
    sa.cmp(&sb)
        .then(a1.total_cmp(&b1))
        .then(a2.total_cmp(&b2))
        .then(a3.total_cmp(&b3))
        .then(a4.total_cmp(&b4))
        .then(a5.total_cmp(&b5))
}

impl DetectionSet {
    pub fn new() -> Self {
        DetectionSet::default()
    }

    /// Build a set from arbitrary detections, establishing canonical order.
    pub fn from_detections(detections: Vec<Detection2D>) -> Self {
        let mut set = DetectionSet::new();
        for d in detections {
            set.groups[axis_slot(d.axis)].push(d);
        }
        for group in &mut set.groups {
            group.sort_by(canonical_cmp);
        }
        set
    }

    /// Ground-truth boxes as a noiseless detection set with score 1.0.
    pub fn from_gt_boxes(boxes: &[SliceGtBox]) -> Self {
        DetectionSet::from_detections(
            boxes
                .iter()
                .map(|b| Detection2D {
                    axis: b.axis,
                    slice_index: b.slice_index,
                    bounds: b.bounds,
                    score: 1.0,
                })
                .collect(),
        )
    }

    pub fn axis(&self, axis: Axis) -> &[Detection2D] {
        &self.groups[axis_slot(axis)]
    }

    /// All detections in axis (x, y, z) then canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &Detection2D> {
        self.groups.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A set holding only the requested axis group.
    pub fn only_axis(&self, axis: Axis) -> DetectionSet {
        let mut set = DetectionSet::new();
        set.groups[axis_slot(axis)] = self.axis(axis).to_vec();
        set
    }
}

/// Corrupt ground-truth boxes into a simulated detection set.
///
/// Per requested axis (processed in x, y, z order with an independent seed
/// `noise.seed ^ axis.seed_tag()`): every GT box on that axis first rolls a
/// uniform miss draw and is dropped when it falls below `p_miss` (dropped
/// boxes consume no further draws); survivors get Gaussian center jitter and
/// Gaussian half-extent jitter (floored at 0.5), are clamped to slice bounds
/// and keep score 1.0. Afterwards each slice receives Poisson(`fp_rate`)
/// spurious boxes with uniform centers and side lengths. Deterministic given
/// the seed and the input order.
pub fn simulate_detections(
    gt_boxes: &[SliceGtBox],
    dims: VolumeDims,
    noise: &NoiseModel,
    axes: &[Axis],
) -> Result<DetectionSet, DetectError> {
    noise.check()?;
    let mut detections = Vec::new();

    for axis in Axis::ALL {
        if !axes.contains(&axis) {
            continue;
        }
        let mut rng = seeded_rng(noise.seed ^ axis.seed_tag());
        let mapping = slice_uv_mapping(axis);
        let u_hi = (dims.len_along(mapping.u_axis) - 1) as f64;
        let v_hi = (dims.len_along(mapping.v_axis) - 1) as f64;

        for gt in gt_boxes.iter().filter(|b| b.axis == axis) {
            let miss_roll: f64 = rng.random();
            if miss_roll < noise.p_miss {
                continue;
            }
            let (mut u_c, mut v_c) = gt.bounds.center();
            let mut half_u = (gt.bounds.u_max - gt.bounds.u_min) / 2.0;
            let mut half_v = (gt.bounds.v_max - gt.bounds.v_min) / 2.0;
            if noise.sigma_center > 0.0 {
                let du: f64 = rng.sample(StandardNormal);
                let dv: f64 = rng.sample(StandardNormal);
                u_c += du * noise.sigma_center;
                v_c += dv * noise.sigma_center;
            }
            if noise.sigma_size > 0.0 {
                let du: f64 = rng.sample(StandardNormal);
                let dv: f64 = rng.sample(StandardNormal);
                half_u = (half_u + du * noise.sigma_size).max(0.5);
                half_v = (half_v + dv * noise.sigma_size).max(0.5);
            }
            detections.push(Detection2D {
                axis,
                slice_index: gt.slice_index,
                bounds: clamped_box(u_c, v_c, half_u, half_v, u_hi, v_hi),
                score: 1.0,
            });
        }

        if noise.fp_rate > 0.0 {
            let poisson =
                Poisson::new(noise.fp_rate).map_err(|e| DetectError::InvalidNoise(e.to_string()))?;
            for slice_index in 0..dims.len_along(axis) {
                let count = poisson.sample(&mut rng) as usize;
                for _ in 0..count {
                    let u_c = rng.random_range(0.0..=u_hi);
                    let v_c = rng.random_range(0.0..=v_hi);
                    let [s_lo, s_hi] = noise.fp_size_range;
                    let w = rng.random_range(s_lo..=s_hi);
                    let h = rng.random_range(s_lo..=s_hi);
                    detections.push(Detection2D {
                        axis,
                        slice_index,
                        bounds: clamped_box(u_c, v_c, w / 2.0, h / 2.0, u_hi, v_hi),
                        score: 1.0,
                    });
                }
            }
        }
    }

    Ok(DetectionSet::from_detections(detections))
}

fn clamped_box(u_c: f64, v_c: f64, half_u: f64, half_v: f64, u_hi: f64, v_hi: f64) -> BoundingBox2D {
    BoundingBox2D::new(
        (u_c - half_u).clamp(0.0, u_hi),
        (v_c - half_v).clamp(0.0, v_hi),
        (u_c + half_u).clamp(0.0, u_hi),
        (v_c + half_v).clamp(0.0, v_hi),
    )
}

/// Intersection-over-union under the inclusive-coordinate convention
/// (width = u_max - u_min + 1); 0 for disjoint boxes.
pub fn iou(a: &BoundingBox2D, b: &BoundingBox2D) -> f64 {
    let iw = (a.u_max.min(b.u_max) - a.u_min.max(b.u_min) + 1.0).max(0.0);
    let ih = (a.v_max.min(b.v_max) - a.v_min.max(b.v_min) + 1.0).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Greedy per-slice non-maximum suppression.
///
/// Within each (axis, slice) group the highest-score box is kept (score ties
/// fall back to the canonical group order) and every other box with
/// IoU strictly above `iou_threshold` against a kept box is suppressed.
pub fn nms(set: &DetectionSet, iou_threshold: f64) -> DetectionSet {
    assert!(
        (0.0..=1.0).contains(&iou_threshold),
        "iou_threshold must lie in [0, 1]"
    );
    let mut kept = Vec::new();
    for axis in Axis::ALL {
        let group = set.axis(axis);
        let mut start = 0;
        while start < group.len() {
            let slice = group[start].slice_index;
            let mut end = start;
            while end < group.len() && group[end].slice_index == slice {
                end += 1;
            }
            let run = &group[start..end];
            // stable sort: equal scores keep canonical order
            let mut order: Vec<usize> = (0..run.len()).collect();
            order.sort_by(|&a, &b| run[b].score.total_cmp(&run[a].score));
            let mut suppressed = vec![false; run.len()];
            for (rank, &i) in order.iter().enumerate() {
                if suppressed[i] {
                    continue;
                }
                kept.push(run[i].clone());
                for &j in &order[rank + 1..] {
                    if !suppressed[j] && iou(&run[i].bounds, &run[j].bounds) > iou_threshold {
                        suppressed[j] = true;
                    }
                }
            }
            start = end;
        }
    }
    DetectionSet::from_detections(kept)
}

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    axis: Axis,
    slice: usize,
    #[serde(rename = "box")]
    bounds: BoundingBox2D,
    score: f64,
}

/// Write a detection set as JSON lines in canonical order.
pub fn save_detections<W: Write>(set: &DetectionSet, writer: &mut W) -> Result<(), DetectError> {
    for d in set.iter() {
        let record = DetectionRecord {
            axis: d.axis,
            slice: d.slice_index,
            bounds: d.bounds,
            score: d.score,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| DetectError::Parse { line: 0, message: e.to_string() })?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Read JSON-lines detections, rejecting malformed records with their line
/// number. When `dims` is given, slice indices are checked against it.
pub fn load_detections<R: BufRead>(
    reader: R,
    dims: Option<VolumeDims>,
) -> Result<DetectionSet, DetectError> {
    let mut detections = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DetectionRecord =
            serde_json::from_str(&line).map_err(|e| DetectError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        if !(record.score > 0.0 && record.score <= 1.0) {
            return Err(DetectError::Parse {
                line: line_no,
                message: format!("score {} outside (0, 1]", record.score),
            });
        }
        if let Some(dims) = dims {
            let len = dims.len_along(record.axis);
            if record.slice >= len {
                return Err(DetectError::SliceOutOfRange {
                    line: line_no,
                    axis: record.axis,
                    slice: record.slice,
                    len,
                });
            }
        }
        detections.push(Detection2D {
            axis: record.axis,
            slice_index: record.slice,
            bounds: record.bounds,
            score: record.score,
        });
    }
    Ok(DetectionSet::from_detections(detections))
}
