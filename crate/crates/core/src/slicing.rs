//! 2D slices of labeled volumes and tight per-label bounding boxes.

use std::collections::BTreeMap;

use crate::axis::{slice_uv_mapping, Axis};
use crate::geom::BoundingBox2D;
use crate::volume::{LabeledVolume, VolumeError};

/// One focal plane of a labeled volume, stored in `(u, v)` order with `u`
/// fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceImage {
    pub axis: Axis,
    pub index: usize,
    pub u_len: usize,
    pub v_len: usize,
    data: Vec<u16>,
}

impl SliceImage {
    pub fn pixel(&self, u: usize, v: usize) -> u16 {
        self.data[v * self.u_len + u]
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }
}

/// Tight ground-truth bounding box of one label on one slice.
///
/// Coordinates are inclusive voxel-center positions, so a single-voxel
/// cross-section yields a zero-area box whose center is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceGtBox {
    pub axis: Axis,
    pub slice_index: usize,
    pub label: u16,
    pub bounds: BoundingBox2D,
}

/// Extract the slice at index `p` along `axis`.
pub fn extract_slice(
    volume: &LabeledVolume,
    axis: Axis,
    p: usize,
) -> Result<SliceImage, VolumeError> {
    let dims = volume.dims();
    let len = dims.len_along(axis);
    if p >= len {
        return Err(VolumeError::SliceOutOfRange { axis, index: p, len });
    }
    let mapping = slice_uv_mapping(axis);
    let u_len = dims.len_along(mapping.u_axis);
    let v_len = dims.len_along(mapping.v_axis);
    let mut data = vec![0u16; u_len * v_len];
    for v in 0..v_len {
        for u in 0..u_len {
            let (x, y, z) = mapping.to_volume(u, v, p);
            data[v * u_len + u] = volume.get(x, y, z);
        }
    }
    Ok(SliceImage {
        axis,
        index: p,
        u_len,
        v_len,
        data,
    })
}

/// Tight boxes for every label present on the slice, sorted by label.
///
/// Labels with an empty cross-section at `p` simply produce no box.
pub fn gt_boxes_for_slice(
    volume: &LabeledVolume,
    axis: Axis,
    p: usize,
) -> Result<Vec<SliceGtBox>, VolumeError> {
    let slice = extract_slice(volume, axis, p)?;
    let mut extents: BTreeMap<u16, (usize, usize, usize, usize)> = BTreeMap::new();
    for v in 0..slice.v_len {
        for u in 0..slice.u_len {
            let label = slice.pixel(u, v);
            if label == 0 {
                continue;
            }
            let entry = extents.entry(label).or_insert((u, v, u, v));
            entry.0 = entry.0.min(u);
            entry.1 = entry.1.min(v);
            entry.2 = entry.2.max(u);
            entry.3 = entry.3.max(v);
        }
    }
    Ok(extents
        .into_iter()
        .map(|(label, (u_min, v_min, u_max, v_max))| SliceGtBox {
            axis,
            slice_index: p,
            label,
            bounds: BoundingBox2D::new(u_min as f64, v_min as f64, u_max as f64, v_max as f64),
        })
        .collect())
}

/// Ground-truth boxes for every slice along `axis`, ordered by slice then
/// label.
pub fn gt_boxes_for_axis(volume: &LabeledVolume, axis: Axis) -> Vec<SliceGtBox> {
    let len = volume.dims().len_along(axis);
    (0..len)
        .flat_map(|p| gt_boxes_for_slice(volume, axis, p).expect("slice index in range"))
        .collect()
}
