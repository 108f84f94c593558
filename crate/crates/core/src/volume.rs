//! Dense labeled volumes and their raw on-disk format.
//!
//! Voxel storage order is x-fastest, then y, then z:
//! `index = x + y * x_len + z * x_len * y_len`. Voxel centers sit at integer
//! coordinates; a slice at index `p` along an axis contains exactly the
//! voxels whose coordinate on that axis equals `p`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::Axis;

/// Volume extents in voxels, all at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeDims {
    pub x_len: usize,
    pub y_len: usize,
    pub z_len: usize,
}

impl VolumeDims {
    pub fn new(x_len: usize, y_len: usize, z_len: usize) -> Self {
        VolumeDims { x_len, y_len, z_len }
    }

    pub fn cube(len: usize) -> Self {
        VolumeDims::new(len, len, len)
    }

    pub fn voxel_count(&self) -> usize {
        self.x_len * self.y_len * self.z_len
    }

    pub fn len_along(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.x_len,
            Axis::Y => self.y_len,
            Axis::Z => self.z_len,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x_len >= 1 && self.y_len >= 1 && self.z_len >= 1
    }
}

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("voxel ({x}, {y}, {z}) out of bounds for volume {dims:?}")]
    OutOfBounds { x: usize, y: usize, z: usize, dims: VolumeDims },
    #[error("slice {index} out of range along axis {axis}; volume has {len} slices")]
    SliceOutOfRange { axis: Axis, index: usize, len: usize },
    #[error("volume dims {dims:?} are invalid; all extents must be >= 1")]
    InvalidDims { dims: VolumeDims },
    #[error("label buffer holds {got} voxels but dims {dims:?} require {expected}")]
    LengthMismatch { got: usize, expected: usize, dims: VolumeDims },
    #[error("labels are not contiguous: max label is {max_label} but {missing} never occurs")]
    NonContiguousLabels { max_label: u16, missing: u16 },
    #[error("unsupported volume header {field}: {value:?}")]
    UnsupportedHeader { field: &'static str, value: String },
    #[error("raw payload is {got} bytes but the header implies {expected}")]
    PayloadSize { got: usize, expected: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("volume header parse error: {0}")]
    HeaderParse(#[from] serde_json::Error),
}

/// A dense 3D grid of per-voxel instance labels.
///
/// Label 0 is background; the nonzero labels present are always the
/// contiguous set `{1..=K}` for some `K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledVolume {
    dims: VolumeDims,
    labels: Vec<u16>,
}

impl LabeledVolume {
    /// An all-background volume.
    pub fn zeros(dims: VolumeDims) -> Result<Self, VolumeError> {
        if !dims.is_valid() {
            return Err(VolumeError::InvalidDims { dims });
        }
        Ok(LabeledVolume {
            dims,
            labels: vec![0; dims.voxel_count()],
        })
    }

    /// Wrap a raw label buffer, checking length and label contiguity.
    pub fn from_labels(dims: VolumeDims, labels: Vec<u16>) -> Result<Self, VolumeError> {
        if !dims.is_valid() {
            return Err(VolumeError::InvalidDims { dims });
        }
        if labels.len() != dims.voxel_count() {
            return Err(VolumeError::LengthMismatch {
                got: labels.len(),
                expected: dims.voxel_count(),
                dims,
            });
        }
        let volume = LabeledVolume { dims, labels };
        volume.check_contiguous_labels()?;
        Ok(volume)
    }

    fn check_contiguous_labels(&self) -> Result<(), VolumeError> {
        let max_label = self.labels.iter().copied().max().unwrap_or(0);
        if max_label == 0 {
            return Ok(());
        }
        let mut seen = vec![false; usize::from(max_label) + 1];
        for &label in &self.labels {
            seen[usize::from(label)] = true;
        }
        for label in 1..=max_label {
            if !seen[usize::from(label)] {
                return Err(VolumeError::NonContiguousLabels {
                    max_label,
                    missing: label,
                });
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> VolumeDims {
        self.dims
    }

    /// Raw labels in storage order.
    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Highest label present (`K`), 0 for an empty volume.
    pub fn max_label(&self) -> u16 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize, z: usize) -> usize {
        x + y * self.dims.x_len + z * self.dims.x_len * self.dims.y_len
    }

    /// Bounds-checked voxel read.
    pub fn voxel_at(&self, x: usize, y: usize, z: usize) -> Result<u16, VolumeError> {
        if x >= self.dims.x_len || y >= self.dims.y_len || z >= self.dims.z_len {
            return Err(VolumeError::OutOfBounds {
                x,
                y,
                z,
                dims: self.dims,
            });
        }
        Ok(self.labels[self.index_of(x, y, z)])
    }

    /// Unchecked read for hot loops that have already validated bounds.
    #[inline]
    pub(crate) fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.labels[self.index_of(x, y, z)]
    }

    #[inline]
    pub(crate) fn set(&mut self, x: usize, y: usize, z: usize, label: u16) {
        let idx = self.index_of(x, y, z);
        self.labels[idx] = label;
    }

    /// Write the little-endian u16 payload plus its JSON sidecar header.
    pub fn save_raw(&self, raw_path: &Path, header_path: &Path) -> Result<(), VolumeError> {
        let mut writer = BufWriter::new(File::create(raw_path)?);
        for &label in &self.labels {
            writer.write_all(&label.to_le_bytes())?;
        }
        writer.flush()?;

        let header = VolumeHeader::for_dims(self.dims);
        let mut header_writer = BufWriter::new(File::create(header_path)?);
        serde_json::to_writer_pretty(&mut header_writer, &header)?;
        header_writer.write_all(b"\n")?;
        header_writer.flush()?;
        Ok(())
    }

    pub fn load_raw(raw_path: &Path, header_path: &Path) -> Result<Self, VolumeError> {
        let header: VolumeHeader = serde_json::from_reader(BufReader::new(File::open(header_path)?))?;
        header.validate()?;
        let dims = header.dims();

        let mut bytes = Vec::new();
        BufReader::new(File::open(raw_path)?).read_to_end(&mut bytes)?;
        let expected = dims.voxel_count() * 2;
        if bytes.len() != expected {
            return Err(VolumeError::PayloadSize {
                got: bytes.len(),
                expected,
            });
        }
        let labels = bytes
            .chunks_exact(2)
            .map(|pair| u16::from_le_bytes([pair[0], pair[1]]))
            .collect();
        LabeledVolume::from_labels(dims, labels)
    }
}

/// JSON sidecar describing a raw volume payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub x_len: usize,
    pub y_len: usize,
    pub z_len: usize,
    pub dtype: String,
    pub order: String,
}

impl VolumeHeader {
    pub fn for_dims(dims: VolumeDims) -> Self {
        VolumeHeader {
            x_len: dims.x_len,
            y_len: dims.y_len,
            z_len: dims.z_len,
            dtype: "u16".to_string(),
            order: "x-fastest".to_string(),
        }
    }

    pub fn dims(&self) -> VolumeDims {
        VolumeDims::new(self.x_len, self.y_len, self.z_len)
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        if self.dtype != "u16" {
            return Err(VolumeError::UnsupportedHeader {
                field: "dtype",
                value: self.dtype.clone(),
            });
        }
        if self.order != "x-fastest" {
            return Err(VolumeError::UnsupportedHeader {
                field: "order",
                value: self.order.clone(),
            });
        }
        if !self.dims().is_valid() {
            return Err(VolumeError::InvalidDims { dims: self.dims() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_volume_reads_zero() {
        let v = LabeledVolume::zeros(VolumeDims::cube(4)).unwrap();
        assert_eq!(v.voxel_at(0, 0, 0).unwrap(), 0);
        assert_eq!(v.voxel_at(3, 3, 3).unwrap(), 0);
    }

    #[test]
    fn single_voxel_label() {
        let mut v = LabeledVolume::zeros(VolumeDims::cube(4)).unwrap();
        v.set(1, 1, 1, 3);
        assert_eq!(v.voxel_at(1, 1, 1).unwrap(), 3);
        assert_eq!(v.voxel_at(1, 1, 2).unwrap(), 0);
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let v = LabeledVolume::zeros(VolumeDims::new(4, 5, 6)).unwrap();
        assert!(matches!(
            v.voxel_at(4, 0, 0),
            Err(VolumeError::OutOfBounds { x: 4, .. })
        ));
    }

    #[test]
    fn storage_order_is_x_fastest() {
        let mut v = LabeledVolume::zeros(VolumeDims::new(2, 3, 4)).unwrap();
        v.set(1, 2, 3, 1);
        let idx = 1 + 2 * 2 + 3 * 2 * 3;
        assert_eq!(v.labels()[idx], 1);
    }

    #[test]
    fn contiguity_enforced() {
        let dims = VolumeDims::new(2, 1, 1);
        assert!(LabeledVolume::from_labels(dims, vec![1, 3]).is_err());
        assert!(LabeledVolume::from_labels(dims, vec![2, 1]).is_ok());
        assert!(LabeledVolume::from_labels(dims, vec![0, 0]).is_ok());
    }

    #[test]
    fn raw_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("volume.raw");
        let header = dir.path().join("volume.json");

        let mut v = LabeledVolume::zeros(VolumeDims::new(3, 4, 5)).unwrap();
        v.set(0, 0, 0, 1);
        v.set(2, 3, 4, 2);
        v.set(1, 2, 3, 3);
        v.save_raw(&raw, &header).unwrap();

        let loaded = LabeledVolume::load_raw(&raw, &header).unwrap();
        assert_eq!(loaded, v);

        let bytes_a = std::fs::read(&raw).unwrap();
        loaded.save_raw(&raw, &header).unwrap();
        let bytes_b = std::fs::read(&raw).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn load_rejects_bad_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("volume.raw");
        let header = dir.path().join("volume.json");
        let v = LabeledVolume::zeros(VolumeDims::cube(2)).unwrap();
        v.save_raw(&raw, &header).unwrap();

        std::fs::write(&raw, [0u8; 4]).unwrap();
        assert!(matches!(
            LabeledVolume::load_raw(&raw, &header),
            Err(VolumeError::PayloadSize { .. })
        ));

        std::fs::write(
            &header,
            r#"{"x_len":2,"y_len":2,"z_len":2,"dtype":"u8","order":"x-fastest"}"#,
        )
        .unwrap();
        assert!(matches!(
            LabeledVolume::load_raw(&raw, &header),
            Err(VolumeError::UnsupportedHeader { field: "dtype", .. })
        ));
    }
}
