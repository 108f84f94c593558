//! Synthetic labeled volumes of randomly placed, rotated ellipsoidal nuclei.
//!
//! Nuclei are placed sequentially; a candidate is accepted only when its
//! rasterized voxel set overlaps every previously placed nucleus by at most
//! the configured voxel budget. Within shared voxels the later label wins,
//! but ground-truth centroids are computed from each nucleus's own
//! pre-overwrite voxel set so they stay unbiased.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point3;
use crate::rng::seeded_rng;
use crate::volume::{LabeledVolume, VolumeDims};

/// One synthetic nucleus: an ellipsoid with center, semi-axes, extrinsic
/// rotation angles (applied x-then-y-then-z) and an instance label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    pub center: Point3,
    pub semi_axes: [f64; 3],
    pub rotation: [f64; 3],
    pub label: u16,
}

impl EllipsoidSpec {
    pub fn check(&self) -> Result<(), SynthError> {
        if !self.center.is_finite() {
            return Err(SynthError::InvalidSpec("center must be finite".into()));
        }
        if self.semi_axes.iter().any(|a| !a.is_finite() || *a < 1.0) {
            return Err(SynthError::InvalidSpec(
                "semi-axes must be finite and >= 1".into(),
            ));
        }
        if self.rotation.iter().any(|t| !t.is_finite()) {
            return Err(SynthError::InvalidSpec("rotation angles must be finite".into()));
        }
        if self.label == 0 {
            return Err(SynthError::InvalidSpec("label must be >= 1".into()));
        }
        Ok(())
    }
}

/// Parameters for [`place_nuclei`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dims: VolumeDims,
    pub n_nuclei: usize,
    /// `[a_min, a_max]`, each semi-axis drawn uniformly from this range.
    pub semi_axis_range: [f64; 2],
    /// Maximum voxels any two nuclei may share.
    pub max_overlap_voxels: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts_per_nucleus: usize,
    /// Margin kept between sampled centers and each volume face, in voxels.
    /// 0 keeps border clipping possible, which is intentional.
    #[serde(default)]
    pub center_margin: f64,
    pub seed: u64,
}

fn default_max_attempts() -> usize {
    1000
}

impl SynthConfig {
    pub fn check(&self) -> Result<(), SynthError> {
        if !self.dims.is_valid() {
            return Err(SynthError::InvalidConfig("dims must all be >= 1".into()));
        }
        let [a_min, a_max] = self.semi_axis_range;
        if !(a_min.is_finite() && a_max.is_finite()) || a_min < 1.0 || a_min > a_max {
            return Err(SynthError::InvalidConfig(
                "semi_axis_range must satisfy 1 <= a_min <= a_max".into(),
            ));
        }
        if self.max_attempts_per_nucleus < 1 {
            return Err(SynthError::InvalidConfig(
                "max_attempts_per_nucleus must be >= 1".into(),
            ));
        }
        if self.n_nuclei > usize::from(u16::MAX) {
            return Err(SynthError::InvalidConfig(format!(
                "n_nuclei {} exceeds the u16 label range",
                self.n_nuclei
            )));
        }
        if !self.center_margin.is_finite() || self.center_margin < 0.0 {
            return Err(SynthError::InvalidConfig("center_margin must be >= 0".into()));
        }
        let min_len = self
            .dims
            .x_len
            .min(self.dims.y_len)
            .min(self.dims.z_len);
        if self.n_nuclei > 0 && 2.0 * self.center_margin > (min_len - 1) as f64 {
            return Err(SynthError::InvalidConfig(
                "center_margin leaves no room to sample centers".into(),
            ));
        }
        Ok(())
    }
}

/// Exact ground truth for a generated volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub count: usize,
    pub nuclei: Vec<NucleusTruth>,
}

/// Placement parameters plus the voxel-mass centroid of one nucleus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NucleusTruth {
    pub label: u16,
    pub center: Point3,
    pub semi_axes: [f64; 3],
    pub rotation: [f64; 3],
    pub centroid: Point3,
}

impl GroundTruth {
    pub fn centroids(&self) -> Vec<Point3> {
        self.nuclei.iter().map(|n| n.centroid).collect()
    }

    pub fn specs(&self) -> Vec<EllipsoidSpec> {
        self.nuclei
            .iter()
            .map(|n| EllipsoidSpec {
                center: n.center,
                semi_axes: n.semi_axes,
                rotation: n.rotation,
                label: n.label,
            })
            .collect()
    }

    pub fn save_json(&self, path: &Path) -> Result<(), SynthError> {
        let mut writer = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut writer, self)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, SynthError> {
        let truth: GroundTruth = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if truth.count != truth.nuclei.len() {
            return Err(SynthError::InvalidConfig(format!(
                "ground truth count {} does not match {} nuclei",
                truth.count,
                truth.nuclei.len()
            )));
        }
        Ok(truth)
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("invalid ellipsoid spec: {0}")]
    InvalidSpec(String),
    #[error("failed to place nucleus {nucleus} within {attempts} attempts")]
    PlacementFailed { nucleus: u16, attempts: usize },
    #[error("label {0} not present in volume")]
    LabelNotFound(u16),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Rotation matrix `R = Rz(tz) * Ry(ty) * Rx(tx)` for extrinsic rotations
/// applied in x-then-y-then-z order.
fn rotation_matrix([tx, ty, tz]: [f64; 3]) -> [[f64; 3]; 3] {
    let (sx, cx) = tx.sin_cos();
    let (sy, cy) = ty.sin_cos();
    let (sz, cz) = tz.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Rasterize an ellipsoid onto the voxel grid.
///
/// A voxel `(x, y, z)` belongs to the ellipsoid iff, with
/// `w = R^T * ((x, y, z) - center)`, the quadric
/// `(w0/a0)^2 + (w1/a1)^2 + (w2/a2)^2 < 1` holds, and the voxel lies inside
/// `dims`. The result may be empty when the ellipsoid sits outside the
/// volume; nuclei clipped at the border keep their in-bounds voxels.
pub fn rasterize_ellipsoid(spec: &EllipsoidSpec, dims: VolumeDims) -> Vec<(usize, usize, usize)> {
    let rot = rotation_matrix(spec.rotation);
    let radius = spec.semi_axes[0].max(spec.semi_axes[1]).max(spec.semi_axes[2]);
    let c = spec.center;

    let lo = |center: f64| ((center - radius).ceil().max(0.0)) as i64;
    let hi = |center: f64, len: usize| ((center + radius).floor().min((len - 1) as f64)) as i64;

    let (x0, x1) = (lo(c.x), hi(c.x, dims.x_len));
    let (y0, y1) = (lo(c.y), hi(c.y, dims.y_len));
    let (z0, z1) = (lo(c.z), hi(c.z, dims.z_len));

    let inv_sq = [
        1.0 / (spec.semi_axes[0] * spec.semi_axes[0]),
        1.0 / (spec.semi_axes[1] * spec.semi_axes[1]),
        1.0 / (spec.semi_axes[2] * spec.semi_axes[2]),
    ];

    let mut voxels = Vec::new();
    for z in z0..=z1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = [x as f64 - c.x, y as f64 - c.y, z as f64 - c.z];
                // R^T rows are R columns; rotation inverse is the transpose.
                let mut q = 0.0;
                for (axis, inv) in inv_sq.iter().enumerate() {
                    let w = rot[0][axis] * d[0] + rot[1][axis] * d[1] + rot[2][axis] * d[2];
                    q += w * w * inv;
                }
                if q < 1.0 {
                    voxels.push((x as usize, y as usize, z as usize));
                }
            }
        }
    }
    voxels
}

/// Arithmetic mean of the integer coordinates of all voxels carrying `label`
/// in the (post-overwrite) volume.
pub fn voxel_centroid(volume: &LabeledVolume, label: u16) -> Result<Point3, SynthError> {
    let dims = volume.dims();
    let mut sum = [0.0; 3];
    let mut count = 0usize;
    for z in 0..dims.z_len {
        for y in 0..dims.y_len {
            for x in 0..dims.x_len {
                if volume.get(x, y, z) == label && label != 0 {
                    sum[0] += x as f64;
                    sum[1] += y as f64;
                    sum[2] += z as f64;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(SynthError::LabelNotFound(label));
    }
    let n = count as f64;
    Ok(Point3::new(sum[0] / n, sum[1] / n, sum[2] / n))
}

fn centroid_of_voxels(voxels: &[(usize, usize, usize)]) -> Point3 {
    let n = voxels.len() as f64;
    let mut sum = [0.0; 3];
    for &(x, y, z) in voxels {
        sum[0] += x as f64;
        sum[1] += y as f64;
        sum[2] += z as f64;
    }
    Point3::new(sum[0] / n, sum[1] / n, sum[2] / n)
}

/// Tracks which nuclei own each voxel so candidate overlaps can be counted
/// against the full pre-overwrite voxel set of every accepted nucleus.
struct OwnerGrid {
    primary: Vec<u16>,
    extra: HashMap<usize, Vec<u16>>,
}

impl OwnerGrid {
    fn new(voxel_count: usize) -> Self {
        OwnerGrid {
            primary: vec![0; voxel_count],
            extra: HashMap::new(),
        }
    }

    fn owners_at(&self, idx: usize) -> impl Iterator<Item = u16> + '_ {
        let first = self.primary[idx];
        let head = (first != 0).then_some(first);
        head.into_iter()
            .chain(self.extra.get(&idx).into_iter().flatten().copied())
    }

    fn claim(&mut self, idx: usize, label: u16) {
        if self.primary[idx] == 0 {
            self.primary[idx] = label;
        } else {
            self.extra.entry(idx).or_default().push(label);
        }
    }
}

/// Place `n_nuclei` random ellipsoids, retrying rejected candidates.
///
/// For each nucleus `k = 1..=n`: the center is drawn uniformly over the
/// (margin-shrunk) volume interior, each semi-axis uniformly from the
/// configured range and each angle uniformly from `[0, pi)`. The candidate
/// is accepted iff it rasterizes to at least one voxel, shares at most
/// `max_overlap_voxels` voxels with every earlier nucleus, and does not
/// erase any earlier label entirely when overwriting shared voxels.
/// Deterministic given the seed.
pub fn place_nuclei(config: &SynthConfig) -> Result<(LabeledVolume, GroundTruth), SynthError> {
    config.check()?;
    let dims = config.dims;
    let mut volume = LabeledVolume::zeros(dims).map_err(|_| {
        SynthError::InvalidConfig("dims must all be >= 1".into())
    })?;
    let mut truth = GroundTruth {
        count: 0,
        nuclei: Vec::with_capacity(config.n_nuclei),
    };
    if config.n_nuclei == 0 {
        return Ok((volume, truth));
    }

    let mut rng = seeded_rng(config.seed);
    let mut owners = OwnerGrid::new(dims.voxel_count());
    // visible_voxels[label] = voxels still carrying the label after overwrites
    let mut visible_voxels = vec![0usize; config.n_nuclei + 1];
    let mut overlap = vec![0usize; config.n_nuclei + 1];
    let mut visible_hits = vec![0usize; config.n_nuclei + 1];

    let margin = config.center_margin;
    let range_along = |len: usize| (margin, (len - 1) as f64 - margin);
    let (cx_lo, cx_hi) = range_along(dims.x_len);
    let (cy_lo, cy_hi) = range_along(dims.y_len);
    let (cz_lo, cz_hi) = range_along(dims.z_len);
    let [a_min, a_max] = config.semi_axis_range;

    for k in 1..=config.n_nuclei as u16 {
        let mut placed = false;
        for _attempt in 0..config.max_attempts_per_nucleus {
            // Draw order is fixed: center xyz, semi-axes xyz, angles xyz.
            let center = Point3::new(
                rng.random_range(cx_lo..=cx_hi),
                rng.random_range(cy_lo..=cy_hi),
                rng.random_range(cz_lo..=cz_hi),
            );
            let semi_axes = [
                rng.random_range(a_min..=a_max),
                rng.random_range(a_min..=a_max),
                rng.random_range(a_min..=a_max),
            ];
            let rotation = [
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.0..std::f64::consts::PI),
            ];
            let spec = EllipsoidSpec {
                center,
                semi_axes,
                rotation,
                label: k,
            };
            let voxels = rasterize_ellipsoid(&spec, dims);
            if voxels.is_empty() {
                continue;
            }

            let mut touched: Vec<u16> = Vec::new();
            for &(x, y, z) in &voxels {
                let idx = volume.index_of(x, y, z);
                for owner in owners.owners_at(idx) {
                    let o = usize::from(owner);
                    if overlap[o] == 0 && visible_hits[o] == 0 {
                        touched.push(owner);
                    }
                    overlap[o] += 1;
                }
                let visible = volume.get(x, y, z);
                if visible != 0 {
                    visible_hits[usize::from(visible)] += 1;
                }
            }

            let mut ok = true;
            for &label in &touched {
                let o = usize::from(label);
                if overlap[o] > config.max_overlap_voxels
                    || visible_hits[o] == visible_voxels[o]
                {
                    ok = false;
                    break;
                }
            }
            for &label in &touched {
                let o = usize::from(label);
                overlap[o] = 0;
                visible_hits[o] = 0;
            }
            if !ok {
                continue;
            }

            for &(x, y, z) in &voxels {
                let idx = volume.index_of(x, y, z);
                let old = volume.get(x, y, z);
                if old != 0 {
                    visible_voxels[usize::from(old)] -= 1;
                }
                volume.set(x, y, z, k);
                owners.claim(idx, k);
            }
            visible_voxels[usize::from(k)] = voxels.len();

            truth.nuclei.push(NucleusTruth {
                label: k,
                center,
                semi_axes,
                rotation,
                centroid: centroid_of_voxels(&voxels),
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(SynthError::PlacementFailed {
                nucleus: k,
                attempts: config.max_attempts_per_nucleus,
            });
        }
    }

    truth.count = truth.nuclei.len();
    Ok((volume, truth))
}
