//! Slice-and-cluster estimation of 3D nuclei centroids.
//!
//! The pipeline implemented here works on densely labeled voxel volumes:
//!
//! 1. [`synth`] places randomly rotated ellipsoidal nuclei in a volume with a
//!    bounded pairwise voxel overlap and records exact ground truth.
//! 2. [`slicing`] extracts 2D focal planes along any of the three axes and
//!    derives tight per-label bounding boxes.
//! 3. [`detect`] turns those boxes into per-slice detection sets, either
//!    verbatim or corrupted by a configurable noise model, and reads/writes
//!    the JSON-lines detection interchange format.
//! 4. [`cluster`] lifts 2D detections to pseudo-3D points (box center plus
//!    slice index), builds an average-linkage dendrogram via the
//!    Lance-Williams recurrence, picks the cluster count by silhouette score,
//!    and fuses per-axis centroid sets by majority voting.
//! 5. [`metrics`] scores estimated centroids against ground truth with MAPE
//!    and distance-thresholded average precision.
//!
//! All randomness is driven by explicitly seeded ChaCha streams so every
//! stage is reproducible from its configuration.

pub mod axis;
pub mod cluster;
pub mod detect;
pub mod geom;
pub mod metrics;
pub mod rng;
pub mod slicing;
pub mod synth;
pub mod volume;

pub use axis::{slice_uv_mapping, Axis, SliceMapping};
pub use geom::{BoundingBox2D, Point3};
pub use volume::{LabeledVolume, VolumeDims};
