//! Volume axes and the slice coordinate convention.
//!
//! A slice taken along an axis is indexed by `(u, v)` pixel coordinates.
//! The mapping between `(u, v, slice)` and volume `(x, y, z)` is fixed once
//! here and used everywhere: slicing, detection I/O and pseudo-3D lifting all
//! agree on it by construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the three volume axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// All axes in canonical (x, y, z) order.
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    /// Tag XOR-ed into an RNG seed to give each axis an independent stream.
    pub fn seed_tag(self) -> u64 {
        match self {
            Axis::X => 1,
            Axis::Y => 2,
            Axis::Z => 3,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("unknown axis '{other}', expected x, y or z")),
        }
    }
}

/// Which volume axes the in-slice `(u, v)` coordinates read, and which axis
/// carries the slice index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SliceMapping {
    pub u_axis: Axis,
    pub v_axis: Axis,
    pub slice_axis: Axis,
}

/// The fixed slice coordinate convention:
///
/// * slicing along `z`: `(u, v) = (x, y)`, slice index is `z`
/// * slicing along `x`: `(u, v) = (y, z)`, slice index is `x`
/// * slicing along `y`: `(u, v) = (x, z)`, slice index is `y`
pub fn slice_uv_mapping(axis: Axis) -> SliceMapping {
    match axis {
        Axis::Z => SliceMapping {
            u_axis: Axis::X,
            v_axis: Axis::Y,
            slice_axis: Axis::Z,
        },
        Axis::X => SliceMapping {
            u_axis: Axis::Y,
            v_axis: Axis::Z,
            slice_axis: Axis::X,
        },
        Axis::Y => SliceMapping {
            u_axis: Axis::X,
            v_axis: Axis::Z,
            slice_axis: Axis::Y,
        },
    }
}

impl SliceMapping {
    /// Map slice coordinates `(u, v, slice)` to volume coordinates `(x, y, z)`.
    pub fn to_volume<T: Copy>(&self, u: T, v: T, slice: T) -> (T, T, T) {
        match self.slice_axis {
            Axis::Z => (u, v, slice),
            Axis::X => (slice, u, v),
            Axis::Y => (u, slice, v),
        }
    }

    /// Map volume coordinates `(x, y, z)` to slice coordinates `(u, v, slice)`.
    pub fn from_volume<T: Copy>(&self, x: T, y: T, z: T) -> (T, T, T) {
        match self.slice_axis {
            Axis::Z => (x, y, z),
            Axis::X => (y, z, x),
            Axis::Y => (x, z, y),
        }
    }
}
