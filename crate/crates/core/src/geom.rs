//! Geometric primitives shared across the pipeline.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A point in voxel coordinates. Serializes as `[x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Euclidean distance after per-axis multiplication by `spacing`.
    pub fn scaled_distance(&self, other: &Point3, spacing: [f64; 3]) -> f64 {
        let dx = (self.x - other.x) * spacing[0];
        let dy = (self.y - other.y) * spacing[1];
        let dz = (self.z - other.z) * spacing[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

impl Serialize for Point3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.z].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Point3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(deserializer)?;
        Ok(Point3 { x, y, z })
    }
}

/// An axis-aligned 2D box in slice pixel coordinates.
///
/// Coordinates are inclusive positions of voxel centers, so a single pixel
/// yields a box with `u_min == u_max`. Serializes as
/// `[u_min, v_min, u_max, v_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox2D {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BoundingBox2D {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Self {
        BoundingBox2D {
            u_min,
            v_min,
            u_max,
            v_max,
        }
    }

    /// `None` with the offending field name when the box is malformed.
    pub fn check(&self) -> Result<(), &'static str> {
        let vals = [self.u_min, self.v_min, self.u_max, self.v_max];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err("box coordinates must be finite");
        }
        if self.u_min > self.u_max {
            return Err("box has u_min > u_max");
        }
        if self.v_min > self.v_max {
            return Err("box has v_min > v_max");
        }
        Ok(())
    }

    /// Box center `((u_min + u_max) / 2, (v_min + v_max) / 2)`.
    pub fn center(&self) -> (f64, f64) {
        ((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)
    }

    /// Area under the inclusive-coordinate convention (width = max - min + 1).
    pub fn area(&self) -> f64 {
        (self.u_max - self.u_min + 1.0) * (self.v_max - self.v_min + 1.0)
    }
}

impl Serialize for BoundingBox2D {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.u_min, self.v_min, self.u_max, self.v_max].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundingBox2D {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [u_min, v_min, u_max, v_max] = <[f64; 4]>::deserialize(deserializer)?;
        let b = BoundingBox2D {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        b.check().map_err(D::Error::custom)?;
        Ok(b)
    }
}
