//! Voxel grid geometry: dimensions, physical spacing, and origin.
//!
//! Axis order is `(z, y, x)` throughout the crate; the serialized payload is
//! x-fastest, matching the row-major layout of `ndarray::Array3<(nz, ny, nx)>`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid metadata shared by volumes, label maps, and masks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Voxel counts `(nz, ny, nx)`.
    pub dims: [usize; 3],
    /// Voxel spacing in mm `(sz, sy, sx)`; strictly positive and finite.
    pub spacing: [f64; 3],
    /// Physical position of voxel `(0, 0, 0)` in mm `(oz, oy, ox)`.
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::GeometryMismatch(format!(
                "zero-sized dimension in {dims:?}"
            )));
        }
        for &s in &spacing {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::GeometryMismatch(format!(
                    "spacing components must be positive and finite, got {spacing:?}"
                )));
            }
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::GeometryMismatch(format!(
                "origin components must be finite, got {origin:?}"
            )));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit spacing, zero origin.
    pub fn isotropic(dims: [usize; 3]) -> Self {
        Self {
            dims,
            spacing: [1.0; 3],
            origin: [0.0; 3],
        }
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Physical volume of one voxel in mm^3.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Linear index of `(z, y, x)` in x-fastest order.
    #[inline]
    pub fn linear(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[2] + x
    }

    /// Inverse of [`Geometry::linear`].
    #[inline]
    pub fn coords_of(&self, linear: usize) -> [usize; 3] {
        let nx = self.dims[2];
        let ny = self.dims[1];
        let x = linear % nx;
        let y = (linear / nx) % ny;
        let z = linear / (nx * ny);
        [z, y, x]
    }

    /// Physical coordinates (mm) of a voxel center.
    #[inline]
    pub fn point_mm(&self, voxel: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + voxel[0] as f64 * self.spacing[0],
            self.origin[1] + voxel[1] as f64 * self.spacing[1],
            self.origin[2] + voxel[2] as f64 * self.spacing[2],
        ]
    }

    /// Exact equality of dims, spacing, and origin.
    pub fn same_grid(&self, other: &Geometry) -> bool {
        self.dims == other.dims && self.spacing == other.spacing && self.origin == other.origin
    }

    pub fn ensure_same_grid(&self, other: &Geometry, context: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{context}: {:?}/{:?}/{:?} vs {:?}/{:?}/{:?}",
                self.dims, self.spacing, self.origin, other.dims, other.spacing, other.origin
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_roundtrip() {
        let g = Geometry::isotropic([3, 4, 5]);
        for z in 0..3 {
            for y in 0..4 {
                for x in 0..5 {
                    assert_eq!(g.coords_of(g.linear(z, y, x)), [z, y, x]);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(Geometry::new([2, 2, 2], [0.0, 1.0, 1.0], [0.0; 3]).is_err());
        assert!(Geometry::new([2, 2, 2], [f64::NAN, 1.0, 1.0], [0.0; 3]).is_err());
        assert!(Geometry::new([0, 2, 2], [1.0; 3], [0.0; 3]).is_err());
    }

    #[test]
    fn point_mm_uses_spacing_and_origin() {
        let g = Geometry::new([2, 2, 2], [2.0, 0.5, 1.0], [10.0, 0.0, -1.0]).unwrap();
        assert_eq!(g.point_mm([1, 1, 1]), [12.0, 0.5, 0.0]);
    }
}
