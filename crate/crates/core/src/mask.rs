//! Binary voxel masks.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::par;
use crate::volume::LabelMap;

/// One boolean per voxel plus grid geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geom: Geometry,
    data: Array3<bool>,
}

impl BinaryMask {
    pub fn new(geom: Geometry, data: Array3<bool>) -> Result<Self> {
        let (nz, ny, nx) = data.dim();
        if [nz, ny, nx] != geom.dims {
            return Err(Error::GeometryMismatch(format!(
                "mask shape ({nz},{ny},{nx}) does not match dims {:?}",
                geom.dims
            )));
        }
        Ok(Self { geom, data })
    }

    pub fn from_vec(geom: Geometry, data: Vec<bool>) -> Result<Self> {
        let [nz, ny, nx] = geom.dims;
        let arr = Array3::from_shape_vec((nz, ny, nx), data).map_err(|_| {
            Error::GeometryMismatch("mask buffer length does not match dims".into())
        })?;
        Self::new(geom, arr)
    }

    pub fn empty(geom: Geometry) -> Self {
        let [nz, ny, nx] = geom.dims;
        Self {
            geom,
            data: Array3::from_elem((nz, ny, nx), false),
        }
    }

    /// Derives a mask from a per-voxel predicate over another field's values.
    pub(crate) fn from_fn_slice<T: Copy + Sync, F>(geom: Geometry, src: &[T], pred: F) -> Self
    where
        F: Fn(T) -> bool + Sync,
        bool: Send,
    {
        let mut data = vec![false; src.len()];
        par::fill_blocks(&mut data, |start, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v = pred(src[start + k]);
            }
        });
        Self::from_vec(geom, data).expect("length matches by construction")
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn data(&self) -> &Array3<bool> {
        &self.data
    }

    pub fn as_slice(&self) -> &[bool] {
        self.data.as_slice().expect("standard layout")
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> bool {
        self.data[(z, y, x)]
    }

    /// Number of set voxels.
    pub fn count(&self) -> usize {
        let s = self.as_slice();
        par::count_where(s.len(), |i| s[i])
    }

    pub fn is_empty(&self) -> bool {
        self.as_slice().iter().all(|&b| !b)
    }

    /// Indices `(z, y, x)` of set voxels in scan order.
    pub fn set_voxels(&self) -> Vec<[usize; 3]> {
        let s = self.as_slice();
        let mut out = Vec::new();
        for (i, &b) in s.iter().enumerate() {
            if b {
                out.push(self.geom.coords_of(i));
            }
        }
        out
    }

    /// Serializable `{0, 1}` label representation.
    pub fn to_label_map(&self) -> LabelMap {
        let src = self.as_slice();
        let mut labels = vec![0u8; src.len()];
        par::fill_blocks(&mut labels, |start, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v = src[start + k] as u8;
            }
        });
        LabelMap::from_vec(self.geom, labels, 2).expect("labels are 0/1")
    }

    /// Interprets any nonzero label as foreground.
    pub fn from_label_map_nonzero(m: &LabelMap) -> Self {
        Self::from_fn_slice(*m.geometry(), m.as_slice(), |l| l != 0)
    }

    /// Elementwise intersection.
    pub fn intersect(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.geom
            .ensure_same_grid(&other.geom, "mask intersection")?;
        let a = self.as_slice();
        let b = other.as_slice();
        let mut out = vec![false; a.len()];
        par::fill_blocks(&mut out, |start, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v = a[start + k] && b[start + k];
            }
        });
        BinaryMask::from_vec(self.geom, out)
    }

    /// Elementwise union.
    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.geom.ensure_same_grid(&other.geom, "mask union")?;
        let a = self.as_slice();
        let b = other.as_slice();
        let mut out = vec![false; a.len()];
        par::fill_blocks(&mut out, |start, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v = a[start + k] || b[start + k];
            }
        });
        BinaryMask::from_vec(self.geom, out)
    }
}
