//! Core voxel field types and per-voxel conversions.
//!
//! [`Volume`] holds scalar fields (images, error maps, weight maps),
//! [`LabelMap`] discrete segmentations, and [`ProbabilityMap`] per-class
//! softmax outputs. All three are immutable after construction; every
//! operation returns a new value and preserves grid geometry.

use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::mask::BinaryMask;
use crate::par;

/// 3D scalar field with physical geometry. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geom: Geometry,
    values: Array3<f32>,
}

impl Volume {
    /// Validates that the array shape matches `geom` and that all values are
    /// finite (the crate-wide invariant for scalar fields).
    pub fn new(geom: Geometry, values: Array3<f32>) -> Result<Self> {
        Self::check_shape(&geom, values.dim())?;
        let slice = values.as_slice().expect("owned arrays are standard layout");
        if let Some(index) = (0..slice.len()).find(|&i| !slice[i].is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { geom, values })
    }

    pub fn from_vec(geom: Geometry, values: Vec<f32>) -> Result<Self> {
        let [nz, ny, nx] = geom.dims;
        let arr = Array3::from_shape_vec((nz, ny, nx), values).map_err(|_| {
            Error::GeometryMismatch("value buffer length does not match dims".into())
        })?;
        Self::new(geom, arr)
    }

    pub fn zeros(geom: Geometry) -> Self {
        let [nz, ny, nx] = geom.dims;
        Self {
            geom,
            values: Array3::zeros((nz, ny, nx)),
        }
    }

    /// Builds a volume by evaluating `f` at every voxel, in parallel when the
    /// `parallel` feature is enabled. `f` must be a pure function of the
    /// coordinates for the result to be scheduling-independent.
    pub fn from_fn<F>(geom: Geometry, f: F) -> Result<Self>
    where
        F: Fn([usize; 3]) -> f32 + Sync,
    {
        let mut values = vec![0.0f32; geom.voxel_count()];
        par::fill_blocks(&mut values, |start, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v = f(geom.coords_of(start + k));
            }
        });
        Self::from_vec(geom, values)
    }

    fn check_shape(geom: &Geometry, dim: (usize, usize, usize)) -> Result<()> {
        if [dim.0, dim.1, dim.2] != geom.dims {
            return Err(Error::GeometryMismatch(format!(
                "array shape {dim:?} does not match dims {:?}",
                geom.dims
            )));
        }
        Ok(())
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn values(&self) -> &Array3<f32> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f32] {
        self.values.as_slice().expect("standard layout")
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> f32 {
        self.values[(z, y, x)]
    }
}

/// 3D integer segmentation over classes `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    geom: Geometry,
    labels: Array3<u8>,
    num_classes: usize,
}

impl LabelMap {
    pub fn new(geom: Geometry, labels: Array3<u8>, num_classes: usize) -> Result<Self> {
        Volume::check_shape(&geom, labels.dim())?;
        if num_classes == 0 || num_classes > 256 {
            return Err(Error::InvalidArgument(format!(
                "num_classes must be in 1..=256, got {num_classes}"
            )));
        }
        let slice = labels.as_slice().expect("standard layout");
        if let Some(&bad) = slice.iter().find(|&&l| (l as usize) >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: num_classes,
            });
        }
        Ok(Self {
            geom,
            labels,
            num_classes,
        })
    }

    pub fn from_vec(geom: Geometry, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        let [nz, ny, nx] = geom.dims;
        let arr = Array3::from_shape_vec((nz, ny, nx), labels).map_err(|_| {
            Error::GeometryMismatch("label buffer length does not match dims".into())
        })?;
        Self::new(geom, arr, num_classes)
    }

    pub fn zeros(geom: Geometry, num_classes: usize) -> Self {
        let [nz, ny, nx] = geom.dims;
        Self {
            geom,
            labels: Array3::zeros((nz, ny, nx)),
            num_classes: num_classes.max(1),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn labels(&self) -> &Array3<u8> {
        &self.labels
    }

    pub fn as_slice(&self) -> &[u8] {
        self.labels.as_slice().expect("standard layout")
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> u8 {
        self.labels[(z, y, x)]
    }

    /// Widens (or narrows, when still valid) the declared class count.
    pub fn with_num_classes(self, num_classes: usize) -> Result<Self> {
        Self::new(self.geom, self.labels, num_classes)
    }

    /// Binary mask of one class.
    pub fn class_mask(&self, class: u8) -> BinaryMask {
        BinaryMask::from_fn_slice(self.geom, self.as_slice(), |l| l == class)
    }

    /// Binary mask of the union of several classes.
    pub fn classes_mask(&self, classes: &[u8]) -> BinaryMask {
        BinaryMask::from_fn_slice(self.geom, self.as_slice(), |l| classes.contains(&l))
    }

    /// Voxel count of one class.
    pub fn class_count(&self, class: u8) -> usize {
        let s = self.as_slice();
        par::count_where(s.len(), |i| s[i] == class)
    }
}

/// Per-voxel class probabilities, stored channel-major `(K, nz, ny, nx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    geom: Geometry,
    channels: Array4<f32>,
}

/// Tolerance on the per-voxel channel sum.
pub const SIMPLEX_TOLERANCE: f64 = 1e-5;

impl ProbabilityMap {
    pub fn new(geom: Geometry, channels: Array4<f32>) -> Result<Self> {
        let (k, nz, ny, nx) = channels.dim();
        if [nz, ny, nx] != geom.dims {
            return Err(Error::GeometryMismatch(format!(
                "channel shape ({nz},{ny},{nx}) does not match dims {:?}",
                geom.dims
            )));
        }
        if k == 0 {
            return Err(Error::InvalidArgument(
                "probability map needs K >= 1".into(),
            ));
        }
        let n = geom.voxel_count();
        let slice = channels.as_slice().expect("standard layout");
        for i in 0..n {
            let mut sum = 0.0f64;
            for c in 0..k {
                let v = slice[c * n + i];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::NotASimplex {
                        index: i,
                        sum: v as f64,
                    });
                }
                sum += v as f64;
            }
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::NotASimplex { index: i, sum });
            }
        }
        Ok(Self { geom, channels })
    }

    /// Builds from a flat channel-major buffer of length `K * voxel_count`.
    pub fn from_channel_major(geom: Geometry, k: usize, data: Vec<f32>) -> Result<Self> {
        let [nz, ny, nx] = geom.dims;
        let arr = Array4::from_shape_vec((k, nz, ny, nx), data).map_err(|_| {
            Error::GeometryMismatch("channel buffer length does not match K * dims".into())
        })?;
        Self::new(geom, arr)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn num_channels(&self) -> usize {
        self.channels.dim().0
    }

    /// Flat view of channel `k`, voxel-indexed in x-fastest order.
    pub fn channel_slice(&self, k: usize) -> &[f32] {
        let n = self.geom.voxel_count();
        &self.channels.as_slice().expect("standard layout")[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn prob(&self, k: usize, voxel: usize) -> f32 {
        let n = self.geom.voxel_count();
        self.channels.as_slice().expect("standard layout")[k * n + voxel]
    }

    /// Scalar volume of a single channel.
    pub fn channel_volume(&self, k: usize) -> Result<Volume> {
        Volume::from_vec(self.geom, self.channel_slice(k).to_vec())
    }
}

/// One case of a batch manifest: file locations plus the osteoarthritis grade
/// used for stratified reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub ground_truth: PathBuf,
    /// Model name -> prediction label map path. Raw CNN output; component
    /// filtering is applied downstream unless disabled.
    #[serde(default)]
    pub predictions: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<PathBuf>,
    /// Bone name -> scalar volume holding that bone's lesion-class softmax
    /// probability (used by the detection probability sweep).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lesion_probabilities: BTreeMap<String, PathBuf>,
    /// Radiographic osteoarthritis grade 0-4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<u8>,
}

/// Z-normalize over all voxels: `clamp((x - mean) / std, -5, 5)` then affinely
/// mapped so `-5 -> 0` and `5 -> 1`.
///
/// Statistics are computed over the whole volume; pass a mask to
/// [`z_normalize_with_mask`] to restrict them.
pub fn z_normalize(x: &Volume) -> Result<Volume> {
    z_normalize_with_mask(x, None)
}

/// Clipping bound for z-scores before rescaling to `[0, 1]`.
pub const Z_CLIP: f64 = 5.0;

/// Z-normalization with statistics restricted to `mask` when given. The
/// normalization itself always applies to every voxel.
pub fn z_normalize_with_mask(x: &Volume, mask: Option<&BinaryMask>) -> Result<Volume> {
    if let Some(m) = mask {
        x.geometry()
            .ensure_same_grid(m.geometry(), "z_normalize mask")?;
    }
    let s = x.as_slice();
    let n = s.len();
    let selected = |i: usize| mask.is_none_or(|m| m.as_slice()[i]);

    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    let mut count = 0usize;
    for (i, &v) in s.iter().enumerate() {
        if selected(i) {
            lo = lo.min(v);
            hi = hi.max(v);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoForeground("z-normalization mask"));
    }
    if lo == hi {
        return Err(Error::ConstantVolume);
    }

    let sum = par::stable_sum(n, |i| if selected(i) { s[i] as f64 } else { 0.0 });
    let mean = sum / count as f64;
    let ss = par::stable_sum(n, |i| {
        if selected(i) {
            let d = s[i] as f64 - mean;
            d * d
        } else {
            0.0
        }
    });
    let std = (ss / count as f64).sqrt();
    if std == 0.0 {
        return Err(Error::ConstantVolume);
    }

    let mut out = vec![0.0f32; n];
    par::fill_blocks(&mut out, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            let z = ((s[start + k] as f64 - mean) / std).clamp(-Z_CLIP, Z_CLIP);
            *v = ((z + Z_CLIP) / (2.0 * Z_CLIP)) as f32;
        }
    });
    Volume::from_vec(*x.geometry(), out)
}

/// One-hot encode a label map into `num_classes` channels.
pub fn one_hot(m: &LabelMap, num_classes: usize) -> Result<ProbabilityMap> {
    let s = m.as_slice();
    if let Some(&bad) = s.iter().find(|&&l| (l as usize) >= num_classes) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes: num_classes,
        });
    }
    let n = s.len();
    let mut data = vec![0.0f32; num_classes * n];
    // Channel-major fill; each channel is an independent pass.
    for (k, chan) in data.chunks_mut(n).enumerate() {
        par::fill_blocks(chan, |start, chunk| {
            for (j, v) in chunk.iter_mut().enumerate() {
                *v = if s[start + j] as usize == k { 1.0 } else { 0.0 };
            }
        });
    }
    let [nz, ny, nx] = m.geometry().dims;
    let arr = Array4::from_shape_vec((num_classes, nz, ny, nx), data)
        .expect("shape follows construction");
    ProbabilityMap::new(*m.geometry(), arr)
}

/// Per-voxel argmax over channels; ties resolve to the lowest channel index.
pub fn argmax_labels(u: &ProbabilityMap) -> LabelMap {
    let k = u.num_channels();
    let n = u.geometry().voxel_count();
    let all = u.channels.as_slice().expect("standard layout");
    let mut out = vec![0u8; n];
    par::fill_blocks(&mut out, |start, chunk| {
        for (j, v) in chunk.iter_mut().enumerate() {
            let i = start + j;
            let mut best = 0usize;
            let mut best_p = all[i];
            for c in 1..k {
                let p = all[c * n + i];
                if p > best_p {
                    best_p = p;
                    best = c;
                }
            }
            *v = best as u8;
        }
    });
    LabelMap::from_vec(*u.geometry(), out, k).expect("argmax labels are < K")
}
