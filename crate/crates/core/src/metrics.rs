//! Segmentation quality metrics: Dice overlap and exact symmetric surface
//! distances (average and Hausdorff) in physical mm.
//!
//! Surface distances follow the boundary-to-boundary convention: the distance
//! from a point is taken to the *boundary* of the other segmentation, not to
//! its full voxel set. Boundaries use the 6-neighbor face test with the array
//! border treated as background, and distances are measured between voxel
//! centers.

use serde::{Deserialize, Serialize};

use crate::edt;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::mask::BinaryMask;
use crate::par;
use crate::volume::{LabelMap, Volume};

/// Boundary voxels of a mask, in scan order.
#[derive(Debug, Clone)]
pub struct BoundarySet {
    geom: Geometry,
    voxels: Vec<[usize; 3]>,
}

impl BoundarySet {
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn voxels(&self) -> &[[usize; 3]] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Physical voxel-center coordinates in mm.
    pub fn points_mm(&self) -> Vec<[f64; 3]> {
        self.voxels.iter().map(|&v| self.geom.point_mm(v)).collect()
    }
}

/// Per-class evaluation outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricStatus {
    /// Both masks non-empty; all metrics defined.
    Evaluated,
    /// Exactly one mask empty: DSC is 0, surface distances are undefined.
    SurfaceUndefined,
    /// Class absent from both prediction and ground truth.
    NotApplicable,
}

/// Per-class DSC/ASD/HD record. Distances are reported as missing (never 0)
/// when undefined; `hd_pre_mm` is the Hausdorff distance of the raw,
/// pre-post-processing prediction when one was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub class_id: u8,
    pub status: MetricStatus,
    pub dsc: Option<f64>,
    pub asd_mm: Option<f64>,
    pub hd_mm: Option<f64>,
    pub hd_pre_mm: Option<f64>,
}

/// Dice similarity coefficient `2|A∩B| / (|A|+|B|)`; 1.0 when both masks are
/// empty (documented convention).
pub fn dsc(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.geometry().ensure_same_grid(b.geometry(), "dsc")?;
    let (na, nb, ninter) = overlap_counts(a, b);
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * ninter as f64 / (na + nb) as f64)
}

fn overlap_counts(a: &BinaryMask, b: &BinaryMask) -> (usize, usize, usize) {
    let sa = a.as_slice();
    let sb = b.as_slice();
    let na = par::count_where(sa.len(), |i| sa[i]);
    let nb = par::count_where(sb.len(), |i| sb[i]);
    let ninter = par::count_where(sa.len(), |i| sa[i] && sb[i]);
    (na, nb, ninter)
}

/// Foreground voxels with at least one background 6-neighbor; voxels on the
/// array border count the outside as background.
pub fn extract_boundary(m: &BinaryMask) -> BoundarySet {
    let geom = *m.geometry();
    let [nz, ny, nx] = geom.dims;
    let s = m.as_slice();
    let is_boundary = |z: usize, y: usize, x: usize| -> bool {
        if !s[geom.linear(z, y, x)] {
            return false;
        }
        z == 0
            || z == nz - 1
            || y == 0
            || y == ny - 1
            || x == 0
            || x == nx - 1
            || !s[geom.linear(z - 1, y, x)]
            || !s[geom.linear(z + 1, y, x)]
            || !s[geom.linear(z, y - 1, x)]
            || !s[geom.linear(z, y + 1, x)]
            || !s[geom.linear(z, y, x - 1)]
            || !s[geom.linear(z, y, x + 1)]
    };

    // Collect per z-slice (parallel) and flatten in slice order so the result
    // is plain scan order.
    let per_slice = |z: usize| -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                if is_boundary(z, y, x) {
                    out.push([z, y, x]);
                }
            }
        }
        out
    };
    #[cfg(feature = "parallel")]
    let slices: Vec<Vec<[usize; 3]>> = {
        use rayon::prelude::*;
        (0..nz).into_par_iter().map(per_slice).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let slices: Vec<Vec<[usize; 3]>> = (0..nz).map(per_slice).collect();

    BoundarySet {
        geom,
        voxels: slices.concat(),
    }
}

/// Squared-distance field to a boundary, restricted to a bounding box that
/// contains every seed (exactness is preserved for queries inside the box).
struct CroppedField {
    lo: [usize; 3],
    dims: [usize; 3],
    field: ndarray::Array3<f64>,
}

impl CroppedField {
    fn build(geom: &Geometry, seeds: &[[usize; 3]], bbox: ([usize; 3], [usize; 3])) -> Self {
        let (lo, hi) = bbox;
        let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let idx =
            |v: [usize; 3]| ((v[0] - lo[0]) * dims[1] + (v[1] - lo[1])) * dims[2] + (v[2] - lo[2]);
        let mut in_seed = vec![false; dims[0] * dims[1] * dims[2]];
        for s in seeds {
            in_seed[idx(*s)] = true;
        }
        let mut field = edt::seeded_field(dims, |i| in_seed[i]);
        edt::edt_squared_in_place(&mut field, geom.spacing);
        Self { lo, dims, field }
    }

    #[inline]
    fn squared_at(&self, v: [usize; 3]) -> f64 {
        let flat = self.field.as_slice().expect("standard layout");
        flat[((v[0] - self.lo[0]) * self.dims[1] + (v[1] - self.lo[1])) * self.dims[2]
            + (v[2] - self.lo[2])]
    }
}

fn joint_bbox(a: &[[usize; 3]], b: &[[usize; 3]]) -> ([usize; 3], [usize; 3]) {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for v in a.iter().chain(b.iter()) {
        for d in 0..3 {
            lo[d] = lo[d].min(v[d]);
            hi[d] = hi[d].max(v[d]);
        }
    }
    (lo, hi)
}

/// Directed sum and max of distances from `from` points to the field.
fn directed(field: &CroppedField, from: &[[usize; 3]]) -> (f64, f64) {
    let mut d = vec![0.0f64; from.len()];
    par::fill_blocks(&mut d, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = field.squared_at(from[start + k]).sqrt();
        }
    });
    let sum = par::stable_sum(d.len(), |i| d[i]);
    let max = d.iter().copied().fold(0.0f64, f64::max);
    (sum, max)
}

/// Symmetric average and Hausdorff surface distance in mm.
///
/// `ASD = (Σ_{a∈∂A} d(a, ∂B) + Σ_{b∈∂B} d(b, ∂A)) / (n_∂A + n_∂B)` and
/// `HD = max(max_a d(a, ∂B), max_b d(b, ∂A))`. Errors when either mask is
/// empty; batch layers report that as missing, never as 0.
pub fn surface_distances(a: &BinaryMask, b: &BinaryMask) -> Result<(f64, f64)> {
    a.geometry()
        .ensure_same_grid(b.geometry(), "surface_distances")?;
    let ba = extract_boundary(a);
    let bb = extract_boundary(b);
    if ba.is_empty() {
        return Err(Error::UndefinedSurfaceDistance("first"));
    }
    if bb.is_empty() {
        return Err(Error::UndefinedSurfaceDistance("second"));
    }
    let bbox = joint_bbox(ba.voxels(), bb.voxels());
    let to_b = CroppedField::build(a.geometry(), bb.voxels(), bbox);
    let (sum_a, max_a) = directed(&to_b, ba.voxels());
    let to_a = CroppedField::build(a.geometry(), ba.voxels(), bbox);
    let (sum_b, max_b) = directed(&to_a, bb.voxels());

    let asd = (sum_a + sum_b) / (ba.len() + bb.len()) as f64;
    let hd = max_a.max(max_b);
    Ok((asd, hd))
}

/// Hausdorff distance only (used for the pre-post-processing HD column).
pub fn hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    surface_distances(a, b).map(|(_, hd)| hd)
}

/// Exact per-voxel Euclidean distance in mm to the nearest boundary voxel of
/// `m`, over the full grid; zero exactly on the boundary.
pub fn distance_transform(m: &BinaryMask) -> Result<Volume> {
    let boundary = extract_boundary(m);
    if boundary.is_empty() {
        return Err(Error::NoForeground("distance_transform input"));
    }
    let geom = *m.geometry();
    let mut in_seed = vec![false; geom.voxel_count()];
    for v in boundary.voxels() {
        in_seed[geom.linear(v[0], v[1], v[2])] = true;
    }
    let field = edt::edt_mm(geom.dims, geom.spacing, |i| in_seed[i]);
    let flat = field.as_slice().expect("standard layout");
    let mut out = vec![0.0f32; flat.len()];
    par::fill_blocks(&mut out, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = flat[start + k] as f32;
        }
    });
    Volume::from_vec(geom, out)
}

/// Per-class DSC/ASD/HD of `pred` against `gt` for the listed classes.
///
/// When `pred_raw` (the prediction before component post-processing) is
/// given, `hd_pre_mm` is computed from it. Classes absent from both masks are
/// flagged [`MetricStatus::NotApplicable`]; classes with exactly one empty
/// mask get DSC but no distances.
pub fn evaluate_case(
    pred: &LabelMap,
    gt: &LabelMap,
    classes: &[u8],
    pred_raw: Option<&LabelMap>,
) -> Result<Vec<MetricResult>> {
    pred.geometry()
        .ensure_same_grid(gt.geometry(), "evaluate_case")?;
    if let Some(raw) = pred_raw {
        raw.geometry()
            .ensure_same_grid(gt.geometry(), "evaluate_case raw prediction")?;
    }
    if classes.contains(&0) {
        return Err(Error::InvalidArgument(
            "background class 0 cannot be evaluated".into(),
        ));
    }

    classes
        .iter()
        .map(|&class| {
            let gm = gt.class_mask(class);
            let pm = pred.class_mask(class);
            let g_empty = gm.is_empty();
            let p_empty = pm.is_empty();

            if g_empty && p_empty {
                return Ok(MetricResult {
                    class_id: class,
                    status: MetricStatus::NotApplicable,
                    dsc: None,
                    asd_mm: None,
                    hd_mm: None,
                    hd_pre_mm: None,
                });
            }

            let dice = dsc(&pm, &gm)?;
            let hd_pre_mm = match pred_raw {
                Some(raw) if !g_empty => {
                    let rm = raw.class_mask(class);
                    if rm.is_empty() {
                        None
                    } else {
                        Some(hausdorff(&rm, &gm)?)
                    }
                }
                _ => None,
            };

            if g_empty || p_empty {
                return Ok(MetricResult {
                    class_id: class,
                    status: MetricStatus::SurfaceUndefined,
                    dsc: Some(dice),
                    asd_mm: None,
                    hd_mm: None,
                    hd_pre_mm,
                });
            }

            let (asd, hd) = surface_distances(&pm, &gm)?;
            Ok(MetricResult {
                class_id: class,
                status: MetricStatus::Evaluated,
                dsc: Some(dice),
                asd_mm: Some(asd),
                hd_mm: Some(hd),
                hd_pre_mm,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mask_from_voxels(dims: [usize; 3], spacing: [f64; 3], voxels: &[[usize; 3]]) -> BinaryMask {
        let g = Geometry::new(dims, spacing, [0.0; 3]).unwrap();
        let mut data = vec![false; g.voxel_count()];
        for v in voxels {
            data[g.linear(v[0], v[1], v[2])] = true;
        }
        BinaryMask::from_vec(g, data).unwrap()
    }

    fn cube(dims: [usize; 3], lo: [usize; 3], size: usize) -> Vec<[usize; 3]> {
        let mut v = Vec::new();
        for z in lo[0]..lo[0] + size {
            for y in lo[1]..lo[1] + size {
                for x in lo[2]..lo[2] + size {
                    assert!(z < dims[0] && y < dims[1] && x < dims[2]);
                    v.push([z, y, x]);
                }
            }
        }
        v
    }

    #[test]
    fn dsc_identity_disjoint_shifted() {
        let dims = [6, 6, 6];
        let a = mask_from_voxels(dims, [1.0; 3], &cube(dims, [1, 1, 1], 2));
        assert_eq!(dsc(&a, &a).unwrap(), 1.0);

        let b = mask_from_voxels(dims, [1.0; 3], &cube(dims, [3, 3, 3], 2));
        assert_eq!(dsc(&a, &b).unwrap(), 0.0);

        // 2x2x2 cube vs same cube shifted by 1 in x: overlap 4 of 8+8
        let c = mask_from_voxels(dims, [1.0; 3], &cube(dims, [1, 1, 2], 2));
        assert_eq!(dsc(&a, &c).unwrap(), 0.5);
    }

    #[test]
    fn dsc_empty_empty_is_one() {
        let g = Geometry::isotropic([2, 2, 2]);
        let e = BinaryMask::empty(g);
        assert_eq!(dsc(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn dsc_is_symmetric() {
        let dims = [5, 5, 5];
        let a = mask_from_voxels(dims, [1.0; 3], &cube(dims, [0, 0, 0], 3));
        let b = mask_from_voxels(dims, [1.0; 3], &cube(dims, [1, 2, 1], 2));
        assert_eq!(dsc(&a, &b).unwrap(), dsc(&b, &a).unwrap());
    }

    #[test]
    fn boundary_of_single_voxel_is_itself() {
        let m = mask_from_voxels([3, 3, 3], [1.0; 3], &[[1, 1, 1]]);
        let b = extract_boundary(&m);
        assert_eq!(b.voxels(), &[[1, 1, 1]]);
    }

    #[test]
    fn boundary_of_cubes() {
        let dims = [7, 7, 7];
        let m3 = mask_from_voxels(dims, [1.0; 3], &cube(dims, [2, 2, 2], 3));
        assert_eq!(extract_boundary(&m3).len(), 26);

        let m5 = mask_from_voxels(dims, [1.0; 3], &cube(dims, [1, 1, 1], 5));
        assert_eq!(extract_boundary(&m5).len(), 98); // 125 - 27 interior
    }

    #[test]
    fn border_voxels_are_boundary() {
        // Mask filling the whole grid: the outside counts as background, so
        // every grid-border voxel is boundary and only the center is interior.
        let dims = [3, 3, 3];
        let m = mask_from_voxels(dims, [1.0; 3], &cube(dims, [0, 0, 0], 3));
        assert_eq!(extract_boundary(&m).len(), 26);
    }

    #[test]
    fn surface_distance_identity_and_two_points() {
        let dims = [5, 5, 5];
        let a = mask_from_voxels(dims, [1.0; 3], &cube(dims, [1, 1, 1], 2));
        let (asd, hd) = surface_distances(&a, &a).unwrap();
        assert_eq!((asd, hd), (0.0, 0.0));

        let p = mask_from_voxels(dims, [1.0; 3], &[[0, 0, 0]]);
        let q = mask_from_voxels(dims, [1.0; 3], &[[0, 0, 3]]);
        let (asd, hd) = surface_distances(&p, &q).unwrap();
        assert_abs_diff_eq!(asd, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hd, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn surface_distance_empty_errors() {
        let g = Geometry::isotropic([3, 3, 3]);
        let e = BinaryMask::empty(g);
        let m = mask_from_voxels([3, 3, 3], [1.0; 3], &[[1, 1, 1]]);
        assert!(matches!(
            surface_distances(&e, &m),
            Err(Error::UndefinedSurfaceDistance("first"))
        ));
        assert!(matches!(
            surface_distances(&m, &e),
            Err(Error::UndefinedSurfaceDistance("second"))
        ));
    }

    #[test]
    fn distance_transform_respects_spacing() {
        // Single voxel at (1,1,1); neighbor along x at spacing 0.5.
        let m = mask_from_voxels([3, 3, 3], [1.0, 1.0, 0.5], &[[1, 1, 1]]);
        let d = distance_transform(&m).unwrap();
        assert_eq!(d.get(1, 1, 1), 0.0);
        assert_abs_diff_eq!(d.get(1, 1, 2), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(d.get(1, 0, 1), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn distance_transform_zero_on_boundary_only() {
        let dims = [7, 7, 7];
        let m = mask_from_voxels(dims, [1.0; 3], &cube(dims, [1, 1, 1], 5));
        let d = distance_transform(&m).unwrap();
        // the 5-cube's interior is 3x3x3; its center sits 2 voxels from the shell
        assert_abs_diff_eq!(d.get(3, 3, 3), 2.0, epsilon = 1e-6);
        assert_eq!(d.get(1, 1, 1), 0.0);
        assert_abs_diff_eq!(d.get(2, 3, 3), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn evaluate_case_perfect_prediction() {
        let g = Geometry::isotropic([5, 5, 5]);
        let mut labels = vec![0u8; g.voxel_count()];
        for v in cube([5, 5, 5], [1, 1, 1], 2) {
            labels[g.linear(v[0], v[1], v[2])] = 1;
        }
        for v in cube([5, 5, 5], [3, 3, 3], 2) {
            labels[g.linear(v[0], v[1], v[2])] = 2;
        }
        let m = LabelMap::from_vec(g, labels, 3).unwrap();
        let res = evaluate_case(&m, &m, &[1, 2], Some(&m)).unwrap();
        for r in &res {
            assert_eq!(r.status, MetricStatus::Evaluated);
            assert_eq!(r.dsc, Some(1.0));
            assert_eq!(r.asd_mm, Some(0.0));
            assert_eq!(r.hd_mm, Some(0.0));
            assert_eq!(r.hd_pre_mm, Some(0.0));
        }
    }

    #[test]
    fn evaluate_case_missing_class_paths() {
        let g = Geometry::isotropic([4, 4, 4]);
        let mut gt_labels = vec![0u8; g.voxel_count()];
        gt_labels[g.linear(1, 1, 1)] = 1;
        let gt = LabelMap::from_vec(g, gt_labels, 3).unwrap();
        let pred = LabelMap::zeros(g, 3);

        let res = evaluate_case(&pred, &gt, &[1, 2], None).unwrap();
        // class 1 present in gt, absent in pred
        assert_eq!(res[0].status, MetricStatus::SurfaceUndefined);
        assert_eq!(res[0].dsc, Some(0.0));
        assert_eq!(res[0].asd_mm, None);
        // class 2 absent from both
        assert_eq!(res[1].status, MetricStatus::NotApplicable);
        assert_eq!(res[1].dsc, None);
    }

    #[test]
    fn evaluate_case_rejects_background() {
        let g = Geometry::isotropic([2, 2, 2]);
        let m = LabelMap::zeros(g, 2);
        assert!(evaluate_case(&m, &m, &[0], None).is_err());
    }

    #[test]
    fn metrics_translation_invariant() {
        let dims = [8, 8, 8];
        let a1 = mask_from_voxels(dims, [1.0; 3], &cube(dims, [1, 1, 1], 3));
        let b1 = mask_from_voxels(dims, [1.0; 3], &cube(dims, [2, 1, 2], 2));
        let a2 = mask_from_voxels(dims, [1.0; 3], &cube(dims, [3, 3, 3], 3));
        let b2 = mask_from_voxels(dims, [1.0; 3], &cube(dims, [4, 3, 4], 2));
        let (asd1, hd1) = surface_distances(&a1, &b1).unwrap();
        let (asd2, hd2) = surface_distances(&a2, &b2).unwrap();
        assert_abs_diff_eq!(asd1, asd2, epsilon = 1e-12);
        assert_abs_diff_eq!(hd1, hd2, epsilon = 1e-12);
        assert_eq!(dsc(&a1, &b1).unwrap(), dsc(&a2, &b2).unwrap());
    }

    #[test]
    fn doubling_spacing_doubles_distances() {
        let dims = [8, 8, 8];
        let a1 = mask_from_voxels(dims, [1.0, 0.5, 2.0], &cube(dims, [1, 1, 1], 3));
        let b1 = mask_from_voxels(dims, [1.0, 0.5, 2.0], &cube(dims, [3, 2, 3], 2));
        let a2 = mask_from_voxels(dims, [2.0, 1.0, 4.0], &cube(dims, [1, 1, 1], 3));
        let b2 = mask_from_voxels(dims, [2.0, 1.0, 4.0], &cube(dims, [3, 2, 3], 2));
        let (asd1, hd1) = surface_distances(&a1, &b1).unwrap();
        let (asd2, hd2) = surface_distances(&a2, &b2).unwrap();
        assert_abs_diff_eq!(2.0 * asd1, asd2, epsilon = 1e-12);
        assert_abs_diff_eq!(2.0 * hd1, hd2, epsilon = 1e-12);
        assert_eq!(dsc(&a1, &b1).unwrap(), dsc(&a2, &b2).unwrap());
    }
}
