//! Binary mask operations: Chebyshev dilation, region erasure, connected
//! components, and the two component-based post-processing filters.

use serde::{Deserialize, Serialize};

use crate::edt;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::mask::BinaryMask;
use crate::par;
use crate::volume::{LabelMap, Volume};

/// Allowance (in voxel units) for keeping small components near the largest
/// one during bone/cartilage post-processing.
pub const DEFAULT_ALLOWANCE_VOXELS: f64 = 50.0;

/// Neighborhood used for component labeling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "6")]
    Six,
    #[serde(rename = "18")]
    Eighteen,
    #[default]
    #[serde(rename = "26")]
    TwentySix,
}

impl Connectivity {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidArgument(format!(
                "connectivity must be 6, 18, or 26, got {other}"
            ))),
        }
    }

    fn offsets(self) -> Vec<[isize; 3]> {
        let max_manhattan = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::new();
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let m = dz.abs() + dy.abs() + dx.abs();
                    if m > 0 && m <= max_manhattan {
                        out.push([dz, dy, dx]);
                    }
                }
            }
        }
        out
    }
}

/// How inter-component distances are measured by
/// [`largest_component_filter`]. Both are in voxel units on an isotropic grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentDistance {
    #[default]
    Euclidean,
    Chebyshev,
}

/// Connected components of a mask: a per-voxel component id (0 = background,
/// ids contiguous from 1 in scan order of first encounter) plus per-component
/// tallies.
#[derive(Debug, Clone)]
pub struct ComponentSet {
    geom: Geometry,
    ids: Vec<u32>,
    components: Vec<ComponentInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentInfo {
    pub id: u32,
    pub voxel_count: usize,
    pub volume_mm3: f64,
}

impl ComponentSet {
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn components(&self) -> &[ComponentInfo] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Largest component by voxel count; ties resolve to the lowest id.
    pub fn largest(&self) -> Option<&ComponentInfo> {
        self.components
            .iter()
            .max_by(|a, b| a.voxel_count.cmp(&b.voxel_count).then(b.id.cmp(&a.id)))
    }

    /// Mask of the voxels whose component id satisfies `keep`.
    pub fn filter_mask<F>(&self, keep: F) -> BinaryMask
    where
        F: Fn(u32) -> bool + Sync,
    {
        let ids = &self.ids;
        let mut data = vec![false; ids.len()];
        par::fill_blocks(&mut data, |start, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                let id = ids[start + k];
                *v = id != 0 && keep(id);
            }
        });
        BinaryMask::from_vec(self.geom, data).expect("length preserved")
    }

    pub fn mask_of(&self, id: u32) -> BinaryMask {
        self.filter_mask(|c| c == id)
    }
}

/// Chebyshev (cube) dilation by `radius` voxels per axis, clipped at the
/// array border. Separable: one nearest-set distance scan per axis.
pub fn dilate(m: &BinaryMask, radius_voxels: usize) -> BinaryMask {
    if radius_voxels == 0 {
        return m.clone();
    }
    let r = radius_voxels as i32;
    let mut data = m.data().clone();
    for axis in 0..3 {
        par::process_lanes(
            &mut data,
            axis,
            Vec::new,
            move |lane, dist: &mut Vec<i32>| dilate_1d(lane, r, dist),
        );
    }
    BinaryMask::new(*m.geometry(), data).expect("geometry unchanged")
}

fn dilate_1d(lane: &mut [bool], r: i32, dist: &mut Vec<i32>) {
    const FAR: i32 = i32::MAX / 2;
    let n = lane.len();
    dist.clear();
    dist.resize(n, FAR);
    let mut d = FAR;
    for i in 0..n {
        if lane[i] {
            d = 0;
        } else if d < FAR {
            d += 1;
        }
        dist[i] = d;
    }
    d = FAR;
    for i in (0..n).rev() {
        if lane[i] {
            d = 0;
        } else if d < FAR {
            d += 1;
        }
        dist[i] = dist[i].min(d);
    }
    for i in 0..n {
        lane[i] = dist[i] <= r;
    }
}

/// Replaces `x` with `fill` inside the mask, leaving it untouched outside.
pub fn erase_region(x: &Volume, m: &BinaryMask, fill: f32) -> Result<Volume> {
    x.geometry()
        .ensure_same_grid(m.geometry(), "erase_region")?;
    if !fill.is_finite() {
        return Err(Error::InvalidArgument("fill value must be finite".into()));
    }
    let src = x.as_slice();
    let sel = m.as_slice();
    let mut out = vec![0.0f32; src.len()];
    par::fill_blocks(&mut out, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            let i = start + k;
            *v = if sel[i] { fill } else { src[i] };
        }
    });
    Volume::from_vec(*x.geometry(), out)
}

/// Labels connected components under the chosen adjacency. Ids are assigned
/// in scan order of the first encountered voxel, which makes the labeling
/// deterministic.
pub fn connected_components(m: &BinaryMask, connectivity: Connectivity) -> ComponentSet {
    let geom = *m.geometry();
    let src = m.as_slice();
    let offsets = connectivity.offsets();
    let [nz, ny, nx] = geom.dims;
    let mut ids = vec![0u32; src.len()];
    let mut components = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut next = 1u32;

    for start in 0..src.len() {
        if !src[start] || ids[start] != 0 {
            continue;
        }
        ids[start] = next;
        stack.push(start);
        let mut voxel_count = 0usize;
        while let Some(i) = stack.pop() {
            voxel_count += 1;
            let [z, y, x] = geom.coords_of(i);
            for off in &offsets {
                let zz = z as isize + off[0];
                let yy = y as isize + off[1];
                let xx = x as isize + off[2];
                if zz < 0 || yy < 0 || xx < 0 {
                    continue;
                }
                let (zz, yy, xx) = (zz as usize, yy as usize, xx as usize);
                if zz >= nz || yy >= ny || xx >= nx {
                    continue;
                }
                let j = geom.linear(zz, yy, xx);
                if src[j] && ids[j] == 0 {
                    ids[j] = next;
                    stack.push(j);
                }
            }
        }
        components.push(ComponentInfo {
            id: next,
            voxel_count,
            volume_mm3: voxel_count as f64 * geom.voxel_volume_mm3(),
        });
        next += 1;
    }

    ComponentSet {
        geom,
        ids,
        components,
    }
}

/// Keeps the largest component plus every component whose minimum
/// voxel-center distance (voxel units, isotropic) to it is within
/// `allowance_voxels`. Anti-extensive and idempotent; the largest component
/// is always retained.
pub fn largest_component_filter(
    m: &BinaryMask,
    allowance_voxels: f64,
    connectivity: Connectivity,
    distance: ComponentDistance,
) -> Result<BinaryMask> {
    if allowance_voxels < 0.0 || !allowance_voxels.is_finite() {
        return Err(Error::InvalidArgument(
            "allowance must be finite and non-negative".into(),
        ));
    }
    let comps = connected_components(m, connectivity);
    let largest = comps.largest().ok_or(Error::NoForeground("mask"))?.id;
    if comps.len() == 1 {
        return Ok(m.clone());
    }

    let keep: Vec<bool> = match distance {
        ComponentDistance::Euclidean => {
            // Distance field seeded at the largest component, unit spacing.
            let ids = comps.ids();
            let field = edt::edt_mm(m.geometry().dims, [1.0; 3], |i| ids[i] == largest);
            let flat = field.as_slice().expect("standard layout");
            let mut min_dist = vec![f64::INFINITY; comps.len() + 1];
            for (i, &id) in ids.iter().enumerate() {
                if id != 0 {
                    let d = flat[i];
                    let slot = &mut min_dist[id as usize];
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
            comps
                .components()
                .iter()
                .map(|c| c.id == largest || min_dist[c.id as usize] <= allowance_voxels)
                .collect()
        }
        ComponentDistance::Chebyshev => {
            let reach = dilate(&comps.mask_of(largest), allowance_voxels.floor() as usize);
            let reach_flat = reach.as_slice();
            let ids = comps.ids();
            let mut touched = vec![false; comps.len() + 1];
            for (i, &id) in ids.iter().enumerate() {
                if id != 0 && reach_flat[i] {
                    touched[id as usize] = true;
                }
            }
            comps
                .components()
                .iter()
                .map(|c| c.id == largest || touched[c.id as usize])
                .collect()
        }
    };

    let id_keep: Vec<bool> = {
        let mut v = vec![false; comps.len() + 1];
        for (c, &k) in comps.components().iter().zip(keep.iter()) {
            v[c.id as usize] = k;
        }
        v
    };
    Ok(comps.filter_mask(|id| id_keep[id as usize]))
}

/// Removes components with physical volume strictly below the threshold.
/// A threshold of 0 is the identity.
pub fn remove_small_components(
    m: &BinaryMask,
    min_volume_mm3: f64,
    connectivity: Connectivity,
) -> BinaryMask {
    if min_volume_mm3 <= 0.0 {
        return m.clone();
    }
    let comps = connected_components(m, connectivity);
    let mut keep = vec![false; comps.len() + 1];
    for c in comps.components() {
        keep[c.id as usize] = c.volume_mm3 >= min_volume_mm3;
    }
    comps.filter_mask(|id| keep[id as usize])
}

/// Applies [`largest_component_filter`] to each listed class of a label map;
/// voxels removed from a class become background. Classes with no voxels are
/// left untouched.
pub fn filter_label_classes(
    m: &LabelMap,
    classes: &[u8],
    allowance_voxels: f64,
    connectivity: Connectivity,
    distance: ComponentDistance,
) -> Result<LabelMap> {
    let mut out = m.as_slice().to_vec();
    for &class in classes {
        let mask = m.class_mask(class);
        if mask.is_empty() {
            continue;
        }
        let kept = largest_component_filter(&mask, allowance_voxels, connectivity, distance)?;
        let kept_flat = kept.as_slice();
        for (i, v) in out.iter_mut().enumerate() {
            if *v == class && !kept_flat[i] {
                *v = 0;
            }
        }
    }
    LabelMap::from_vec(*m.geometry(), out, m.num_classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_voxels(dims: [usize; 3], voxels: &[[usize; 3]]) -> BinaryMask {
        let g = Geometry::isotropic(dims);
        let mut data = vec![false; g.voxel_count()];
        for v in voxels {
            data[g.linear(v[0], v[1], v[2])] = true;
        }
        BinaryMask::from_vec(g, data).unwrap()
    }

    #[test]
    fn dilate_radius_zero_is_identity() {
        let m = mask_from_voxels([3, 3, 3], &[[1, 1, 1], [0, 2, 2]]);
        assert_eq!(dilate(&m, 0), m);
    }

    #[test]
    fn dilate_center_voxel_gives_cube() {
        let m = mask_from_voxels([5, 5, 5], &[[2, 2, 2]]);
        let d = dilate(&m, 1);
        assert_eq!(d.count(), 27);
        for z in 1..4 {
            for y in 1..4 {
                for x in 1..4 {
                    assert!(d.get(z, y, x));
                }
            }
        }
    }

    #[test]
    fn dilate_clips_at_corner() {
        let m = mask_from_voxels([5, 5, 5], &[[0, 0, 0]]);
        assert_eq!(dilate(&m, 1).count(), 8);
    }

    #[test]
    fn dilate_composes_additively() {
        let m = mask_from_voxels([9, 9, 9], &[[4, 4, 4], [0, 8, 3]]);
        let a = dilate(&dilate(&m, 1), 2);
        let b = dilate(&m, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn dilate_is_extensive() {
        let m = mask_from_voxels([6, 6, 6], &[[1, 2, 3], [5, 5, 5]]);
        let d = dilate(&m, 2);
        for (a, b) in m.as_slice().iter().zip(d.as_slice()) {
            assert!(!*a || *b);
        }
    }

    #[test]
    fn erase_region_cases() {
        let g = Geometry::isotropic([2, 2, 2]);
        let x = Volume::from_vec(g, (0..8).map(|i| i as f32).collect()).unwrap();
        let empty = BinaryMask::empty(g);
        assert_eq!(erase_region(&x, &empty, 0.0).unwrap(), x);

        let full = BinaryMask::from_vec(g, vec![true; 8]).unwrap();
        let erased = erase_region(&x, &full, 0.0).unwrap();
        assert!(erased.as_slice().iter().all(|&v| v == 0.0));

        let half =
            BinaryMask::from_vec(g, vec![true, false, true, false, true, false, true, false])
                .unwrap();
        let e = erase_region(&x, &half, -1.0).unwrap();
        for i in 0..8 {
            let differs = e.as_slice()[i] != x.as_slice()[i];
            // voxel 0 has value 0 and fill -1, so it differs; exactly the mask support
            assert_eq!(differs, half.as_slice()[i]);
        }
    }

    #[test]
    fn in_plane_diagonal_depends_on_connectivity() {
        let m = mask_from_voxels([3, 3, 3], &[[0, 0, 0], [0, 1, 1]]);
        assert_eq!(connected_components(&m, Connectivity::Six).len(), 2);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).len(), 1);
        // offset (0,1,1) is an edge neighbor: 18-connectivity joins it too
        assert_eq!(connected_components(&m, Connectivity::Eighteen).len(), 1);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = BinaryMask::empty(Geometry::isotropic([3, 3, 3]));
        assert!(connected_components(&m, Connectivity::TwentySix).is_empty());
    }

    #[test]
    fn solid_cube_is_one_component_with_physical_volume() {
        let g = Geometry::new([5, 5, 5], [2.0, 1.0, 0.5], [0.0; 3]).unwrap();
        let mut data = vec![false; g.voxel_count()];
        for z in 1..4 {
            for y in 1..4 {
                for x in 1..4 {
                    data[g.linear(z, y, x)] = true;
                }
            }
        }
        let m = BinaryMask::from_vec(g, data).unwrap();
        let cc = connected_components(&m, Connectivity::Six);
        assert_eq!(cc.len(), 1);
        assert_eq!(cc.components()[0].voxel_count, 27);
        assert!((cc.components()[0].volume_mm3 - 27.0).abs() < 1e-12);
    }

    #[test]
    fn component_counts_sum_to_cardinality() {
        let m = mask_from_voxels(
            [8, 8, 8],
            &[
                [0, 0, 0],
                [0, 0, 1],
                [3, 3, 3],
                [7, 7, 7],
                [7, 7, 6],
                [5, 0, 0],
            ],
        );
        let cc = connected_components(&m, Connectivity::TwentySix);
        let total: usize = cc.components().iter().map(|c| c.voxel_count).sum();
        assert_eq!(total, m.count());
    }

    #[test]
    fn largest_filter_keeps_single_component() {
        let m = mask_from_voxels([4, 4, 4], &[[1, 1, 1], [1, 1, 2]]);
        let out = largest_component_filter(
            &m,
            50.0,
            Connectivity::TwentySix,
            ComponentDistance::Euclidean,
        )
        .unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn largest_filter_distance_rule() {
        // Big blob at the origin plus strays at axis distance 60 and 10.
        let mut voxels = Vec::new();
        for z in 0..2 {
            for y in 0..2 {
                for x in 0..3 {
                    voxels.push([z, y, x]);
                }
            }
        }
        voxels.push([0, 0, 62]); // gap of 60 voxels from x=2
        voxels.push([1, 0, 12]); // gap of 10 voxels from x=2
        let m = mask_from_voxels([4, 4, 80], &voxels);
        let out = largest_component_filter(
            &m,
            50.0,
            Connectivity::TwentySix,
            ComponentDistance::Euclidean,
        )
        .unwrap();
        assert!(!out.get(0, 0, 62), "stray at 60 voxels must be removed");
        assert!(out.get(1, 0, 12), "stray at 10 voxels must be retained");
        assert_eq!(out.count(), m.count() - 1);

        // Chebyshev variant agrees on axis-aligned gaps.
        let out_c = largest_component_filter(
            &m,
            50.0,
            Connectivity::TwentySix,
            ComponentDistance::Chebyshev,
        )
        .unwrap();
        assert_eq!(out, out_c);
    }

    #[test]
    fn largest_filter_empty_mask_errors() {
        let m = BinaryMask::empty(Geometry::isotropic([3, 3, 3]));
        assert!(matches!(
            largest_component_filter(
                &m,
                50.0,
                Connectivity::TwentySix,
                ComponentDistance::Euclidean
            ),
            Err(Error::NoForeground(_))
        ));
    }

    #[test]
    fn largest_filter_is_idempotent_and_anti_extensive() {
        let m = mask_from_voxels([4, 4, 70], &[[0, 0, 0], [0, 0, 1], [0, 0, 65], [3, 3, 30]]);
        let once = largest_component_filter(
            &m,
            20.0,
            Connectivity::TwentySix,
            ComponentDistance::Euclidean,
        )
        .unwrap();
        let twice = largest_component_filter(
            &once,
            20.0,
            Connectivity::TwentySix,
            ComponentDistance::Euclidean,
        )
        .unwrap();
        assert_eq!(once, twice);
        for (a, b) in once.as_slice().iter().zip(m.as_slice()) {
            assert!(!*a || *b);
        }
    }

    #[test]
    fn remove_small_thresholds() {
        let g = Geometry::isotropic([4, 4, 8]);
        let mut data = vec![false; g.voxel_count()];
        // 5-voxel line and a separated 2x2x2 block
        for x in 0..5 {
            data[g.linear(0, 0, x)] = true;
        }
        for z in 2..4 {
            for y in 2..4 {
                for x in 6..8 {
                    data[g.linear(z, y, x)] = true;
                }
            }
        }
        let m = BinaryMask::from_vec(g, data).unwrap();

        let identity = remove_small_components(&m, 0.0, Connectivity::TwentySix);
        assert_eq!(identity, m);

        let filtered = remove_small_components(&m, 6.0, Connectivity::TwentySix);
        assert!(!filtered.get(0, 0, 0), "5 mm^3 line removed at 6 mm^3");
        assert!(filtered.get(3, 3, 7), "8 mm^3 block retained");
        assert_eq!(filtered.count(), 8);

        // idempotent: surviving components stay above the threshold
        let twice = remove_small_components(&filtered, 6.0, Connectivity::TwentySix);
        assert_eq!(twice, filtered);
    }

    #[test]
    fn filter_label_classes_clears_removed_voxels() {
        let g = Geometry::isotropic([3, 3, 60]);
        let mut labels = vec![0u8; g.voxel_count()];
        labels[g.linear(0, 0, 0)] = 1;
        labels[g.linear(0, 0, 1)] = 1;
        labels[g.linear(0, 0, 55)] = 1; // stray, 54 voxels away
        labels[g.linear(1, 1, 1)] = 2;
        let m = LabelMap::from_vec(g, labels, 3).unwrap();
        let out = filter_label_classes(
            &m,
            &[1, 2],
            50.0,
            Connectivity::TwentySix,
            ComponentDistance::Euclidean,
        )
        .unwrap();
        assert_eq!(out.get(0, 0, 55), 0);
        assert_eq!(out.get(0, 0, 0), 1);
        assert_eq!(out.get(1, 1, 1), 2);
    }
}
