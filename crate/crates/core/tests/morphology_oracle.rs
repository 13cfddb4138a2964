//! Flood-fill oracle for connected component labeling and randomized checks
//! of the partition property on masks up to 16^3.

use std::collections::BTreeMap;

use kneeseg::geometry::Geometry;
use kneeseg::mask::BinaryMask;
use kneeseg::morphology::{connected_components, dilate, Connectivity};
use kneeseg::rng::CounterRng;

fn neighbors(connectivity: Connectivity) -> Vec<[i64; 3]> {
    let max = match connectivity {
        Connectivity::Six => 1,
        Connectivity::Eighteen => 2,
        Connectivity::TwentySix => 3,
    };
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let m = dz.abs() + dy.abs() + dx.abs();
                if m > 0 && m <= max {
                    out.push([dz, dy, dx]);
                }
            }
        }
    }
    out
}

/// Recursive flood fill, structured differently from the implementation's
/// stack-based scan (visits in neighbor order from an arbitrary start).
fn oracle_labels(mask: &BinaryMask, connectivity: Connectivity) -> (Vec<u32>, usize) {
    fn fill(
        mask: &BinaryMask,
        labels: &mut [u32],
        offs: &[[i64; 3]],
        dims: [usize; 3],
        v: [usize; 3],
        id: u32,
    ) {
        let g = Geometry::isotropic(dims);
        let idx = g.linear(v[0], v[1], v[2]);
        if labels[idx] != 0 {
            return;
        }
        labels[idx] = id;
        for o in offs {
            let (z, y, x) = (v[0] as i64 + o[0], v[1] as i64 + o[1], v[2] as i64 + o[2]);
            if z < 0 || y < 0 || x < 0 {
                continue;
            }
            let (z, y, x) = (z as usize, y as usize, x as usize);
            if z >= dims[0] || y >= dims[1] || x >= dims[2] {
                continue;
            }
            if mask.get(z, y, x) && labels[g.linear(z, y, x)] == 0 {
                fill(mask, labels, offs, dims, [z, y, x], id);
            }
        }
    }

    let dims = mask.geometry().dims;
    let offs = neighbors(connectivity);
    let mut labels = vec![0u32; mask.as_slice().len()];
    let mut next = 0u32;
    // Sweep in reverse scan order so oracle ids differ from the
    // implementation's; only the partition must agree.
    for z in (0..dims[0]).rev() {
        for y in (0..dims[1]).rev() {
            for x in (0..dims[2]).rev() {
                let idx = Geometry::isotropic(dims).linear(z, y, x);
                if mask.get(z, y, x) && labels[idx] == 0 {
                    next += 1;
                    fill(mask, &mut labels, &offs, dims, [z, y, x], next);
                }
            }
        }
    }
    (labels, next as usize)
}

fn random_mask(rng: &CounterRng, stream: u64, dims: [usize; 3], density: f64) -> BinaryMask {
    let g = Geometry::isotropic(dims);
    let data: Vec<bool> = (0..g.voxel_count())
        .map(|i| rng.uniform(stream, i as u64) < density)
        .collect();
    BinaryMask::from_vec(g, data).unwrap()
}

#[test]
fn components_agree_with_flood_fill_oracle() {
    let rng = CounterRng::new(4040);
    let connectivities = [
        Connectivity::Six,
        Connectivity::Eighteen,
        Connectivity::TwentySix,
    ];
    for trial in 0..45u64 {
        let dims = [
            1 + (rng.raw(0, trial * 3) % 16) as usize,
            1 + (rng.raw(0, trial * 3 + 1) % 16) as usize,
            1 + (rng.raw(0, trial * 3 + 2) % 16) as usize,
        ];
        let density = 0.1 + 0.5 * rng.uniform(1, trial);
        let m = random_mask(&rng, 10 + trial, dims, density);
        for conn in connectivities {
            let cc = connected_components(&m, conn);
            let (oracle, oracle_count) = oracle_labels(&m, conn);
            assert_eq!(cc.len(), oracle_count, "component count trial {trial}");

            // Same partition: ids must correspond one-to-one.
            let mut fwd: BTreeMap<u32, u32> = BTreeMap::new();
            let mut bwd: BTreeMap<u32, u32> = BTreeMap::new();
            for (a, b) in cc.ids().iter().zip(oracle.iter()) {
                assert_eq!(*a == 0, *b == 0);
                if *a != 0 {
                    assert_eq!(*fwd.entry(*a).or_insert(*b), *b, "partition split");
                    assert_eq!(*bwd.entry(*b).or_insert(*a), *a, "partition merge");
                }
            }

            // Partition property: counts sum to mask cardinality.
            let total: usize = cc.components().iter().map(|c| c.voxel_count).sum();
            assert_eq!(total, m.count());

            // Ids contiguous from 1.
            for (k, c) in cc.components().iter().enumerate() {
                assert_eq!(c.id, k as u32 + 1);
            }
        }
    }
}

#[test]
fn dilation_monotone_in_radius() {
    let rng = CounterRng::new(606);
    for trial in 0..10u64 {
        let m = random_mask(&rng, 60 + trial, [9, 9, 9], 0.05);
        let mut prev = m.clone();
        for r in 1..4usize {
            let cur = dilate(&m, r);
            for (small, big) in prev.as_slice().iter().zip(cur.as_slice()) {
                assert!(!*small || *big, "dilation not monotone at r={r}");
            }
            prev = cur;
        }
    }
}

#[test]
fn dilation_translation_equivariant_away_from_borders() {
    // A shape and its +1-voxel translate dilate to translates of each other
    // as long as neither result touches the border.
    let g = Geometry::isotropic([12, 12, 12]);
    let mut a = vec![false; g.voxel_count()];
    let mut b = vec![false; g.voxel_count()];
    for (z, y, x) in [(5usize, 5usize, 5usize), (5, 5, 6), (6, 5, 5)] {
        a[g.linear(z, y, x)] = true;
        b[g.linear(z + 1, y + 1, x + 1)] = true;
    }
    let da = dilate(&BinaryMask::from_vec(g, a).unwrap(), 2);
    let db = dilate(&BinaryMask::from_vec(g, b).unwrap(), 2);
    for z in 0..11 {
        for y in 0..11 {
            for x in 0..11 {
                assert_eq!(da.get(z, y, x), db.get(z + 1, y + 1, x + 1));
            }
        }
    }
}
