//! Brute-force oracles for the surface metrics.
//!
//! The oracles are deliberately naive: boundary extraction by direct
//! neighbor checks and distances by all-pairs scans over boundary points.
//! They share no code with the accelerated implementations they verify.

use kneeseg::geometry::Geometry;
use kneeseg::mask::BinaryMask;
use kneeseg::metrics::{distance_transform, dsc, evaluate_case, surface_distances, MetricStatus};
use kneeseg::rng::CounterRng;
use kneeseg::volume::LabelMap;

/// Boundary voxels by direct 6-neighbor inspection.
fn oracle_boundary(mask: &BinaryMask) -> Vec<[usize; 3]> {
    let g = *mask.geometry();
    let [nz, ny, nx] = g.dims;
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !mask.get(z, y, x) {
                    continue;
                }
                let mut exposed = false;
                for (dz, dy, dx) in [
                    (-1i64, 0i64, 0i64),
                    (1, 0, 0),
                    (0, -1, 0),
                    (0, 1, 0),
                    (0, 0, -1),
                    (0, 0, 1),
                ] {
                    let (zz, yy, xx) = (z as i64 + dz, y as i64 + dy, x as i64 + dx);
                    if zz < 0
                        || yy < 0
                        || xx < 0
                        || zz >= nz as i64
                        || yy >= ny as i64
                        || xx >= nx as i64
                        || !mask.get(zz as usize, yy as usize, xx as usize)
                    {
                        exposed = true;
                        break;
                    }
                }
                if exposed {
                    out.push([z, y, x]);
                }
            }
        }
    }
    out
}

fn dist_mm(a: [usize; 3], b: [usize; 3], spacing: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for d in 0..3 {
        let t = (a[d] as f64 - b[d] as f64) * spacing[d];
        s += t * t;
    }
    s.sqrt()
}

/// All-pairs ASD/HD between two boundary sets.
fn oracle_surface_distances(ba: &[[usize; 3]], bb: &[[usize; 3]], spacing: [f64; 3]) -> (f64, f64) {
    let directed = |from: &[[usize; 3]], to: &[[usize; 3]]| -> (f64, f64) {
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for &p in from {
            let mut best = f64::INFINITY;
            for &q in to {
                best = best.min(dist_mm(p, q, spacing));
            }
            sum += best;
            max = max.max(best);
        }
        (sum, max)
    };
    let (sa, ma) = directed(ba, bb);
    let (sb, mb) = directed(bb, ba);
    ((sa + sb) / (ba.len() + bb.len()) as f64, ma.max(mb))
}

fn random_mask(rng: &CounterRng, stream: u64, dims: [usize; 3], spacing: [f64; 3]) -> BinaryMask {
    let g = Geometry::new(dims, spacing, [0.0; 3]).unwrap();
    let n = g.voxel_count();
    let density = 0.05 + 0.4 * rng.uniform(stream, u64::MAX);
    let mut data: Vec<bool> = (0..n)
        .map(|i| rng.uniform(stream, i as u64) < density)
        .collect();
    if data.iter().all(|&b| !b) {
        data[0] = true;
    }
    BinaryMask::from_vec(g, data).unwrap()
}

#[test]
fn boundary_matches_neighbor_oracle() {
    let rng = CounterRng::new(501);
    for trial in 0..30u64 {
        let dims = [
            2 + (rng.raw(0, trial * 3) % 7) as usize,
            2 + (rng.raw(0, trial * 3 + 1) % 7) as usize,
            2 + (rng.raw(0, trial * 3 + 2) % 7) as usize,
        ];
        let m = random_mask(&rng, 100 + trial, dims, [1.0; 3]);
        let fast = kneeseg::metrics::extract_boundary(&m);
        assert_eq!(fast.voxels(), &oracle_boundary(&m)[..], "trial {trial}");
    }

    // the 5^3 cube loses its 3^3 interior
    let g = Geometry::isotropic([7, 7, 7]);
    let mut data = vec![false; g.voxel_count()];
    for z in 1..6 {
        for y in 1..6 {
            for x in 1..6 {
                data[g.linear(z, y, x)] = true;
            }
        }
    }
    let cube = BinaryMask::from_vec(g, data).unwrap();
    assert_eq!(oracle_boundary(&cube).len(), 98);
    assert_eq!(kneeseg::metrics::extract_boundary(&cube).len(), 98);
}

#[test]
fn surface_distances_match_all_pairs_oracle() {
    let rng = CounterRng::new(77);
    for trial in 0..60u64 {
        let dims = [
            3 + (rng.raw(1, trial * 3) % 10) as usize,
            3 + (rng.raw(1, trial * 3 + 1) % 10) as usize,
            3 + (rng.raw(1, trial * 3 + 2) % 10) as usize,
        ];
        let spacing = [
            0.25 + 2.0 * rng.uniform(2, trial * 3),
            0.25 + 2.0 * rng.uniform(2, trial * 3 + 1),
            0.25 + 2.0 * rng.uniform(2, trial * 3 + 2),
        ];
        let a = random_mask(&rng, 1000 + trial, dims, spacing);
        let b = random_mask(&rng, 2000 + trial, dims, spacing);
        let (asd, hd) = surface_distances(&a, &b).unwrap();
        let (oasd, ohd) =
            oracle_surface_distances(&oracle_boundary(&a), &oracle_boundary(&b), spacing);
        assert!(
            (asd - oasd).abs() < 1e-9,
            "trial {trial}: asd {asd} vs {oasd}"
        );
        assert!((hd - ohd).abs() < 1e-9, "trial {trial}: hd {hd} vs {ohd}");
        assert!(asd <= hd + 1e-12);
    }
}

#[test]
fn distance_transform_matches_exhaustive_scan() {
    let rng = CounterRng::new(99);
    for trial in 0..10u64 {
        let dims = [12, 12, 12];
        let spacing = [
            0.5 + rng.uniform(3, trial * 3),
            0.5 + rng.uniform(3, trial * 3 + 1),
            0.5 + rng.uniform(3, trial * 3 + 2),
        ];
        let m = random_mask(&rng, 3000 + trial, dims, spacing);
        let d = distance_transform(&m).unwrap();
        let boundary = oracle_boundary(&m);
        for z in 0..dims[0] {
            for y in 0..dims[1] {
                for x in 0..dims[2] {
                    let mut best = f64::INFINITY;
                    for &q in &boundary {
                        best = best.min(dist_mm([z, y, x], q, spacing));
                    }
                    let got = d.get(z, y, x) as f64;
                    assert!(
                        (got - best).abs() < 1e-5,
                        "trial {trial} at ({z},{y},{x}): {got} vs {best}"
                    );
                }
            }
        }
    }
}

#[test]
fn one_voxel_offset_phantom_has_unit_asd() {
    // Ground truth: solid box. Prediction: the same box grown by one voxel in
    // +x only, so every new boundary face sits one voxel from the old one.
    let g = Geometry::isotropic([10, 10, 12]);
    let mut gt_labels = vec![0u8; g.voxel_count()];
    let mut pred_labels = vec![0u8; g.voxel_count()];
    for z in 3..7 {
        for y in 3..7 {
            for x in 3..7 {
                gt_labels[g.linear(z, y, x)] = 1;
                pred_labels[g.linear(z, y, x)] = 1;
            }
            pred_labels[g.linear(z, y, 7)] = 1; // one-voxel slab in +x
        }
    }
    let gt = LabelMap::from_vec(g, gt_labels, 2).unwrap();
    let pred = LabelMap::from_vec(g, pred_labels, 2).unwrap();
    let res = evaluate_case(&pred, &gt, &[1], None).unwrap();
    assert_eq!(res[0].status, MetricStatus::Evaluated);

    let gm = gt.class_mask(1);
    let pm = pred.class_mask(1);
    let (oasd, ohd) =
        oracle_surface_distances(&oracle_boundary(&pm), &oracle_boundary(&gm), [1.0; 3]);
    assert!((res[0].asd_mm.unwrap() - oasd).abs() < 1e-9);
    assert!((res[0].hd_mm.unwrap() - ohd).abs() < 1e-9);
    // the offset face is 1 voxel away; most other boundary voxels coincide
    assert_eq!(res[0].hd_mm, Some(1.0));
    assert!(res[0].asd_mm.unwrap() > 0.0 && res[0].asd_mm.unwrap() <= 1.0);
}

#[test]
fn dsc_agrees_with_direct_count() {
    let rng = CounterRng::new(15);
    for trial in 0..20u64 {
        let dims = [6, 7, 8];
        let a = random_mask(&rng, 4000 + trial, dims, [1.0; 3]);
        let b = random_mask(&rng, 5000 + trial, dims, [1.0; 3]);
        let inter = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .filter(|(x, y)| **x && **y)
            .count();
        let expect = 2.0 * inter as f64 / (a.count() + b.count()) as f64;
        assert_eq!(dsc(&a, &b).unwrap(), expect);
    }
}
