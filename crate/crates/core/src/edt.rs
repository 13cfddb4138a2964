//! Exact Euclidean distance transform with anisotropic spacing.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb &
//! Huttenlocher), one 1D pass per axis over squared distances. Sample
//! positions along an axis are `i * spacing`, so anisotropic grids are exact.
//! Linear time per voxel; lanes are independent, so passes parallelize with
//! bit-stable results.

use ndarray::Array3;

use crate::par;

/// Initial field for the transform: `0` at seed voxels, `+inf` elsewhere.
pub(crate) fn seeded_field<F>(dims: [usize; 3], seed: F) -> Array3<f64>
where
    F: Fn(usize) -> bool + Sync,
{
    let n = dims[0] * dims[1] * dims[2];
    let mut data = vec![0.0f64; n];
    par::fill_blocks(&mut data, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = if seed(start + k) { 0.0 } else { f64::INFINITY };
        }
    });
    Array3::from_shape_vec((dims[0], dims[1], dims[2]), data).expect("shape follows dims")
}

/// In-place transform of a seeded field into squared distances (mm^2) to the
/// nearest seed. A field with no seeds stays `+inf` everywhere.
pub(crate) fn edt_squared_in_place(field: &mut Array3<f64>, spacing: [f64; 3]) {
    for (axis, &s) in spacing.iter().enumerate() {
        par::process_lanes(field, axis, EnvelopeScratch::default, move |lane, st| {
            edt_1d(lane, s, st)
        });
    }
}

/// Distances in mm to the nearest seed voxel center.
pub(crate) fn edt_mm<F>(dims: [usize; 3], spacing: [f64; 3], seed: F) -> Array3<f64>
where
    F: Fn(usize) -> bool + Sync,
{
    let mut field = seeded_field(dims, seed);
    edt_squared_in_place(&mut field, spacing);
    field.mapv_inplace(f64::sqrt);
    field
}

#[derive(Default)]
pub(crate) struct EnvelopeScratch {
    f: Vec<f64>,
    /// Parabola source indices in the lower envelope.
    v: Vec<usize>,
    /// Left interval boundary of each envelope parabola; `z[0] = -inf`.
    z: Vec<f64>,
}

/// 1D squared-distance transform at sample positions `i * s`. Parabolas with
/// infinite height never enter the envelope; an all-infinite lane stays
/// infinite.
fn edt_1d(lane: &mut [f64], s: f64, st: &mut EnvelopeScratch) {
    let n = lane.len();
    st.f.clear();
    st.f.extend_from_slice(lane);
    st.v.clear();
    st.z.clear();
    let f = &st.f;

    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let xq = q as f64 * s;
        let q_term = f[q] + xq * xq;
        loop {
            match st.v.last() {
                None => {
                    st.v.push(q);
                    st.z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let xp = p as f64 * s;
                    let x_cross = (q_term - (f[p] + xp * xp)) / (2.0 * (xq - xp));
                    if x_cross <= *st.z.last().expect("z tracks v") {
                        st.v.pop();
                        st.z.pop();
                    } else {
                        st.v.push(q);
                        st.z.push(x_cross);
                        break;
                    }
                }
            }
        }
    }

    if st.v.is_empty() {
        lane.fill(f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (i, out) in lane.iter_mut().enumerate() {
        let xi = i as f64 * s;
        while j + 1 < st.v.len() && st.z[j + 1] < xi {
            j += 1;
        }
        let p = st.v[j];
        let d = xi - p as f64 * s;
        *out = f[p] + d * d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn brute_force(dims: [usize; 3], spacing: [f64; 3], seeds: &[[usize; 3]]) -> Array3<f64> {
        let mut out = Array3::from_elem((dims[0], dims[1], dims[2]), f64::INFINITY);
        for z in 0..dims[0] {
            for y in 0..dims[1] {
                for x in 0..dims[2] {
                    let mut best = f64::INFINITY;
                    for s in seeds {
                        let dz = (z as f64 - s[0] as f64) * spacing[0];
                        let dy = (y as f64 - s[1] as f64) * spacing[1];
                        let dx = (x as f64 - s[2] as f64) * spacing[2];
                        best = best.min(dz * dz + dy * dy + dx * dx);
                    }
                    out[(z, y, x)] = best.sqrt();
                }
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_on_random_fields() {
        let rng = CounterRng::new(2024);
        for trial in 0..40u64 {
            let dims = [
                2 + (rng.raw(0, trial * 3) % 9) as usize,
                2 + (rng.raw(0, trial * 3 + 1) % 9) as usize,
                2 + (rng.raw(0, trial * 3 + 2) % 9) as usize,
            ];
            let spacing = [
                0.5 + rng.uniform(1, trial * 3),
                0.5 + rng.uniform(1, trial * 3 + 1),
                0.5 + rng.uniform(1, trial * 3 + 2),
            ];
            let n = dims[0] * dims[1] * dims[2];
            let mut seeds = Vec::new();
            for i in 0..n {
                if rng.uniform(2 + trial, i as u64) < 0.15 {
                    let x = i % dims[2];
                    let y = (i / dims[2]) % dims[1];
                    let z = i / (dims[1] * dims[2]);
                    seeds.push([z, y, x]);
                }
            }
            if seeds.is_empty() {
                seeds.push([0, 0, 0]);
            }
            let seed_set: std::collections::HashSet<usize> = seeds
                .iter()
                .map(|s| (s[0] * dims[1] + s[1]) * dims[2] + s[2])
                .collect();
            let fast = {
                let mut f = seeded_field(dims, |i| seed_set.contains(&i));
                edt_squared_in_place(&mut f, spacing);
                f.mapv_inplace(f64::sqrt);
                f
            };
            let slow = brute_force(dims, spacing, &seeds);
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).abs() < 1e-9, "trial {trial}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn no_seeds_stays_infinite() {
        let mut f = seeded_field([3, 3, 3], |_| false);
        edt_squared_in_place(&mut f, [1.0; 3]);
        assert!(f.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn seed_voxels_are_zero() {
        let d = edt_mm([4, 4, 4], [2.0, 1.0, 0.5], |i| i == 21);
        let flat = d.as_slice().unwrap();
        assert_eq!(flat[21], 0.0);
        assert!(flat
            .iter()
            .enumerate()
            .all(|(i, &v)| (v == 0.0) == (i == 21)));
    }
}
