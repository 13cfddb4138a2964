//! Deterministic reductions and feature-gated data parallelism.
//!
//! Floating-point sums are computed over fixed-size blocks followed by a
//! pairwise tree reduction whose shape depends only on the element count, so
//! results are bit-identical whether the `parallel` feature is enabled, and
//! for any rayon thread count.

#[cfg(feature = "parallel")]
use ndarray::parallel::prelude::*;
use ndarray::{Array3, Axis};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Block length for partial sums. Part of the numeric contract: changing it
/// changes the bits of every reduction in the crate.
pub(crate) const SUM_BLOCK: usize = 4096;

/// Sum `f(i)` for `i in 0..n` with a thread-count-independent result.
pub(crate) fn stable_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    stable_sum_arrays::<1, _>(n, |i| [f(i)])[0]
}

/// Same as [`stable_sum`] but accumulates `M` sums in one pass.
pub(crate) fn stable_sum_arrays<const M: usize, F>(n: usize, f: F) -> [f64; M]
where
    F: Fn(usize) -> [f64; M] + Sync,
{
    if n == 0 {
        return [0.0; M];
    }
    let blocks = n.div_ceil(SUM_BLOCK);
    let block_sum = |b: usize| {
        let start = b * SUM_BLOCK;
        let end = (start + SUM_BLOCK).min(n);
        let mut acc = [0.0f64; M];
        for i in start..end {
            let v = f(i);
            for m in 0..M {
                acc[m] += v[m];
            }
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let mut partials: Vec<[f64; M]> = (0..blocks).into_par_iter().map(block_sum).collect();
    #[cfg(not(feature = "parallel"))]
    let mut partials: Vec<[f64; M]> = (0..blocks).map(block_sum).collect();

    // Pairwise tree reduction with a shape fixed by the block count.
    while partials.len() > 1 {
        let half = partials.len().div_ceil(2);
        for i in 0..partials.len() / 2 {
            let hi = partials[2 * i + 1];
            let lo = &mut partials[2 * i];
            for m in 0..M {
                lo[m] += hi[m];
            }
            partials[i] = partials[2 * i];
        }
        if partials.len() % 2 == 1 {
            partials[half - 1] = partials[partials.len() - 1];
        }
        partials.truncate(half);
    }
    partials[0]
}

/// Exact integer count of `i in 0..n` satisfying `f`.
pub(crate) fn count_where<F>(n: usize, f: F) -> usize
where
    F: Fn(usize) -> bool + Sync,
{
    let blocks = n.div_ceil(SUM_BLOCK);
    let block_count = |b: usize| {
        let start = b * SUM_BLOCK;
        let end = (start + SUM_BLOCK).min(n);
        (start..end).filter(|&i| f(i)).count()
    };
    #[cfg(feature = "parallel")]
    {
        (0..blocks).into_par_iter().map(block_count).sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..blocks).map(block_count).sum()
    }
}

/// Fill `out` by blocks; `f` receives the block's start offset and slice.
/// Writes are positionwise so the result does not depend on scheduling.
pub(crate) fn fill_blocks<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    const BLOCK: usize = 1 << 15;
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| f(b * BLOCK, chunk));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| f(b * BLOCK, chunk));
}

/// Applies `f` to every 1D lane along `axis`, parallelizing over slabs of the
/// orthogonal axis. Each lane is gathered into a contiguous scratch slice,
/// transformed in place, and scattered back, so `f` never sees strides.
/// `make_state` builds per-task scratch reused across that task's lanes.
/// Lanes are independent, which keeps the result scheduling-invariant.
pub(crate) fn process_lanes<T, S, G, F>(arr: &mut Array3<T>, axis: usize, make_state: G, f: F)
where
    T: Copy + Default + Send + Sync,
    G: Fn() -> S + Sync,
    F: Fn(&mut [T], &mut S) + Sync,
{
    let chunk_axis = if axis == 0 { Axis(1) } else { Axis(0) };
    let lane_axis = Axis(axis);
    let lane_len = arr.shape()[axis];
    let mut view = arr.view_mut();
    let it = view.axis_chunks_iter_mut(chunk_axis, 1);
    #[cfg(feature = "parallel")]
    let it = it.into_par_iter();
    it.for_each(|mut sub| {
        let mut state = make_state();
        let mut scratch = vec![T::default(); lane_len];
        for mut lane in sub.lanes_mut(lane_axis) {
            for (s, v) in scratch.iter_mut().zip(lane.iter()) {
                *s = *v;
            }
            f(&mut scratch, &mut state);
            for (v, s) in lane.iter_mut().zip(scratch.iter()) {
                *v = *s;
            }
        }
    });
}
