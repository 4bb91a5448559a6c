//! Thin switch between rayon and sequential iteration.
//!
//! With the `parallel` feature these helpers dispatch to rayon; without it
//! they run the same closures on the calling thread. Callers only ever write
//! to disjoint output slots, and reductions go through fixed-size chunks, so
//! both builds produce bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by deterministic reductions. Fixed so that the
/// summation tree never depends on the worker count.
pub const REDUCE_CHUNK: usize = 1024;

/// `(0..n).map(f).collect()`, in parallel when enabled.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Calls `f(chunk_index, chunk)` for consecutive chunks of `chunk_len` items.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

/// Unstable sort. Only used on keys that are unique, so the result is
/// deterministic.
pub fn sort_unstable_by<T, F>(data: &mut [T], cmp: F)
where
    T: Send,
    F: Fn(&T, &T) -> std::cmp::Ordering + Sync,
{
    #[cfg(feature = "parallel")]
    {
        data.par_sort_unstable_by(cmp);
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.sort_unstable_by(cmp);
    }
}

/// Maps each index range `[k*REDUCE_CHUNK, (k+1)*REDUCE_CHUNK)` to a partial
/// value and returns the partials in chunk order.
pub fn chunk_partials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    map_range(chunks, |k| {
        let start = k * REDUCE_CHUNK;
        f(start..(start + REDUCE_CHUNK).min(n))
    })
}

/// Number of worker threads the parallel helpers will use.
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Sums `len`-sized accumulators over `0..n`: each chunk of indices fills
/// its own zeroed accumulator, and the partials are added in chunk order.
pub(crate) fn sum_chunks<T, F>(n: usize, len: usize, f: F) -> Vec<T>
where
    T: crate::features::Real,
    F: Fn(std::ops::Range<usize>, &mut [T]) + Sync + Send,
{
    let partials = chunk_partials(n, |range| {
        let mut acc = vec![T::zero(); len];
        f(range, &mut acc);
        acc
    });
    let mut total = vec![T::zero(); len];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}
