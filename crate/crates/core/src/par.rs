//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! on the calling thread. Work is always split into fixed-size chunks and
//! results are collected in chunk order, so outputs never depend on the
//! number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to consecutive chunks of `items` and returns the per-chunk
/// results in order.
pub fn map_chunks<T, R, F>(items: &[T], chunk_len: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(chunk_len).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks(chunk_len).map(f).collect()
    }
}

/// Evaluates `f` for every index in `0..n`, results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Mutates each chunk of `items` in place, passing the chunk index.
pub fn for_each_chunk_mut<T, F>(items: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    {
        items
            .par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items
            .chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

/// Folds chunks into partial accumulators and merges them with `merge`.
///
/// Only use with exact, associative and commutative merges (integer counts):
/// the grouping of partials is scheduler dependent.
pub fn fold_chunks<T, A, I, F, M>(items: &[T], chunk_len: usize, init: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &T) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_chunks(chunk_len.max(1))
            .map(|chunk| {
                let mut acc = init();
                chunk.iter().for_each(|x| fold(&mut acc, x));
                acc
            })
            .reduce(&init, &merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = (chunk_len, &merge);
        let mut acc = init();
        items.iter().for_each(|x| fold(&mut acc, x));
        acc
    }
}

pub fn sort_unstable<T: Ord + Send>(items: &mut [T]) {
    #[cfg(feature = "parallel")]
    items.par_sort_unstable();
    #[cfg(not(feature = "parallel"))]
    items.sort_unstable();
}

/// Whether this build dispatches work to a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
