//! Execution policy for the data-parallel kernels.
//!
//! Every kernel keeps a fixed reduction order, so `Sequential` and `Parallel`
//! produce bit-identical results. Without the `parallel` feature, `Parallel`
//! silently runs the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for the fixed-order partial sums used by reductions.
pub(crate) const REDUCE_CHUNK: usize = 4096;

/// Below this many output elements a kernel stays on the calling thread.
const PAR_THRESHOLD: usize = 16 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy will actually fan out to the rayon pool for `work` elements.
    pub fn is_parallel_for(self, work: usize) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel && work >= PAR_THRESHOLD
    }
}

/// Applies `f(chunk_index, chunk)` to consecutive `chunk`-sized pieces of `data`.
pub(crate) fn for_each_chunk_mut<F>(exec: Execution, data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel_for(data.len()) {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Evaluates `f` at `0..n` and collects in index order.
pub(crate) fn map_range<T, F>(exec: Execution, n: usize, work: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel_for(work) {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = (exec, work);
    (0..n).map(f).collect()
}

/// Sum of squares with a fixed chunked order: per-chunk partials, then a left fold.
pub(crate) fn sum_squares(exec: Execution, data: &[f64]) -> f64 {
    let chunks = data.len().div_ceil(REDUCE_CHUNK);
    let partials = map_range(exec, chunks, data.len(), |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(data.len());
        data[lo..hi].iter().fold(0.0, |acc, v| acc + v * v)
    });
    partials.into_iter().fold(0.0, |acc, p| acc + p)
}
