use rayon::prelude::*;

/// Fixed chunk width for reductions; the result depends only on this constant and the
/// input order, never on the worker count.
pub(crate) const CHUNK: usize = 1024;

/// Parallel sum whose association order is fixed: sequential sums per chunk of
/// [`CHUNK`] items, then a sequential sum of the chunk partials.
pub(crate) fn chunked_sum<T: Sync>(items: &[T], f: impl Fn(usize, &T) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = items
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            chunk
                .iter()
                .enumerate()
                .map(|(i, item)| f(c * CHUNK + i, item))
                .sum::<f64>()
        })
        .collect();
    partials.into_iter().sum()
}
