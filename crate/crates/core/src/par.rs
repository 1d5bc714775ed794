//! Order-preserving data-parallel map; sequential without the `parallel` feature.

#[cfg(feature = "parallel")]
pub(crate) fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Fixed-order sum of per-chunk partial sums (independent of worker count).
pub(crate) fn chunked_sum<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(chunk.max(1));
    map(chunks, |c| {
        let lo = c * chunk;
        (lo..(lo + chunk).min(n)).map(&f).sum::<f64>()
    })
    .into_iter()
    .sum()
}
