//! Deterministic parallel helpers.
//!
//! Quadratures and band sweeps are embarrassingly parallel, but floating
//! point sums depend on association order. Work is therefore split into
//! fixed chunks; chunk results are produced in parallel and combined
//! sequentially in chunk order, so results are byte-identical for any
//! thread count (and with the `parallel` feature disabled).

/// Map `f` over fixed-size index chunks of `0..n` and sum the partial
/// results in chunk order.
pub fn chunked_sum<T, F>(n: usize, chunk: usize, f: F) -> T
where
    T: std::iter::Sum<T> + Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let ranges: Vec<std::ops::Range<usize>> = (0..n.div_ceil(chunk))
        .map(|c| (c * chunk)..((c + 1) * chunk).min(n))
        .collect();
    let partials = map_collect_ranges(ranges, f);
    partials.into_iter().sum()
}

#[cfg(feature = "parallel")]
fn map_collect_ranges<T, F>(ranges: Vec<std::ops::Range<usize>>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    use rayon::prelude::*;
    ranges.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_collect_ranges<T, F>(ranges: Vec<std::ops::Range<usize>>, f: F) -> Vec<T>
where
    F: Fn(std::ops::Range<usize>) -> T,
{
    ranges.into_iter().map(f).collect()
}

/// Parallel map over `0..n` preserving index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
