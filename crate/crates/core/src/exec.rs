//! Trial scheduling. With the `parallel` feature trials run on a rayon pool of
//! the requested width; otherwise, or at width 1, they run in order on the
//! calling thread. Results are always returned in trial order.

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CROSSDETECT_THREADS";

/// Effective width: `requested` (0 = all cores) capped by the environment.
pub fn resolve_threads(requested: usize) -> usize {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut w = if requested == 0 { avail } else { requested };
    if let Some(cap) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if cap > 0 {
            w = w.min(cap);
        }
    }
    w.max(1)
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(threads: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let width = resolve_threads(threads);
    if width == 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(width).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(_threads: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Split `n` trials into fixed chunks of `chunk` and map each chunk range.
pub fn map_chunks<T, F>(threads: usize, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    map_indexed(threads, count, |c| f(c * chunk..((c + 1) * chunk).min(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let a = map_indexed(1, 100, |i| i * i);
        let b = map_indexed(4, 100, |i| i * i);
        assert_eq!(a, b);
        let c = map_chunks(3, 10, 4, |r| r.collect::<Vec<_>>());
        assert_eq!(c, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8, 9]]);
    }
}
