//! Order-preserving fan-out over independent replicates.
//!
//! With the `parallel` feature the work runs on the rayon pool; without it the
//! same closures run in a plain loop. Results always come back in index order,
//! so reductions over them are identical either way.

use std::ops::Range;

/// Maps `f` over `0..count`, in parallel when the feature is enabled.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indexed_parallel(count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(count, f)
    }
}

pub fn map_indexed_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed_parallel<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

/// Splits `0..samples` into fixed-size chunks and maps `f(chunk_index, range)`
/// over them. Chunk boundaries depend only on `samples` and `chunk`.
pub fn map_chunks<T, F>(samples: u64, chunk: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, Range<u64>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks = samples.div_ceil(chunk);
    map_indexed(chunks as usize, |c| {
        let c = c as u64;
        let start = c * chunk;
        f(c, start..(start + chunk).min(samples))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let v = map_indexed(1000, |i| i * 2);
        assert_eq!(v, (0..1000).map(|i| i * 2).collect::<Vec<_>>());
        assert_eq!(map_indexed_sequential(10, |i| i), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn chunks_cover_range() {
        let ranges = map_chunks(10, 4, |_, r| r);
        assert_eq!(ranges, vec![0..4, 4..8, 8..10]);
        assert!(map_chunks(0, 4, |_, r| r).is_empty());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(map_indexed_parallel(5000, f), map_indexed_sequential(5000, f));
    }
}
