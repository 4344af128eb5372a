//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel entry point in the crate takes an [`Exec`]. Results never
//! depend on the choice: work items are indexed, and reductions combine
//! fixed-size chunks in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when the `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// `(0..n).map(f).collect()`.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Applies `f` to consecutive chunks of `0..n` and folds the per-chunk
    /// results left to right with `combine`. Chunk boundaries depend only on
    /// `chunk`, so the result is identical for both execution modes.
    pub fn chunked_reduce<T, F, C>(self, n: usize, chunk: usize, f: F, combine: C) -> Option<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
        C: Fn(T, T) -> T,
    {
        let chunk = chunk.max(1);
        let n_chunks = n.div_ceil(chunk);
        let parts = self.map_range(n_chunks, |c| f(c * chunk..((c + 1) * chunk).min(n)));
        parts.into_iter().reduce(combine)
    }

    /// Short-circuiting `any` over `0..n`.
    pub fn any_range<F>(self, n: usize, f: F) -> bool
    where
        F: Fn(usize) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().any(f);
        }
        (0..n).any(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i * i) as u64;
        assert_eq!(
            Exec::Sequential.map_range(1000, f),
            Exec::Parallel.map_range(1000, f)
        );
        let sum = |e: Exec| e.chunked_reduce(1001, 64, |r| r.map(f).sum::<u64>(), |a, b| a + b);
        assert_eq!(sum(Exec::Sequential), sum(Exec::Parallel));
        assert!(Exec::Parallel.any_range(100, |i| i == 77));
        assert!(!Exec::Sequential.any_range(100, |i| i == 177));
    }
}
