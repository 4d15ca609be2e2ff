//! Data-parallel primitives with a sequential fallback.
//!
//! Every primitive returns results in index order, so the two backends are
//! interchangeable bit for bit.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled and falls
    /// back to [`Backend::Sequential`] otherwise.
    #[default]
    Parallel,
}

impl Backend {
    /// Whether this backend actually runs on a thread pool in this build.
    pub fn is_threaded(self) -> bool {
        cfg!(feature = "parallel") && self == Backend::Parallel
    }
}

/// `(0..n).map(f)` collected in order.
pub fn map_range<T, F>(backend: Backend, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if backend.is_threaded() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = backend;
    (0..n).map(f).collect()
}

/// `items.iter().map(f)` collected in order.
pub fn map_slice<S, T, F>(backend: Backend, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if backend.is_threaded() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = backend;
    items.iter().map(f).collect()
}

/// Unstable sort; the result is identical for both backends since keys are
/// totally ordered integers.
pub fn sort_keys(backend: Backend, keys: &mut [usize]) {
    #[cfg(feature = "parallel")]
    if backend.is_threaded() {
        use rayon::prelude::*;
        keys.par_sort_unstable();
        return;
    }
    let _ = backend;
    keys.sort_unstable();
}

/// Exclusive prefix sum over `flags`, computed blockwise: per-block totals,
/// a scan over the totals, then a local scan inside each block.
/// Returns the offsets and the grand total.
pub fn exclusive_scan(backend: Backend, flags: &[u32]) -> (Vec<u32>, u32) {
    const BLOCK: usize = 4096;
    let n = flags.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    let blocks = n.div_ceil(BLOCK);
    let totals = map_range(backend, blocks, |b| {
        flags[b * BLOCK..((b + 1) * BLOCK).min(n)].iter().sum::<u32>()
    });
    let mut base = Vec::with_capacity(blocks);
    let mut acc = 0u32;
    for t in &totals {
        base.push(acc);
        acc += t;
    }
    let chunks = map_range(backend, blocks, |b| {
        let mut run = base[b];
        flags[b * BLOCK..((b + 1) * BLOCK).min(n)]
            .iter()
            .map(|&f| {
                let out = run;
                run += f;
                out
            })
            .collect::<Vec<u32>>()
    });
    (chunks.concat(), acc)
}

/// Scatter of the flagged `items` to the offsets computed by
/// [`exclusive_scan`].
pub fn compact<T: Copy + Default>(items: &[T], flags: &[u32], offsets: &[u32], total: u32) -> Vec<T> {
    let mut out = vec![T::default(); total as usize];
    for ((item, &f), &o) in items.iter().zip(flags).zip(offsets) {
        if f != 0 {
            out[o as usize] = *item;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn map_preserves_order() {
        let a = map_range(Backend::Parallel, 1000, |i| i * i);
        let b = map_range(Backend::Sequential, 1000, |i| i * i);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_scan() {
        assert_eq!(exclusive_scan(Backend::Parallel, &[]), (vec![], 0));
    }

    proptest! {
        #[test]
        fn scan_matches_serial(flags in proptest::collection::vec(0u32..2, 0..10_000)) {
            let (offs, total) = exclusive_scan(Backend::Parallel, &flags);
            let mut acc = 0;
            for (k, &f) in flags.iter().enumerate() {
                prop_assert_eq!(offs[k], acc);
                acc += f;
            }
            prop_assert_eq!(total, acc);
            let items: Vec<usize> = (0..flags.len()).collect();
            let kept = compact(&items, &flags, &offs, total);
            let expect: Vec<usize> = items.iter().copied().filter(|&k| flags[k] != 0).collect();
            prop_assert_eq!(kept, expect);
        }
    }
}
