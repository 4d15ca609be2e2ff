//! Frontier tracking: keeps a compact list of active-boundary pixels and
//! updates it from the previous list instead of rescanning the lattice.
//!
//! The update is a fixed pipeline of data-parallel stages (candidate map,
//! key sort, duplicate/activity flags, exclusive scan, compaction), so each of
//! `O(|frontier|)` lanes does `O(log |frontier|)` work.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{self, EngineError, FillOutcome, FillParams, FillReport, GuideSource, IterationStats, Tracking};
use crate::exec::{self, Backend};
use crate::grid::{ImageBuffer, Label, LabelMask, PixelCoord};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierList {
    /// Row-major sorted, duplicate free.
    pub coords: Vec<PixelCoord>,
    pub generation: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrontierUpdate {
    pub frontier: FrontierList,
    /// Candidate keys produced by the map stage.
    pub candidates: usize,
    /// `candidates · ⌈log₂ candidates⌉`, the sort-dominated work estimate.
    pub work: usize,
}

/// Advances the frontier after the pixels in `filled` (a subset of the
/// frontier, already relabelled readable in `mask`) were written.
pub fn update_frontier(frontier: &FrontierList, filled: &[PixelCoord], mask: &LabelMask, backend: Backend) -> FrontierUpdate {
    let w = mask.width();
    debug_assert!(filled.iter().all(|p| frontier.coords.binary_search_by_key(&p.key(w), |q| q.key(w)).is_ok()));

    // Surviving members map to themselves; filled members fan out to their
    // remaining inpaint neighbors.
    let fan = exec::map_slice(backend, &frontier.coords, |p| {
        let mut out = [usize::MAX; 8];
        let mut n = 0;
        if mask.get(p.i, p.j) == Label::Inpaint {
            out[0] = p.key(w);
            n = 1;
        } else {
            for (ni, nj) in mask.neighbors8(p.i, p.j) {
                if mask.get(ni, nj) == Label::Inpaint {
                    out[n] = nj * w + ni;
                    n += 1;
                }
            }
        }
        (out, n)
    });
    let mut keys: Vec<usize> = fan.iter().flat_map(|(out, n)| out[..*n].iter().copied()).collect();
    let candidates = keys.len();

    exec::sort_keys(backend, &mut keys);
    let flags: Vec<u32> = exec::map_range(backend, keys.len(), |k| {
        let first = k == 0 || keys[k] != keys[k - 1];
        let p = PixelCoord::from_key(keys[k], w);
        u32::from(first && mask.is_active(p.i, p.j))
    });
    let (offsets, total) = exec::exclusive_scan(backend, &flags);
    let kept = exec::compact(&keys, &flags, &offsets, total);

    let log = usize::BITS - candidates.max(1).saturating_sub(1).leading_zeros();
    FrontierUpdate {
        frontier: FrontierList {
            coords: kept.into_iter().map(|k| PixelCoord::from_key(k, w)).collect(),
            generation: frontier.generation + 1,
        },
        candidates,
        work: candidates * log as usize,
    }
}

/// Per-iteration lane accounting of a fill run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkMetrics {
    pub iterations: Vec<IterationStats>,
}

impl WorkMetrics {
    pub fn from_report(report: &FillReport) -> Self {
        Self { iterations: report.iterations.clone() }
    }

    pub fn max_threads_requested(&self) -> usize {
        self.iterations.iter().map(|s| s.threads_requested).max().unwrap_or(0)
    }

    pub fn total_frontier(&self) -> usize {
        self.iterations.iter().map(|s| s.frontier_size).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["iteration", "frontier_size", "candidates", "threads_requested", "filled"])?;
        for s in &self.iterations {
            wtr.serialize((s.iteration, s.frontier_size, s.candidates, s.threads_requested, s.filled))?;
        }
        wtr.flush()
    }
}

/// [`engine::inpaint`] with frontier tracking; the output image is identical.
pub fn run_tracked(
    image: &ImageBuffer,
    mask: &LabelMask,
    guide: GuideSource<'_>,
    params: &FillParams,
) -> Result<(FillOutcome, WorkMetrics), EngineError> {
    let out = engine::run(image, mask, guide, params, Tracking::Tracked { verify: false })?;
    let metrics = WorkMetrics::from_report(&out.report);
    Ok((out, metrics))
}

/// As [`run_tracked`], checking the list against a full rescan every
/// iteration and failing with `InvariantBreach` on divergence.
pub fn run_verified(
    image: &ImageBuffer,
    mask: &LabelMask,
    guide: GuideSource<'_>,
    params: &FillParams,
) -> Result<(FillOutcome, WorkMetrics), EngineError> {
    let out = engine::run(image, mask, guide, params, Tracking::Tracked { verify: true })?;
    let metrics = WorkMetrics::from_report(&out.report);
    Ok((out, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::active_boundary;

    fn square(size: usize, lo: usize, hi: usize) -> LabelMask {
        LabelMask::from_fn(size, size, |i, j| {
            if (lo..hi).contains(&i) && (lo..hi).contains(&j) {
                Label::Inpaint
            } else {
                Label::Readable
            }
        })
        .unwrap()
    }

    #[test]
    fn next_shell_after_filling_the_frontier() {
        let mut m = square(12, 1, 11);
        let f = FrontierList { coords: active_boundary(&m), generation: 0 };
        assert_eq!(f.coords.len(), 36);
        for p in &f.coords {
            m.set(p.i, p.j, Label::Readable);
        }
        let up = update_frontier(&f, &f.coords, &m, Backend::Parallel);
        assert_eq!(up.frontier.coords, active_boundary(&m));
        assert_eq!(up.frontier.coords.len(), 28);
        assert_eq!(up.frontier.generation, 1);
    }

    #[test]
    fn nothing_filled_keeps_frontier() {
        let m = square(12, 1, 11);
        let f = FrontierList { coords: active_boundary(&m), generation: 3 };
        let up = update_frontier(&f, &[], &m, Backend::Sequential);
        assert_eq!(up.frontier.coords, f.coords);
        assert_eq!(up.candidates, 36);
    }

    #[test]
    fn last_shell_empties_frontier() {
        let mut m = square(6, 2, 4);
        let f = FrontierList { coords: active_boundary(&m), generation: 0 };
        for p in &f.coords {
            m.set(p.i, p.j, Label::Readable);
        }
        assert!(update_frontier(&f, &f.coords, &m, Backend::Parallel).frontier.coords.is_empty());
    }

    #[test]
    fn csv_columns() {
        let m = WorkMetrics {
            iterations: vec![IterationStats {
                iteration: 1,
                frontier_size: 4,
                candidates: 4,
                threads_requested: 4,
                filled: 4,
                forced: false,
                micros: 9,
            }],
        };
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "iteration,frontier_size,candidates,threads_requested,filled\n1,4,4,4,4\n");
    }
}
