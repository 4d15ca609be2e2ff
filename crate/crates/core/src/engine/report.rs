use serde::{Deserialize, Serialize};

use super::FillParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationStats {
    /// 1-based iteration index.
    pub iteration: usize,
    pub frontier_size: usize,
    pub candidates: usize,
    /// Parallel lanes the iteration asks for.
    pub threads_requested: usize,
    pub filled: usize,
    /// The iteration filled only the single pixel picked by the stall guard.
    pub forced: bool,
    pub micros: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FillReport {
    pub params: FillParams,
    pub tracked: bool,
    pub total_iterations: usize,
    pub filled_pixels: usize,
    pub forced_fills: usize,
    /// Pixels no frontier could reach, filled from their nearest readable pixel.
    pub unfillable_pixels: usize,
    pub wall_time_ms: f64,
    pub iterations: Vec<IterationStats>,
}

impl FillReport {
    pub fn new(params: FillParams, tracked: bool) -> Self {
        Self {
            params,
            tracked,
            total_iterations: 0,
            filled_pixels: 0,
            forced_fills: 0,
            unfillable_pixels: 0,
            wall_time_ms: 0.0,
            iterations: Vec::new(),
        }
    }

    pub fn unfillable(&self) -> bool {
        self.unfillable_pixels > 0
    }

    pub fn max_threads_requested(&self) -> usize {
        self.iterations.iter().map(|s| s.threads_requested).max().unwrap_or(0)
    }
}
