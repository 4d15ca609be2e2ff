//! Shell-based transport fill.

mod kernel;
mod params;
mod report;

use std::collections::VecDeque;
use std::time::Instant;

pub use kernel::{evaluate, neighbor_average, weight, PixelEval, Stencil};
pub use params::{mu_serde, parse_mu, FillOrder, FillParams, Neighborhood};
pub use report::{FillReport, IterationStats};

use crate::exec;
use crate::grid::{active_boundary, Color, GridError, ImageBuffer, Label, LabelMask, PixelCoord};
use crate::guide::{modified_structure_tensor, GuideField};
use crate::tracker::{self, FrontierList};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("guide field is {field:?} but the mask is {mask:?}")]
    GuideDimensions { field: (usize, usize), mask: (usize, usize) },
    #[error("the mask has no pixels to inpaint")]
    EmptyDomain,
    #[error("the mask has no readable pixels to draw colors from")]
    NoReadableData,
    #[error("frontier diverged from the active boundary at iteration {iteration}")]
    InvariantBreach { iteration: usize },
}

/// Where the per-pixel guidance vector comes from.
#[derive(Clone, Copy, Debug)]
pub enum GuideSource<'a> {
    Field(&'a GuideField),
    Fixed([f64; 2]),
    /// Coherence direction recomputed per frontier pixel from the current
    /// readable set, scaled by `tanh(gap / lambda)`.
    ModifiedTensor { sigma: f64, rho: f64, lambda: f64 },
}

impl GuideSource<'_> {
    pub const ZERO: GuideSource<'static> = GuideSource::Fixed([0.0, 0.0]);

    fn at(&self, image: &ImageBuffer, mask: &LabelMask, x: PixelCoord) -> [f64; 2] {
        match *self {
            GuideSource::Field(f) => f.get(x.i, x.j),
            GuideSource::Fixed(g) => g,
            GuideSource::ModifiedTensor { sigma, rho, lambda } => match modified_structure_tensor(image, mask, x, sigma, rho) {
                Ok(t) => {
                    let k = (t.coherence_gap() / lambda).tanh();
                    [k * t.v_min[0], k * t.v_min[1]]
                }
                Err(_) => [0.0, 0.0],
            },
        }
    }

    fn check(&self, mask: &LabelMask) -> Result<(), EngineError> {
        if let GuideSource::Field(f) = self {
            if f.dims() != mask.dims() {
                return Err(EngineError::GuideDimensions { field: f.dims(), mask: mask.dims() });
            }
        }
        Ok(())
    }
}

/// Image, labels and frontier at the start of an iteration.
#[derive(Clone, Debug)]
pub struct FillState {
    pub image: ImageBuffer,
    pub mask: LabelMask,
    pub iteration: usize,
    pub frontier: Vec<PixelCoord>,
}

impl FillState {
    pub fn new(image: ImageBuffer, mask: LabelMask) -> Result<Self, EngineError> {
        mask.check_matches(&image)?;
        let frontier = active_boundary(&mask);
        Ok(Self { image, mask, iteration: 0, frontier })
    }
}

/// Weighted average over the readable members of the ball around `x`.
pub fn fill_color(x: PixelCoord, state: &FillState, params: &FillParams, g: [f64; 2]) -> Option<Color> {
    evaluate(&state.image, &state.mask, x, g, params, &Stencil::new(params.r)).color
}

pub fn confidence(x: PixelCoord, state: &FillState, params: &FillParams, g: [f64; 2]) -> f64 {
    evaluate(&state.image, &state.mask, x, g, params, &Stencil::new(params.r)).confidence
}

/// Readiness under the configured order. `data_term_active` selects the
/// guidance-gated variant while some frontier pixel still carries guidance.
pub fn ready(confidence: f64, g: [f64; 2], params: &FillParams, data_term_active: bool) -> bool {
    match params.order {
        FillOrder::Onion => true,
        FillOrder::Smart => confidence > params.c,
        FillOrder::SmartWithDataTerm if data_term_active => g[0].hypot(g[1]) > params.c2 && confidence > params.c,
        FillOrder::SmartWithDataTerm => confidence > params.c,
    }
}

#[derive(Clone, Debug)]
pub struct FillOutcome {
    pub image: ImageBuffer,
    pub mask: LabelMask,
    pub report: FillReport,
}

/// Frontier maintenance strategy for [`run`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tracking {
    /// Recompute the active boundary by scanning the whole lattice.
    Untracked,
    /// Update a compact frontier list from the previous one; `verify` checks
    /// it against a full scan each iteration.
    Tracked { verify: bool },
}

/// Fills the domain with a full-lattice frontier scan each iteration.
pub fn inpaint(
    image: &ImageBuffer,
    mask: &LabelMask,
    guide: GuideSource<'_>,
    params: &FillParams,
) -> Result<FillOutcome, EngineError> {
    run(image, mask, guide, params, Tracking::Untracked)
}

/// Axis-aligned onion fill steered by the modified structure tensor.
pub fn coherence_transport_mode(
    image: &ImageBuffer,
    mask: &LabelMask,
    params: &FillParams,
) -> Result<FillOutcome, EngineError> {
    let params = FillParams { neighborhood: Neighborhood::AxisBall, order: FillOrder::Onion, ..*params };
    let guide = GuideSource::ModifiedTensor { sigma: 2.0, rho: 4.0, lambda: 1e-5 };
    run(image, mask, guide, &params, Tracking::Tracked { verify: false })
}

pub fn run(
    image: &ImageBuffer,
    mask: &LabelMask,
    guide: GuideSource<'_>,
    params: &FillParams,
    tracking: Tracking,
) -> Result<FillOutcome, EngineError> {
    params.validate()?;
    mask.check_matches(image)?;
    guide.check(mask)?;
    let mut remaining = mask.count(Label::Inpaint);
    if remaining == 0 {
        return Err(EngineError::EmptyDomain);
    }
    if mask.count(Label::Readable) == 0 {
        return Err(EngineError::NoReadableData);
    }

    let started = Instant::now();
    let backend = params.backend;
    let stencil = Stencil::new(params.r);
    let mut img = image.clone();
    let mut labels = mask.clone();
    let lattice = mask.width() * mask.height();
    let mut frontier = FrontierList { coords: active_boundary(&labels), generation: 0 };
    let mut data_term_active = params.order == FillOrder::SmartWithDataTerm;
    let mut report = FillReport::new(*params, tracking != Tracking::Untracked);

    while remaining > 0 {
        if frontier.coords.is_empty() {
            report.unfillable_pixels = fill_unreachable(&mut img, &mut labels);
            break;
        }
        let tick = Instant::now();
        let coords = &frontier.coords;
        let guidance = exec::map_slice(backend, coords, |&p| guide.at(&img, &labels, p));
        if data_term_active && !guidance.iter().any(|g| g[0].hypot(g[1]) > 0.0) {
            data_term_active = false;
        }
        let evals = exec::map_range(backend, coords.len(), |k| {
            evaluate(&img, &labels, coords[k], guidance[k], params, &stencil)
        });

        let mut fills: Vec<(PixelCoord, Color)> = Vec::new();
        for (k, e) in evals.iter().enumerate() {
            if let (true, Some(c)) = (ready(e.confidence, guidance[k], params, data_term_active), e.color) {
                fills.push((coords[k], c));
            }
        }
        let forced = fills.is_empty();
        if forced {
            let mut best = 0;
            for (k, e) in evals.iter().enumerate() {
                if e.confidence > evals[best].confidence {
                    best = k;
                }
            }
            let p = coords[best];
            let c = evals[best]
                .color
                .or_else(|| neighbor_average(&img, &labels, p))
                .expect("frontier pixels have a readable neighbor");
            fills.push((p, c));
            report.forced_fills += 1;
        }

        for (p, c) in &fills {
            img.set(p.i, p.j, c);
            labels.set(p.i, p.j, Label::Readable);
        }
        remaining -= fills.len();
        let filled: Vec<PixelCoord> = fills.iter().map(|f| f.0).collect();

        let frontier_size = coords.len();
        let (next, candidates, threads) = match tracking {
            Tracking::Untracked => {
                let next = FrontierList { coords: active_boundary(&labels), generation: frontier.generation + 1 };
                (next, lattice, lattice)
            }
            Tracking::Tracked { verify } => {
                let up = tracker::update_frontier(&frontier, &filled, &labels, backend);
                if verify && up.frontier.coords != active_boundary(&labels) {
                    return Err(EngineError::InvariantBreach { iteration: frontier.generation + 1 });
                }
                (up.frontier, up.candidates, frontier_size)
            }
        };
        report.iterations.push(IterationStats {
            iteration: frontier.generation + 1,
            frontier_size,
            candidates,
            threads_requested: threads,
            filled: fills.len(),
            forced,
            micros: tick.elapsed().as_micros() as u64,
        });
        report.filled_pixels += fills.len();
        frontier = next;
    }

    report.total_iterations = report.iterations.len();
    report.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(FillOutcome { image: img, mask: labels, report })
}

/// Gives every remaining inpaint pixel the color of its nearest readable
/// pixel (8-connected distance, ties by scan order). Returns the count.
fn fill_unreachable(image: &mut ImageBuffer, mask: &mut LabelMask) -> usize {
    let (w, h) = mask.dims();
    let mut source = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    for (k, &l) in mask.labels().iter().enumerate() {
        if l == Label::Readable {
            source[k] = k;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        for (ni, nj) in mask.neighbors8(k % w, k / w) {
            let nk = nj * w + ni;
            if source[nk] == usize::MAX {
                source[nk] = source[k];
                queue.push_back(nk);
            }
        }
    }
    let targets = mask.coords_with(Label::Inpaint);
    for p in &targets {
        let s = source[p.key(w)];
        let c = image.get(s % w, s / w);
        image.set(p.i, p.j, &c);
    }
    for p in &targets {
        mask.set(p.i, p.j, Label::Readable);
    }
    targets.len()
}
