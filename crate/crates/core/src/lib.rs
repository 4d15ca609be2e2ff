//! Guided transport inpainting.
//!
//! Missing pixels are filled shell by shell, each as a weighted average of
//! already known pixels sampled on a ball that can be rotated to follow a
//! guide field. The crate also carries the tools to analyse that process:
//! limiting transport directions, convergence studies, frontier-tracking
//! work accounting and synthetic experiment harnesses.

pub mod engine;
pub mod exec;
pub mod grid;
pub mod guide;
pub mod harness;
pub mod io;
pub mod limits;
pub mod pipeline;
pub mod tracker;

pub use engine::{inpaint, EngineError, FillOrder, FillOutcome, FillParams, FillReport, GuideSource, Neighborhood};
pub use exec::Backend;
pub use grid::{ImageBuffer, Label, LabelMask, PixelCoord};
pub use guide::{DetectParams, GuideField, Spline, SplineSet};
pub use pipeline::{run_pipeline, PipelineError, PipelineOutput, PipelineParams};
pub use tracker::{run_tracked, WorkMetrics};
