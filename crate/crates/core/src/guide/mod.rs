//! Spline detection, the spline document format, structure tensors and
//! guide-field synthesis.

mod detect;
mod field;
mod spline;
mod tensor;

use serde::{Deserialize, Serialize};

use crate::grid::{GridError, PixelCoord};

pub use detect::{compute_ring, detect_edge_seeds, detect_splines, make_spline, ring_gap, EdgeSeed};
pub use field::{build_guide_field, GuideField};
pub use spline::{
    point_polyline_distance, point_segment_distance, Spline, SplineKind, SplineSet, SplineSource, FLATTEN_TOLERANCE,
    SPLINE_FORMAT_VERSION,
};
pub use tensor::{
    combined_radius, gaussian_kernel, kernel_radius, modified_structure_tensor, orientation_degrees, orientation_error,
    structure_tensor, TensorSample,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GuideError {
    #[error("no readable pixel lies at the ring distance from the inpainting domain")]
    EmptyRing,
    #[error("tensor window around {at:?} overlaps unreadable pixels")]
    WindowOverlap { at: PixelCoord },
    #[error("no readable pixels in the tensor window around {at:?}")]
    ZeroMass { at: PixelCoord },
    #[error("neither orientation from seed {seed:?} enters the inpainting domain")]
    NoEntry { seed: PixelCoord },
    #[error("spline {id:?} is invalid: {reason}")]
    InvalidSpline { id: String, reason: String },
    #[error("malformed spline document: {0}")]
    Json(String),
    #[error("unsupported spline document version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Tunables for automatic spline detection and the guide field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectParams {
    /// Pre-smoothing scale in pixels.
    pub sigma: f64,
    /// Integration scale in pixels.
    pub rho: f64,
    /// Coherence normalization.
    pub lambda: f64,
    /// Guide-field falloff in pixels.
    pub eta: f64,
    pub canny_low: f64,
    pub canny_high: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self { sigma: 2.0, rho: 4.0, lambda: 1e-5, eta: 3.0, canny_low: 0.08, canny_high: 0.2 }
    }
}
