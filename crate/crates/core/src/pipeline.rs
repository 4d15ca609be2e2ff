//! Detect or load splines, build the guide field, fill.

use serde::{Deserialize, Serialize};

use crate::engine::{self, EngineError, FillOutcome, FillParams, GuideSource, Tracking};
use crate::grid::{GridError, ImageBuffer, LabelMask};
use crate::guide::{build_guide_field, detect_splines, DetectParams, GuideError, GuideField, SplineSet};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Guide(#[from] GuideError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl PipelineError {
    pub fn is_dimension_mismatch(&self) -> bool {
        matches!(
            self,
            PipelineError::Grid(GridError::DimensionMismatch { .. })
                | PipelineError::Engine(EngineError::Grid(GridError::DimensionMismatch { .. }))
                | PipelineError::Engine(EngineError::GuideDimensions { .. })
                | PipelineError::Guide(GuideError::Grid(GridError::DimensionMismatch { .. }))
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub fill: FillParams,
    pub detect: DetectParams,
    /// Frontier tracking instead of full rescans. Output is identical.
    pub tracked: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self { fill: FillParams::default(), detect: DetectParams::default(), tracked: true }
    }
}

impl PipelineParams {
    /// `key=value` override covering fill, detection and tracking keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), EngineError> {
        let num = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| EngineError::InvalidParams(format!("bad value for {key}: {value:?}")))
        };
        match key {
            "sigma" => self.detect.sigma = num()?,
            "rho" => self.detect.rho = num()?,
            "lambda" => self.detect.lambda = num()?,
            "eta" => self.detect.eta = num()?,
            "canny_low" => self.detect.canny_low = num()?,
            "canny_high" => self.detect.canny_high = num()?,
            "tracked" => {
                self.tracked = value
                    .parse()
                    .map_err(|_| EngineError::InvalidParams(format!("bad value for tracked: {value:?}")))?
            }
            _ => self.fill.set(key, value)?,
        }
        Ok(())
    }

    /// Applies a list of `key=value` strings in order.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<(), EngineError> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| EngineError::InvalidParams(format!("expected key=value, got {pair:?}")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub outcome: FillOutcome,
    pub splines: SplineSet,
    pub field: GuideField,
}

/// The given splines, or detected ones. A ring that does not fit in the
/// image yields no splines rather than an error.
pub fn resolve_splines(
    image: &ImageBuffer,
    mask: &LabelMask,
    given: Option<&SplineSet>,
    params: &PipelineParams,
) -> Result<SplineSet, PipelineError> {
    mask.check_matches(image)?;
    match given {
        Some(set) => {
            for s in &set.splines {
                s.validate()?;
            }
            Ok(set.clone())
        }
        None => match detect_splines(image, mask, &params.detect, params.fill.backend) {
            Ok(found) => Ok(SplineSet::new(found)),
            Err(GuideError::EmptyRing) => Ok(SplineSet::default()),
            Err(e) => Err(e.into()),
        },
    }
}

pub fn guide_field(mask: &LabelMask, splines: &SplineSet, params: &PipelineParams) -> GuideField {
    build_guide_field(&splines.splines, mask, params.detect.eta, params.fill.backend)
}

pub fn run_pipeline(
    image: &ImageBuffer,
    mask: &LabelMask,
    given: Option<&SplineSet>,
    params: &PipelineParams,
) -> Result<PipelineOutput, PipelineError> {
    let splines = resolve_splines(image, mask, given, params)?;
    let field = guide_field(mask, &splines, params);
    let tracking = if params.tracked { Tracking::Tracked { verify: false } } else { Tracking::Untracked };
    let outcome = engine::run(image, mask, GuideSource::Field(&field), &params.fill, tracking)?;
    Ok(PipelineOutput { outcome, splines, field })
}
