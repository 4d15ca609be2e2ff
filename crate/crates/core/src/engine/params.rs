use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EngineError;
use crate::exec::Backend;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillOrder {
    /// Every frontier pixel is filled as soon as it is reached.
    #[default]
    Onion,
    /// Defers pixels whose confidence is at or below `c`.
    Smart,
    /// As `Smart`, but also defers pixels with weak guidance while any
    /// frontier pixel still carries guidance.
    SmartWithDataTerm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    AxisBall,
    #[default]
    RotatedBall,
}

impl FromStr for FillOrder {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "onion" => Ok(Self::Onion),
            "smart" => Ok(Self::Smart),
            "smart_with_data_term" | "data_term" => Ok(Self::SmartWithDataTerm),
            other => Err(EngineError::InvalidParams(format!("unknown order {other:?}"))),
        }
    }
}

impl FromStr for Neighborhood {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "axis" | "axis_ball" => Ok(Self::AxisBall),
            "rotated" | "rotated_ball" => Ok(Self::RotatedBall),
            other => Err(EngineError::InvalidParams(format!("unknown neighborhood {other:?}"))),
        }
    }
}

/// Anisotropy strength; `f64::INFINITY` is allowed and serializes as `"inf"`.
pub mod mu_serde {
    use super::*;

    pub fn serialize<S: Serializer>(mu: &f64, s: S) -> Result<S::Ok, S::Error> {
        if mu.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*mu)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => parse_mu(&t).map_err(serde::de::Error::custom),
        }
    }
}

pub fn parse_mu(text: &str) -> Result<f64, EngineError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        other => other.parse::<f64>().map_err(|_| EngineError::InvalidParams(format!("bad mu {text:?}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FillParams {
    /// Neighborhood radius in pixels.
    pub r: u32,
    #[serde(with = "mu_serde")]
    pub mu: f64,
    /// Confidence threshold for smart ordering.
    pub c: f64,
    /// Guidance threshold for the data term.
    pub c2: f64,
    pub order: FillOrder,
    pub neighborhood: Neighborhood,
    #[serde(skip)]
    pub backend: Backend,
}

impl Default for FillParams {
    fn default() -> Self {
        Self {
            r: 3,
            mu: 50.0,
            c: 0.05,
            c2: 0.0,
            order: FillOrder::Onion,
            neighborhood: Neighborhood::RotatedBall,
            backend: Backend::default(),
        }
    }
}

impl FillParams {
    pub fn guidefill() -> Self {
        Self::default()
    }

    /// Axis-aligned ball, onion order, radius 5.
    pub fn coherence_transport() -> Self {
        Self { r: 5, neighborhood: Neighborhood::AxisBall, order: FillOrder::Onion, ..Self::default() }
    }

    /// Isotropic axis-aligned averaging in onion order; pair with zero guidance.
    pub fn telea_baseline() -> Self {
        Self { neighborhood: Neighborhood::AxisBall, order: FillOrder::Onion, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidParams(m.to_string()));
        if self.r < 1 {
            return bad("r must be at least 1");
        }
        if self.mu.is_nan() || self.mu < 0.0 {
            return bad("mu must be non-negative");
        }
        if !(0.0..1.0).contains(&self.c) {
            return bad("c must lie in [0, 1)");
        }
        if !self.c2.is_finite() || self.c2 < 0.0 {
            return bad("c2 must be finite and non-negative");
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), EngineError> {
        let mut next = *self;
        let num = |v: &str| v.parse::<f64>().map_err(|_| EngineError::InvalidParams(format!("bad value for {key}: {v:?}")));
        match key {
            "r" => {
                next.r = value
                    .parse()
                    .map_err(|_| EngineError::InvalidParams(format!("bad value for r: {value:?}")))?
            }
            "mu" => next.mu = parse_mu(value)?,
            "c" => next.c = num(value)?,
            "c2" => next.c2 = num(value)?,
            "order" => next.order = value.parse()?,
            "neighborhood" => next.neighborhood = value.parse()?,
            "backend" => {
                next.backend = match value {
                    "sequential" => Backend::Sequential,
                    "parallel" => Backend::Parallel,
                    _ => return Err(EngineError::InvalidParams(format!("unknown backend {value:?}"))),
                }
            }
            _ => return Err(EngineError::InvalidParams(format!("unknown parameter {key:?}"))),
        }
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn eps(&self) -> f64 {
        self.r as f64
    }
}

impl fmt::Display for FillParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r={} mu={} c={} c2={} order={:?} neighborhood={:?}", self.r, self.mu, self.c, self.c2, self.order, self.neighborhood)
    }
}
