use serde::{Deserialize, Serialize};

use super::GuideError;

pub const SPLINE_FORMAT_VERSION: u32 = 1;

/// Bézier control polygons are flattened until every segment is within this
/// distance of the curve.
pub const FLATTEN_TOLERANCE: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplineSource {
    Auto,
    User,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplineKind {
    /// Points are polyline vertices.
    #[default]
    Polyline,
    /// Points form a piecewise cubic: on-curve, handle, handle, on-curve, ...
    Bezier,
}

impl SplineKind {
    fn is_polyline(&self) -> bool {
        *self == SplineKind::Polyline
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spline {
    pub id: String,
    pub source: SplineSource,
    /// Coherence-weighted direction, `‖direction‖ ≤ 1`.
    pub direction: [f64; 2],
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "SplineKind::is_polyline")]
    pub kind: SplineKind,
}

impl Spline {
    pub fn polyline(id: impl Into<String>, source: SplineSource, direction: [f64; 2], points: Vec<[f64; 2]>) -> Self {
        Self { id: id.into(), source, direction, points, kind: SplineKind::Polyline }
    }

    pub fn validate(&self) -> Result<(), GuideError> {
        let bad = |why: &str| Err(GuideError::InvalidSpline { id: self.id.clone(), reason: why.to_string() });
        if self.points.len() < 2 {
            return bad("fewer than two control points");
        }
        if self.points.iter().flatten().chain(&self.direction).any(|v| !v.is_finite()) {
            return bad("non-finite coordinate");
        }
        if self.points.windows(2).any(|w| w[0] == w[1]) {
            return bad("consecutive control points coincide");
        }
        if self.direction[0].hypot(self.direction[1]) > 1.0 {
            return bad("direction norm exceeds 1");
        }
        if self.kind == SplineKind::Bezier && (self.points.len() - 1) % 3 != 0 {
            return bad("bezier control point count must be 3k+1");
        }
        Ok(())
    }

    /// The curve as a polyline.
    pub fn flatten(&self) -> Vec<[f64; 2]> {
        match self.kind {
            SplineKind::Polyline => self.points.clone(),
            SplineKind::Bezier => {
                let mut out = vec![self.points[0]];
                for seg in self.points.windows(4).step_by(3) {
                    flatten_cubic([seg[0], seg[1], seg[2], seg[3]], FLATTEN_TOLERANCE, 0, &mut out);
                }
                out
            }
        }
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

fn flatten_cubic(p: [[f64; 2]; 4], tol: f64, depth: u32, out: &mut Vec<[f64; 2]>) {
    let flat = point_segment_distance(p[1], p[0], p[3]).max(point_segment_distance(p[2], p[0], p[3]));
    // The curve lies within 3/4 of the control polygon's deviation.
    if flat * 0.75 <= tol || depth >= 16 {
        if out.last() != Some(&p[3]) {
            out.push(p[3]);
        }
        return;
    }
    let ab = lerp(p[0], p[1], 0.5);
    let bc = lerp(p[1], p[2], 0.5);
    let cd = lerp(p[2], p[3], 0.5);
    let abc = lerp(ab, bc, 0.5);
    let bcd = lerp(bc, cd, 0.5);
    let mid = lerp(abc, bcd, 0.5);
    flatten_cubic([p[0], ab, abc, mid], tol, depth + 1, out);
    flatten_cubic([mid, bcd, cd, p[3]], tol, depth + 1, out);
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    (p[0] - (a[0] + t * d[0])).hypot(p[1] - (a[1] + t * d[1]))
}

pub fn point_polyline_distance(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => (p[0] - only[0]).hypot(p[1] - only[1]),
        _ => line.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min),
    }
}

/// The on-disk and on-wire spline document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineSet {
    pub version: u32,
    pub splines: Vec<Spline>,
}

impl Default for SplineSet {
    fn default() -> Self {
        Self { version: SPLINE_FORMAT_VERSION, splines: Vec::new() }
    }
}

impl SplineSet {
    pub fn new(splines: Vec<Spline>) -> Self {
        Self { version: SPLINE_FORMAT_VERSION, splines }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, GuideError> {
        let set: SplineSet = serde_json::from_slice(bytes).map_err(|e| GuideError::Json(e.to_string()))?;
        if set.version != SPLINE_FORMAT_VERSION {
            return Err(GuideError::UnsupportedVersion(set.version));
        }
        for s in &set.splines {
            s.validate()?;
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spline sets always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SplineSet {
        SplineSet::new(vec![
            Spline::polyline("auto-0", SplineSource::Auto, [0.5, -0.5], vec![[1.0, 2.0], [3.25, 4.125]]),
            Spline {
                id: "u".into(),
                source: SplineSource::User,
                direction: [0.1 + 0.2, 1.0 / 3.0],
                points: vec![[0.0, 0.0], [1.0, 5.0], [4.0, 5.0], [5.0, 0.0]],
                kind: SplineKind::Bezier,
            },
        ])
    }

    #[test]
    fn json_round_trip_is_exact() {
        let set = sample();
        let text = set.to_json();
        let back = SplineSet::from_json(text.as_bytes()).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.to_json(), text);
        assert!(!text.contains("polyline"));
    }

    #[test]
    fn wire_format_shape() {
        let raw = br#"{"version":1,"splines":[{"id":"a","source":"user","direction":[0,1],"points":[[0,0],[2,3]]}]}"#;
        let set = SplineSet::from_json(raw).unwrap();
        assert_eq!(set.splines[0].kind, SplineKind::Polyline);
        assert_eq!(set.splines[0].points[1], [2.0, 3.0]);
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(matches!(SplineSet::from_json(b"{"), Err(GuideError::Json(_))));
        let dup = br#"{"version":1,"splines":[{"id":"a","source":"user","direction":[0,1],"points":[[0,0],[0,0]]}]}"#;
        assert!(matches!(SplineSet::from_json(dup), Err(GuideError::InvalidSpline { .. })));
        let long = br#"{"version":1,"splines":[{"id":"a","source":"user","direction":[1,1],"points":[[0,0],[1,0]]}]}"#;
        assert!(SplineSet::from_json(long).is_err());
        assert!(matches!(
            SplineSet::from_json(br#"{"version":7,"splines":[]}"#),
            Err(GuideError::UnsupportedVersion(7))
        ));
    }

    #[test]
    fn bezier_flattening_stays_near_curve() {
        let s = &sample().splines[1];
        let poly = s.flatten();
        assert_eq!(poly.first(), Some(&[0.0, 0.0]));
        assert_eq!(poly.last(), Some(&[5.0, 0.0]));
        let p = &s.points;
        for k in 0..=200 {
            let t = k as f64 / 200.0;
            let mt = 1.0 - t;
            let b = [
                mt.powi(3) * p[0][0] + 3.0 * mt * mt * t * p[1][0] + 3.0 * mt * t * t * p[2][0] + t.powi(3) * p[3][0],
                mt.powi(3) * p[0][1] + 3.0 * mt * mt * t * p[1][1] + 3.0 * mt * t * t * p[2][1] + t.powi(3) * p[3][1],
            ];
            assert!(point_polyline_distance(b, &poly) <= FLATTEN_TOLERANCE + 1e-9);
        }
    }

    #[test]
    fn segment_distance() {
        assert_eq!(point_segment_distance([0.0, 1.0], [-1.0, 0.0], [1.0, 0.0]), 1.0);
        assert_eq!(point_segment_distance([3.0, 4.0], [0.0, 0.0], [0.0, 0.0]), 5.0);
        assert_eq!(point_segment_distance([4.0, 4.0], [0.0, 0.0], [1.0, 0.0]), 5.0);
    }
}
