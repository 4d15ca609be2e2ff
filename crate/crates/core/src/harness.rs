//! Synthetic problems and the studies built on them.
//!
//! Continuum specs use math coordinates (y up). Pixel `(i, j)` of a `W × H`
//! rendering of `Ω = [x0, x1] × [y0, y1]` has its center at
//! `(x0 + (i + ½)·dx, y1 − (j + ½)·dy)`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::engine::{self, EngineError, FillOrder, FillParams, GuideSource, Tracking};
use crate::grid::{sample_bilinear, GhostPoint, GridError, ImageBuffer, Label, LabelMask, PixelCoord};
use crate::guide::{
    modified_structure_tensor, orientation_degrees, orientation_error, structure_tensor, GuideError, Spline, SplineSet,
    SplineSource,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid problem spec: {0}")]
    Spec(String),
    #[error("power-law fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error("no edge crossing found in row {row}")]
    NoCrossing { row: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Guide(#[from] GuideError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn within(&self, outer: &Rect) -> bool {
        self.x0 >= outer.x0 && self.x1 <= outer.x1 && self.y0 >= outer.y0 && self.y1 <= outer.y1
    }

    fn is_proper(&self) -> bool {
        self.x1 > self.x0 && self.y1 > self.y0
    }
}

/// Two-tone geometry defined by a line at `theta_deg` through `through`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Geometry {
    /// Points within perpendicular distance `half_width` of the line.
    Band { theta_deg: f64, through: [f64; 2], half_width: f64 },
    /// Points on or left of the line, looking along its direction.
    Edge { theta_deg: f64, through: [f64; 2] },
}

impl Geometry {
    fn signed_distance(theta_deg: f64, through: [f64; 2], x: f64, y: f64) -> f64 {
        let t = theta_deg.to_radians();
        -t.sin() * (x - through[0]) + t.cos() * (y - through[1])
    }

    pub fn inside(&self, x: f64, y: f64) -> bool {
        match *self {
            Geometry::Band { theta_deg, through, half_width } => {
                Self::signed_distance(theta_deg, through, x, y).abs() <= half_width
            }
            Geometry::Edge { theta_deg, through } => Self::signed_distance(theta_deg, through, x, y) >= 0.0,
        }
    }

    pub fn theta_deg(&self) -> f64 {
        match *self {
            Geometry::Band { theta_deg, .. } | Geometry::Edge { theta_deg, .. } => theta_deg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyntheticProblem {
    pub omega: Rect,
    pub domain: Rect,
    pub geometry: Geometry,
    pub inside: f64,
    pub outside: f64,
    pub width: usize,
    pub height: usize,
}

pub struct Rendered {
    pub image: ImageBuffer,
    pub mask: LabelMask,
    pub truth: ImageBuffer,
}

impl SyntheticProblem {
    pub fn pixel_size(&self) -> (f64, f64) {
        (
            (self.omega.x1 - self.omega.x0) / self.width as f64,
            (self.omega.y1 - self.omega.y0) / self.height as f64,
        )
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        let (dx, dy) = self.pixel_size();
        (self.omega.x0 + (i as f64 + 0.5) * dx, self.omega.y1 - (j as f64 + 0.5) * dy)
    }

    /// Row whose center is nearest to `y`; ties go to the upper row.
    pub fn row_at(&self, y: f64) -> usize {
        let (_, dy) = self.pixel_size();
        let t = (self.omega.y1 - y) / dy - 0.5;
        let j = if (t - t.floor() - 0.5).abs() < 1e-9 { t.floor() } else { t.round() };
        (j.max(0.0) as usize).min(self.height - 1)
    }

    /// The line through a band of vertical half-width 0.1 at 73° through the
    /// origin, on `[-1, 1] × [-0.5, 0.5]` with the middle 80% × 60% missing.
    pub fn degradation_line(width: usize, height: usize) -> Self {
        let theta: f64 = 73.0;
        Self {
            omega: Rect::new(-1.0, 1.0, -0.5, 0.5),
            domain: Rect::new(-0.8, 0.8, -0.3, 0.3),
            geometry: Geometry::Band { theta_deg: theta, through: [0.0, 0.0], half_width: 0.1 * theta.to_radians().cos() },
            inside: 1.0,
            outside: 0.0,
            width,
            height,
        }
    }

    /// Horizontal band `0.45 ≤ y ≤ 0.55` on `[0, 4] × [0, 1]` with
    /// `D = [0.4, 3.96] × [0.2, 0.8]`, rendered `4h × h`.
    pub fn scaling_stripe(height: usize) -> Self {
        Self {
            omega: Rect::new(0.0, 4.0, 0.0, 1.0),
            domain: Rect::new(0.4, 3.96, 0.2, 0.8),
            geometry: Geometry::Band { theta_deg: 0.0, through: [0.0, 0.5], half_width: 0.05 },
            inside: 1.0,
            outside: 0.0,
            width: 4 * height,
            height,
        }
    }

    /// Unit square missing everything above `y = 0.1`, with an edge at
    /// `theta_deg` entering the missing region halfway across its span.
    pub fn half_plane(theta_deg: f64, size: usize) -> Self {
        let cot = 1.0 / theta_deg.to_radians().tan();
        let x_entry = 0.5 - 0.45 * cot;
        Self {
            omega: Rect::new(0.0, 1.0, 0.0, 1.0),
            domain: Rect::new(0.0, 1.0, 0.1, 1.0),
            geometry: Geometry::Edge { theta_deg, through: [x_entry, 0.1] },
            inside: 1.0,
            outside: 0.0,
            width: size,
            height: size,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.width == 0 || self.height == 0 {
            return Err(HarnessError::Spec("resolution must be positive".into()));
        }
        if !self.omega.is_proper() || !self.domain.is_proper() {
            return Err(HarnessError::Spec("rectangles must have positive extent".into()));
        }
        if !self.domain.within(&self.omega) {
            return Err(HarnessError::Spec("inpainting domain must lie inside the image domain".into()));
        }
        if let Geometry::Band { half_width, .. } = self.geometry {
            if !(half_width > 0.0) {
                return Err(HarnessError::Spec("band half-width must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Hard-thresholded rendering. Missing pixels are zeroed in `image`.
pub fn render_problem(spec: &SyntheticProblem) -> Result<Rendered, HarnessError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let truth = ImageBuffer::from_fn(w, h, 1, |i, j| {
        let (x, y) = spec.center(i, j);
        [if spec.geometry.inside(x, y) { spec.inside } else { spec.outside }, 0.0, 0.0, 0.0]
    })?;
    let mask = LabelMask::from_fn(w, h, |i, j| {
        let (x, y) = spec.center(i, j);
        if spec.domain.contains(x, y) {
            Label::Inpaint
        } else {
            Label::Readable
        }
    })?;
    let mut image = truth.clone();
    for p in mask.coords_with(Label::Inpaint) {
        image.set(p.i, p.j, &[0.0; 4]);
    }
    Ok(Rendered { image, mask, truth })
}

/// Fixed guidance along the problem's line, in image coordinates.
pub fn line_guidance(spec: &SyntheticProblem) -> [f64; 2] {
    let t = spec.geometry.theta_deg().to_radians();
    [t.cos(), -t.sin()]
}

/// Angle in degrees of the extrapolated edge in a filled half-plane problem,
/// from a least-squares fit of the 0.5-crossings between heights `from` and
/// `to` (continuum units).
pub fn measure_edge_angle(spec: &SyntheticProblem, filled: &ImageBuffer, from: f64, to: f64) -> Result<f64, HarnessError> {
    let level = 0.5 * (spec.inside + spec.outside);
    let rows: Vec<usize> = (0..spec.height)
        .filter(|&j| {
            let (_, y) = spec.center(0, j);
            y >= from && y <= to
        })
        .collect();
    if rows.len() < 2 {
        return Err(HarnessError::Spec("need at least two rows to fit an edge".into()));
    }
    let mut pts = Vec::with_capacity(rows.len());
    for &j in &rows {
        let x = edge_crossing(spec, filled, j, level).ok_or(HarnessError::NoCrossing { row: j })?;
        pts.push((spec.center(0, j).1, x));
    }
    let n = pts.len() as f64;
    let my = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - my) * (p.1 - mx)).sum();
    let syy: f64 = pts.iter().map(|p| (p.0 - my).powi(2)).sum();
    let slope = sxy / syy;
    Ok(1.0f64.atan2(slope).to_degrees())
}

/// Continuum x of the last 0.5-crossing in row `j`, scanning left to right
/// from the inside color.
fn edge_crossing(spec: &SyntheticProblem, img: &ImageBuffer, j: usize, level: f64) -> Option<f64> {
    let sign = if spec.inside >= spec.outside { 1.0 } else { -1.0 };
    let v = |i: usize| sign * (img.channel(i, j, 0) - level);
    let last = (0..spec.width).rev().find(|&i| v(i) >= 0.0)?;
    if last + 1 >= spec.width {
        return None;
    }
    let (a, b) = (v(last), v(last + 1));
    let t = a / (a - b);
    let (x, _) = spec.center(last, j);
    Some(x + t * spec.pixel_size().0)
}

/// 10%–90% rise distance of the left flank of the band in row `j`, in
/// continuum units: the gap between the last pixel at or below 10% and the
/// first pixel at or above 90% of the row's contrast.
pub fn transition_width(spec: &SyntheticProblem, img: &ImageBuffer, j: usize) -> Option<f64> {
    let row: Vec<f64> = (0..spec.width).map(|i| img.channel(i, j, 0)).collect();
    let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 {
        return None;
    }
    let peak = row.iter().position(|&v| v == hi)?;
    let t = |i: usize| (row[i] - lo) / (hi - lo);
    let first_high = (0..=peak).rev().take_while(|&i| t(i) >= 0.9).last()?;
    let last_low = (0..first_high).rev().find(|&i| t(i) <= 0.1)?;
    Some((first_high - last_low) as f64 * spec.pixel_size().0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegradationRow {
    pub width: usize,
    pub height: usize,
    pub y: f64,
    pub transition_width: f64,
}

/// Fills the degradation line at each resolution with the rotated ball and
/// correct fixed guidance, then measures the edge rise at each cross-section.
pub fn degradation_study(
    resolutions: &[(usize, usize)],
    cross_sections: &[f64],
    params: &FillParams,
) -> Result<Vec<DegradationRow>, HarnessError> {
    let mut rows = Vec::new();
    for &(w, h) in resolutions {
        let spec = SyntheticProblem::degradation_line(w, h);
        let r = render_problem(&spec)?;
        let (out, _) = crate::tracker::run_tracked(&r.image, &r.mask, GuideSource::Fixed(line_guidance(&spec)), params)?;
        for &y in cross_sections {
            let j = spec.row_at(y);
            let width = transition_width(&spec, &out.image, j).ok_or(HarnessError::NoCrossing { row: j })?;
            rows.push(DegradationRow { width: w, height: h, y, transition_width: width });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    /// Number of inpaint pixels.
    pub n: usize,
    pub width: usize,
    pub height: usize,
    pub wall_ms: f64,
    pub threads_max: usize,
    pub iterations: usize,
}

/// Runs each problem in onion order with zero guidance and records size,
/// wall time, peak requested threads and iteration count.
pub fn scaling_study(problems: &[SyntheticProblem], params: &FillParams, tracked: bool) -> Result<Vec<ScalingRow>, HarnessError> {
    let params = FillParams { order: FillOrder::Onion, ..*params };
    let tracking = if tracked { Tracking::Tracked { verify: false } } else { Tracking::Untracked };
    problems
        .iter()
        .map(|spec| {
            let r = render_problem(spec)?;
            let out = engine::run(&r.image, &r.mask, GuideSource::ZERO, &params, tracking)?;
            Ok(ScalingRow {
                n: r.mask.count(Label::Inpaint),
                width: spec.width,
                height: spec.height,
                wall_ms: out.report.wall_time_ms,
                threads_max: out.report.max_threads_requested(),
                iterations: out.report.total_iterations,
            })
        })
        .collect()
}

/// Onion shells needed for a solid `a × b` rectangle of missing pixels
/// surrounded by readable ones.
pub fn rectangle_shells(a: usize, b: usize) -> usize {
    a.min(b).div_ceil(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub alpha: f64,
    /// RMS residual in natural-log space.
    pub residual: f64,
}

impl PowerLawFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.a * n.powf(self.alpha)
    }
}

/// Least-squares fit of `value ≈ a·N^alpha` on log-log axes.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::DegenerateFit("need at least two points".into()));
    }
    if points.iter().any(|&(n, v)| !(n > 0.0) || !(v > 0.0)) {
        return Err(HarnessError::DegenerateFit("all values must be positive".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(HarnessError::DegenerateFit("all N are equal".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let ss: f64 = logs.iter().map(|p| (p.1 - intercept - alpha * p.0).powi(2)).sum();
    Ok(PowerLawFit { a: intercept.exp(), alpha, residual: (ss / k).sqrt() })
}

/// A horizontal stripe whose middle half is missing, red on the left end and
/// green on the right. Image borders are not boundaries, so only the two ends
/// feed the fill.
pub fn shock_stripe(width: usize, height: usize) -> Result<(ImageBuffer, LabelMask), HarnessError> {
    if width < 4 || height == 0 {
        return Err(HarnessError::Spec("stripe needs width >= 4 and positive height".into()));
    }
    let (a, b) = (width / 4, width - width / 4);
    let mask = LabelMask::from_fn(width, height, |i, _| if (a..b).contains(&i) { Label::Inpaint } else { Label::Readable })?;
    let image = ImageBuffer::from_fn(width, height, 3, |i, _| match i {
        i if i < a => [1.0, 0.0, 0.0, 0.0],
        i if i >= b => [0.0, 1.0, 0.0, 0.0],
        _ => [0.0; 4],
    })?;
    Ok((image, mask))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShockProfile {
    /// Column `i` of the strongest jump between columns `i` and `i + 1`.
    pub column: usize,
    pub peak: f64,
    /// Other local maxima reaching at least half the peak.
    pub rivals: usize,
}

/// Row-averaged horizontal gradient magnitude (summed over channels).
pub fn shock_profile(img: &ImageBuffer) -> ShockProfile {
    let (w, h) = img.dims();
    let grad: Vec<f64> = (0..w.saturating_sub(1))
        .map(|i| {
            (0..h)
                .map(|j| {
                    let (a, b) = (img.get(i, j), img.get(i + 1, j));
                    (0..img.channels()).map(|c| (b[c] - a[c]).abs()).sum::<f64>()
                })
                .sum::<f64>()
                / h as f64
        })
        .collect();
    let (column, peak) = grad.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &g)| if g > best.1 { (i, g) } else { best });
    let rivals = (0..grad.len())
        .filter(|&i| i != column && grad[i] >= 0.5 * peak)
        .filter(|&i| (i == 0 || grad[i] > grad[i - 1]) && (i + 1 == grad.len() || grad[i] >= grad[i + 1]))
        .count();
    ShockProfile { column, peak, rivals }
}

/// A thick shallow line crossing a square hole close to its upper side,
/// with a user spline along it. Shells from the upper side reach the line's
/// path long before the ends of the line do.
pub struct ClippedLineScene {
    pub image: ImageBuffer,
    pub mask: LabelMask,
    pub splines: SplineSet,
    /// A point on the line center, in pixel coordinates.
    pub anchor: [f64; 2],
    /// Unit direction of the line in image coordinates.
    pub direction: [f64; 2],
    /// Column of the hole's vertical midline.
    pub midline: f64,
}

pub fn clipped_line_scene() -> Result<ClippedLineScene, HarnessError> {
    const SIZE: usize = 100;
    const HOLE: std::ops::Range<usize> = 20..80;
    const THETA_DEG: f64 = 15.0;
    const HALF_WIDTH: f64 = 4.0;
    let anchor = [50.0, 30.0];
    let t = THETA_DEG.to_radians();
    let u = [t.cos(), -t.sin()];
    let image = ImageBuffer::from_fn(SIZE, SIZE, 1, |i, j| {
        let d = -u[1] * (i as f64 - anchor[0]) + u[0] * (j as f64 - anchor[1]);
        [if d.abs() <= HALF_WIDTH { 1.0 } else { 0.0 }, 0.0, 0.0, 0.0]
    })?;
    let mask = LabelMask::from_fn(SIZE, SIZE, |i, j| {
        if HOLE.contains(&i) && HOLE.contains(&j) {
            Label::Inpaint
        } else {
            Label::Readable
        }
    })?;
    let reach = 2.0 * SIZE as f64;
    let spline = Spline::polyline(
        "line",
        SplineSource::User,
        u,
        vec![[anchor[0] - reach * u[0], anchor[1] - reach * u[1]], [anchor[0] + reach * u[0], anchor[1] + reach * u[1]]],
    );
    Ok(ClippedLineScene {
        image,
        mask,
        splines: SplineSet::new(vec![spline]),
        anchor,
        direction: u,
        midline: (HOLE.start + HOLE.end - 1) as f64 / 2.0,
    })
}

/// Distance from the line color of the filled value where the line center
/// crosses the hole's vertical midline.
pub fn midline_discontinuity(scene: &ClippedLineScene, filled: &ImageBuffer) -> f64 {
    let s = (scene.midline - scene.anchor[0]) / scene.direction[0];
    let p = GhostPoint::new(scene.midline, scene.anchor[1] + s * scene.direction[1]);
    let everywhere = LabelMask::new(filled.width(), filled.height(), Label::Readable).expect("non-empty image");
    let v = sample_bilinear(filled, &everywhere, p).map(|c| c[0]).unwrap_or(0.0);
    (1.0 - v).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TensorComparison {
    pub ring_point: PixelCoord,
    pub boundary_point: PixelCoord,
    pub ring_degrees: f64,
    pub boundary_degrees: f64,
    pub ring_error: f64,
    pub boundary_error: f64,
}

/// Known upper half-plane, light below the line `y = x` and grey above, with
/// the lower half missing. Returns the image, the mask and the pixel where the
/// line meets the active boundary.
pub fn diagonal_edge(size: usize) -> Result<(ImageBuffer, LabelMask, PixelCoord), HarnessError> {
    if size < 32 {
        return Err(HarnessError::Spec("diagonal edge needs size >= 32".into()));
    }
    let top = size / 2;
    let c = size / 2;
    // Line offset by half a pixel so no center sits on it.
    let image = ImageBuffer::from_fn(size, size, 1, |i, j| {
        let x = i as f64 - c as f64;
        let y = top as f64 - j as f64 - 0.5;
        [if y < x { 1.0 } else { 0.5 }, 0.0, 0.0, 0.0]
    })?;
    let mask = LabelMask::from_fn(size, size, |_, j| if j >= top { Label::Inpaint } else { Label::Readable })?;
    Ok((image, mask, PixelCoord::new(c, top)))
}

/// Compares the plain tensor on the line at Chebyshev distance `gap` from the
/// missing region with the masked tensor on the boundary.
pub fn tensor_comparison(size: usize, sigma: f64, rho: f64, gap: usize) -> Result<TensorComparison, HarnessError> {
    let (image, mask, a) = diagonal_edge(size)?;
    let b = PixelCoord::new(a.i + gap, a.j - gap);
    let at_b = structure_tensor(&image, &mask, b, sigma, rho)?;
    let at_a = modified_structure_tensor(&image, &mask, a, sigma, rho)?;
    let ring_degrees = orientation_degrees(at_b.v_min);
    let boundary_degrees = orientation_degrees(at_a.v_min);
    Ok(TensorComparison {
        ring_point: b,
        boundary_point: a,
        ring_degrees,
        boundary_degrees,
        ring_error: orientation_error(ring_degrees, 45.0),
        boundary_error: orientation_error(boundary_degrees, 45.0),
    })
}

/// `{study}_{unix millis}.csv` inside `dir`.
pub fn study_path(dir: &Path, study: &str) -> PathBuf {
    let millis = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    dir.join(format!("{study}_{millis}.csv"))
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row).map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `rows` to a fresh timestamped CSV in `dir` and returns its path.
pub fn save_study<T: Serialize>(dir: &Path, study: &str, rows: &[T]) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir)?;
    let path = study_path(dir, study);
    write_rows(rows, fs::File::create(&path)?)?;
    Ok(path)
}

/// Gnuplot script plotting two CSV columns on log-log axes.
pub fn loglog_script(csv: &Path, x_col: usize, y_col: usize, title: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\nset title '{title}'\nplot '{}' using {x_col}:{y_col} with linespoints\n",
        csv.display()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Backend;

    #[test]
    fn degradation_render_sizes() {
        let spec = SyntheticProblem::degradation_line(200, 100);
        let r = render_problem(&spec).unwrap();
        let d = r.mask.coords_with(Label::Inpaint);
        assert_eq!(d.len(), 160 * 60);
        let (i0, i1) = (d.iter().map(|p| p.i).min().unwrap(), d.iter().map(|p| p.i).max().unwrap());
        let (j0, j1) = (d.iter().map(|p| p.j).min().unwrap(), d.iter().map(|p| p.j).max().unwrap());
        assert_eq!((i0, i1, j0, j1), (20, 179, 20, 79));
    }

    #[test]
    fn vertical_band_is_vertical() {
        let spec = SyntheticProblem {
            geometry: Geometry::Band { theta_deg: 90.0, through: [0.0, 0.0], half_width: 0.04 },
            ..SyntheticProblem::degradation_line(100, 50)
        };
        let r = render_problem(&spec).unwrap();
        for j in 0..50 {
            let cols: Vec<usize> = (0..100).filter(|&i| r.truth.channel(i, j, 0) == 1.0).collect();
            assert_eq!(cols, vec![48, 49, 50, 51]);
        }
    }

    #[test]
    fn bad_specs() {
        let mut spec = SyntheticProblem::degradation_line(20, 10);
        spec.geometry = Geometry::Band { theta_deg: 10.0, through: [0.0, 0.0], half_width: 0.0 };
        assert!(matches!(render_problem(&spec), Err(HarnessError::Spec(_))));
        let mut spec = SyntheticProblem::degradation_line(20, 10);
        spec.domain = Rect::new(-2.0, 0.0, 0.0, 0.1);
        assert!(render_problem(&spec).is_err());
    }

    #[test]
    fn boundary_cross_section_is_one_pixel() {
        let spec = SyntheticProblem::degradation_line(200, 100);
        let r = render_problem(&spec).unwrap();
        let j = spec.row_at(0.3);
        assert_eq!(r.mask.get(100, j), Label::Readable);
        let w = transition_width(&spec, &r.image, j).unwrap();
        assert!((w - 0.01).abs() < 1e-12);
    }

    #[test]
    fn power_law_fits() {
        let pts: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5].iter().map(|&n: &f64| (n, 2.0 * n.sqrt())).collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.alpha - 0.5).abs() < 1e-12);
        assert!((fit.a - 2.0).abs() < 1e-9);
        assert!(fit.residual < 1e-12);
        let lin: Vec<(f64, f64)> = [3.0, 30.0, 300.0].iter().map(|&n| (n, n)).collect();
        assert!((fit_power_law(&lin).unwrap().alpha - 1.0).abs() < 1e-12);
        assert!(fit_power_law(&[(5.0, 1.0), (5.0, 2.0)]).is_err());
        assert!(fit_power_law(&[(5.0, 1.0)]).is_err());
    }

    #[test]
    fn stripe_shells_match_rectangle_count() {
        for h in [70, 90] {
            let spec = SyntheticProblem::scaling_stripe(h);
            let r = render_problem(&spec).unwrap();
            let d = r.mask.coords_with(Label::Inpaint);
            let rows = d.iter().map(|p| p.j).max().unwrap() - d.iter().map(|p| p.j).min().unwrap() + 1;
            let cols = d.iter().map(|p| p.i).max().unwrap() - d.iter().map(|p| p.i).min().unwrap() + 1;
            assert_eq!(rows * cols, d.len());
            let out = scaling_study(&[spec], &FillParams::default(), true).unwrap();
            assert_eq!(out[0].iterations, rectangle_shells(rows, cols));
            assert_eq!(out[0].n, d.len());
        }
    }

    #[test]
    fn half_plane_vertical_edge_stays_vertical() {
        let spec = SyntheticProblem::half_plane(90.0, 120);
        let r = render_problem(&spec).unwrap();
        let out = engine::run(&r.image, &r.mask, GuideSource::Fixed(line_guidance(&spec)), &FillParams::default(), Tracking::Tracked { verify: false })
            .unwrap();
        let angle = measure_edge_angle(&spec, &out.image, 0.2, 0.9).unwrap();
        assert!((angle - 90.0).abs() < 0.5, "{angle}");
    }

    #[test]
    fn shock_stripe_meets_in_the_middle() {
        let (img, mask) = shock_stripe(80, 10).unwrap();
        let out = engine::inpaint(&img, &mask, GuideSource::Fixed([1.0, 0.0]), &FillParams::default()).unwrap();
        let p = shock_profile(&out.image);
        assert_eq!(p.column, 39);
        assert_eq!(p.rivals, 0, "{p:?}");
    }

    #[test]
    fn clipped_line_needs_smart_order() {
        let scene = clipped_line_scene().unwrap();
        assert_eq!(midline_discontinuity(&scene, &scene.image), 0.0);
        let field = crate::guide::build_guide_field(&scene.splines.splines, &scene.mask, 3.0, Backend::default());
        let run = |order| {
            let params = FillParams { order, ..FillParams::default() };
            let out = engine::run(&scene.image, &scene.mask, GuideSource::Field(&field), &params, Tracking::Untracked).unwrap();
            midline_discontinuity(&scene, &out.image)
        };
        assert!(run(FillOrder::Onion) > 0.3);
        assert!(run(FillOrder::Smart) < 0.05);
    }

    #[test]
    fn study_csv_naming() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_study(dir.path(), "scaling", &[ScalingRow { n: 1, width: 2, height: 3, wall_ms: 0.5, threads_max: 4, iterations: 5 }]).unwrap();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        assert!(name.starts_with("scaling_") && name.ends_with(".csv"));
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with("n,width,height,wall_ms,threads_max,iterations"));
    }
}
