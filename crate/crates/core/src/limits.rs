//! Continuum-limit predictions for fixed guidance.
//!
//! Everything here uses math coordinates: `e₂ = (0, 1)` points up, the known
//! region lies below the domain, and angles are measured counterclockwise
//! from the x-axis.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{self, EngineError, FillOrder, FillParams, GuideSource, Neighborhood, Tracking};
use crate::exec::{self, Backend};
use crate::grid::{GridError, ImageBuffer, Label, LabelMask};

/// Ties in the infinite-anisotropy limit are resolved within this distance.
const ARGMIN_TOLERANCE: f64 = 1e-9;
/// Slack on the `y·e₂ ≤ -1` membership test for rotated points.
const MEMBERSHIP_TOLERANCE: f64 = 1e-9;
const QUADRATURE_RTOL: f64 = 1e-6;
const QUADRATURE_MAX_DEPTH: u32 = 60;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LimitError {
    #[error("radius must be at least 1")]
    InvalidRadius,
    #[error("the lower half-ball is empty for r = {r}")]
    EmptySet { r: u32 },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("quadrature missed its tolerance (estimate {estimate:e})")]
    QuadratureFailure { estimate: f64 },
    #[error("theta* must lie strictly between 0 and pi, got {0}")]
    BadAngle(f64),
    #[error("invalid study setup: {0}")]
    BadSetup(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Which discrete ball the fill samples from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallKind {
    /// Lattice-aligned ball.
    Axis,
    /// Ball rotated onto the guidance direction, sampled through ghost points.
    Rotated,
}

impl BallKind {
    pub fn neighborhood(self) -> Neighborhood {
        match self {
            BallKind::Axis => Neighborhood::AxisBall,
            BallKind::Rotated => Neighborhood::RotatedBall,
        }
    }
}

impl FromStr for BallKind {
    type Err = LimitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "axis" | "coherence-transport" => Ok(BallKind::Axis),
            "rotated" | "guidefill" => Ok(BallKind::Rotated),
            other => Err(LimitError::BadSetup(format!("unknown ball kind {other:?}"))),
        }
    }
}

/// Unit vector at angle `theta` (radians).
pub fn direction(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// Angle of the line through `v`, in `[0, π)`.
pub fn line_angle(v: [f64; 2]) -> f64 {
    let a = v[1].atan2(v[0]).rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

fn unit(g: [f64; 2]) -> Option<[f64; 2]> {
    let n = g[0].hypot(g[1]);
    (n > 0.0 && n.is_finite()).then(|| [g[0] / n, g[1] / n])
}

/// Sample offsets of the ball that lie at least one row below the center.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfBallSet {
    pub kind: BallKind,
    pub r: u32,
    pub g: [f64; 2],
    pub points: Vec<[f64; 2]>,
}

pub fn half_ball(kind: BallKind, r: u32, g: [f64; 2]) -> HalfBallSet {
    let ri = r as i64;
    let mut points = Vec::new();
    let frame = match (kind, unit(g)) {
        (BallKind::Rotated, Some(u)) => Some((u, [-u[1], u[0]])),
        _ => None,
    };
    for m in -ri..=ri {
        for n in -ri..=ri {
            if n * n + m * m > ri * ri {
                continue;
            }
            let (nf, mf) = (n as f64, m as f64);
            match frame {
                None if m <= -1 => points.push([nf, mf]),
                None => {}
                Some((u, p)) => {
                    let y = [nf * u[0] + mf * p[0], nf * u[1] + mf * p[1]];
                    if y[1] <= -1.0 + MEMBERSHIP_TOLERANCE {
                        points.push(y);
                    }
                }
            }
        }
    }
    HalfBallSet { kind, r, g, points }
}

/// Predicted transport direction and the angle of the line it spans.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitPrediction {
    pub g_star: [f64; 2],
    /// Radians in `(0, π)`.
    pub theta_star: f64,
}

impl LimitPrediction {
    fn from_vector(g_star: [f64; 2]) -> Self {
        Self { g_star, theta_star: line_angle(g_star) }
    }

    pub fn theta_star_degrees(&self) -> f64 {
        self.theta_star.to_degrees()
    }
}

/// Weighted center of mass of the lower half-ball. `g` is normalized first;
/// `mu` may be infinite.
pub fn limit_direction(kind: BallKind, r: u32, mu: f64, g: [f64; 2]) -> Result<LimitPrediction, LimitError> {
    if r < 1 {
        return Err(LimitError::InvalidRadius);
    }
    let set = half_ball(kind, r, g);
    if set.points.is_empty() {
        return Err(LimitError::EmptySet { r });
    }
    let u = unit(g).unwrap_or([0.0, 0.0]);
    let across = |y: &[f64; 2]| (-u[1] * y[0] + u[0] * y[1]).abs();
    let eps = r as f64;

    let mut sum = [0.0; 2];
    let mut mass = 0.0;
    let mut add = |y: &[f64; 2], w: f64| {
        sum[0] += w * y[0];
        sum[1] += w * y[1];
        mass += w;
    };
    if mu.is_infinite() {
        let best = set.points.iter().map(across).fold(f64::INFINITY, f64::min);
        for y in set.points.iter().filter(|y| across(y) <= best + ARGMIN_TOLERANCE) {
            add(y, 1.0 / y[0].hypot(y[1]));
        }
    } else {
        let scale = mu * mu / (2.0 * eps * eps);
        for y in &set.points {
            let a = across(y);
            add(y, (-scale * a * a).exp() / y[0].hypot(y[1]));
        }
    }
    if mass <= 0.0 {
        return Err(LimitError::EmptySet { r });
    }
    Ok(LimitPrediction::from_vector([sum[0] / mass, sum[1] / mass]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub theta_deg: f64,
    pub theta_star_deg: f64,
}

/// `θ*` against `θ` at `samples` midpoints of equal subdivisions of `(0°, 180°)`.
pub fn theta_star_curve(kind: BallKind, r: u32, mu: f64, samples: usize) -> Result<Vec<CurvePoint>, LimitError> {
    if samples < 2 {
        return Err(LimitError::TooFewSamples { min: 2, got: samples });
    }
    (0..samples)
        .map(|k| {
            let theta = PI * (k as f64 + 0.5) / samples as f64;
            let p = limit_direction(kind, r, mu, direction(theta))?;
            Ok(CurvePoint { theta_deg: theta.to_degrees(), theta_star_deg: p.theta_star_degrees() })
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["theta_deg", "theta_star_deg"])?;
    for p in curve {
        wtr.serialize((p.theta_deg, p.theta_star_deg))?;
    }
    wtr.flush()
}

/// `∫₀¹ ρ e^{-bρ²} dρ`.
fn radial_first(b: f64) -> f64 {
    if b < 1e-12 {
        0.5 - b / 4.0
    } else {
        -(-b).exp_m1() / (2.0 * b)
    }
}

/// `∫₀¹ e^{-bρ²} dρ`.
fn radial_zeroth(b: f64) -> f64 {
    if b < 1e-12 {
        1.0 - b / 3.0
    } else {
        let s = b.sqrt();
        PI.sqrt() * libm::erf(s) / (2.0 * s)
    }
}

/// Transport direction of the continuous half-disk with unit radius, where
/// the discrete sum is replaced by an integral.
pub fn marz_limit_direction(mu: f64, g: [f64; 2]) -> Result<LimitPrediction, LimitError> {
    if mu.is_nan() || mu < 0.0 {
        return Err(LimitError::BadSetup(format!("mu must be non-negative, got {mu}")));
    }
    let u = unit(g);
    if mu.is_infinite() {
        return match u {
            Some(u) if u[1].abs() > 0.0 => {
                let s = -u[1].signum();
                Ok(LimitPrediction::from_vector([s * u[0], s * u[1]]))
            }
            _ => Err(LimitError::QuadratureFailure { estimate: 0.0 }),
        };
    }
    let u = u.unwrap_or([0.0, 0.0]);
    let a = mu * mu / 2.0;
    let b_of = |phi: f64| {
        let s = -u[1] * phi.cos() + u[0] * phi.sin();
        a * s * s
    };

    // The integrands peak where the guidance line crosses the lower half.
    let mut breaks = vec![PI, 2.0 * PI];
    if u[1] != 0.0 || u[0] != 0.0 {
        let phi0 = (-u[1]).atan2(-u[0]).rem_euclid(2.0 * PI);
        let phi0 = if phi0 < PI { phi0 + PI } else { phi0 };
        if phi0 > PI && phi0 < 2.0 * PI {
            breaks.insert(1, phi0);
        }
    }
    let mut x = 0.0;
    let mut y = 0.0;
    let mut mass = 0.0;
    for w in breaks.windows(2) {
        x += integrate(|phi| phi.cos() * radial_first(b_of(phi)), w[0], w[1])?;
        y += integrate(|phi| phi.sin() * radial_first(b_of(phi)), w[0], w[1])?;
        mass += integrate(|phi| radial_zeroth(b_of(phi)), w[0], w[1])?;
    }
    if mass <= 0.0 {
        return Err(LimitError::QuadratureFailure { estimate: mass });
    }
    Ok(LimitPrediction::from_vector([x / mass, y / mass]))
}

/// Adaptive Simpson on `[a, b]` to relative tolerance [`QUADRATURE_RTOL`].
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64, LimitError> {
    // A coarse pass fixes the absolute scale for the tolerance.
    let coarse: f64 = (0..=64)
        .map(|k| f(a + (b - a) * k as f64 / 64.0).abs())
        .sum::<f64>()
        * (b - a)
        / 65.0;
    let tol = QUADRATURE_RTOL * coarse.max(1e-300);
    let (fa, fm, fb) = (f(a), f((a + b) / 2.0), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let mut failed = false;
    let v = simpson_step(&f, a, b, fa, fm, fb, whole, tol, QUADRATURE_MAX_DEPTH, &mut failed);
    if failed || !v.is_finite() {
        return Err(LimitError::QuadratureFailure { estimate: v });
    }
    Ok(v)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    failed: &mut bool,
) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *failed = true;
        return left + right;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, failed)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, failed)
}

/// Transport solution on the periodic unit strip: the trace carried along
/// lines at angle `theta_star`.
pub fn weak_solution(trace: impl Fn(f64) -> f64, theta_star: f64, x: f64, y: f64) -> Result<f64, LimitError> {
    if !(theta_star > 0.0 && theta_star < PI) {
        return Err(LimitError::BadAngle(theta_star));
    }
    let cot = if theta_star == FRAC_PI_2 { 0.0 } else { theta_star.cos() / theta_star.sin() };
    Ok(trace((x - cot * y).rem_euclid(1.0)))
}

/// Setup for [`convergence_study`]. `g` is in math coordinates.
#[derive(Clone, Debug)]
pub struct ConvergenceSetup {
    pub kind: BallKind,
    pub r: u32,
    pub mu: f64,
    pub g: [f64; 2],
    pub resolutions: Vec<usize>,
    /// Norm exponents; `f64::INFINITY` selects the max norm.
    pub p_norms: Vec<f64>,
    pub backend: Backend,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub p: f64,
    pub error: f64,
    /// `log₂(e_prev / e)` against the previous resolution.
    pub order: Option<f64>,
}

/// Rendered periodic strip problem at resolution `n`: an `n × n` domain
/// above `r + 2` known rows filled with the transport solution.
pub struct StripProblem {
    pub image: ImageBuffer,
    pub mask: LabelMask,
    pub exact: Vec<f64>,
    pub n: usize,
}

/// Math-space position of pixel `(i, j)` on an `n`-wide strip.
pub fn strip_position(i: usize, j: usize, n: usize) -> (f64, f64) {
    let h = 1.0 / n as f64;
    ((i + 1) as f64 * h, (n as f64 - j as f64) * h)
}

pub fn strip_problem(trace: &(impl Fn(f64) -> f64 + ?Sized), theta_star: f64, r: u32, n: usize) -> Result<StripProblem, LimitError> {
    if n == 0 {
        return Err(LimitError::BadSetup("resolution must be positive".into()));
    }
    let height = n + r as usize + 2;
    let mut exact = vec![0.0; n * height];
    for j in 0..height {
        for i in 0..n {
            let (x, y) = strip_position(i, j, n);
            exact[j * n + i] = weak_solution(trace, theta_star, x, y)?;
        }
    }
    let image = ImageBuffer::from_fn(n, height, 1, |i, j| {
        let v = if j < n { 0.0 } else { exact[j * n + i] };
        [v, 0.0, 0.0, 0.0]
    })?;
    let mask = LabelMask::from_fn(n, height, |_, j| if j < n { Label::Inpaint } else { Label::Readable })?.with_wrap_x(true);
    Ok(StripProblem { image, mask, exact, n })
}

/// Discrete `L^p` norm over the domain rows with cell area `1/n²`.
pub fn lp_error(values: &ImageBuffer, exact: &[f64], n: usize, p: f64) -> f64 {
    let errs = (0..n * n).map(|k| (values.data()[k] - exact[k]).abs());
    if p.is_infinite() {
        return errs.fold(0.0, f64::max);
    }
    let area = 1.0 / (n * n) as f64;
    (errs.map(|e| e.powf(p) * area).sum::<f64>()).powf(1.0 / p)
}

/// Fills the periodic strip at each resolution under onion order and fixed
/// guidance and compares against the transport solution at the predicted
/// angle.
pub fn convergence_study(trace: &(dyn Fn(f64) -> f64 + Sync), setup: &ConvergenceSetup) -> Result<Vec<ConvergenceRow>, LimitError> {
    if setup.resolutions.is_empty() || setup.p_norms.is_empty() {
        return Err(LimitError::BadSetup("need at least one resolution and one norm".into()));
    }
    let prediction = limit_direction(setup.kind, setup.r, setup.mu, setup.g)?;
    let g = unit(setup.g).unwrap_or([0.0, 0.0]);
    let g_image = [g[0], -g[1]];
    let params = FillParams {
        r: setup.r,
        mu: setup.mu,
        order: FillOrder::Onion,
        neighborhood: setup.kind.neighborhood(),
        backend: setup.backend,
        ..FillParams::default()
    };

    let per_resolution = exec::map_slice(setup.backend, &setup.resolutions, |&n| -> Result<Vec<f64>, LimitError> {
        let problem = strip_problem(trace, prediction.theta_star, setup.r, n)?;
        let out = engine::run(&problem.image, &problem.mask, GuideSource::Fixed(g_image), &params, Tracking::Tracked { verify: false })?;
        Ok(setup.p_norms.iter().map(|&p| lp_error(&out.image, &problem.exact, n, p)).collect())
    });

    let mut rows = Vec::new();
    let mut previous: Option<&Vec<f64>> = None;
    let errors: Vec<Vec<f64>> = per_resolution.into_iter().collect::<Result<_, _>>()?;
    for (n, errs) in setup.resolutions.iter().zip(&errors) {
        for (k, (&p, &error)) in setup.p_norms.iter().zip(errs).enumerate() {
            let order = previous.map(|prev| (prev[k] / error).log2()).filter(|o| o.is_finite());
            rows.push(ConvergenceRow { n: *n, p, error, order });
        }
        previous = Some(errs);
    }
    Ok(rows)
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], out: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["N", "p", "error", "order"])?;
    for row in rows {
        let p = if row.p.is_infinite() { "inf".to_string() } else { row.p.to_string() };
        let order = row.order.map(|o| o.to_string()).unwrap_or_default();
        wtr.write_record([row.n.to_string(), p, row.error.to_string(), order])?;
    }
    wtr.flush()
}
