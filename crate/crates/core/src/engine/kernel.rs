use crate::grid::{ball_offsets, sample_bilinear, BallRotation, Color, GhostPoint, ImageBuffer, LabelMask, PixelCoord};

use super::params::{FillParams, Neighborhood};

/// Ties in the infinite-anisotropy limit are resolved within this distance.
const ARGMIN_TOLERANCE: f64 = 1e-9;

/// Averaging weight of sample `y` for target `x` under guidance `g`.
/// For infinite `mu` only samples exactly on the guidance line keep weight.
pub fn weight(x: GhostPoint, y: GhostPoint, g: [f64; 2], mu: f64, eps: f64) -> f64 {
    let d = [y.x - x.x, y.y - x.y];
    let dist = d[0].hypot(d[1]);
    let across = -g[1] * d[0] + g[0] * d[1];
    if mu.is_infinite() {
        return if across.abs() <= ARGMIN_TOLERANCE { 1.0 / dist } else { 0.0 };
    }
    (-(mu * mu) / (2.0 * eps * eps) * across * across).exp() / dist
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelEval {
    /// Readable weight mass over total weight mass.
    pub confidence: f64,
    /// Weighted average over readable samples; `None` when there are none.
    pub color: Option<Color>,
}

/// Ball offsets excluding the center, shared across pixels.
#[derive(Clone, Debug)]
pub struct Stencil {
    offsets: Vec<[f64; 2]>,
}

impl Stencil {
    pub fn new(r: u32) -> Self {
        let offsets = ball_offsets(r)
            .into_iter()
            .filter(|&(n, m)| (n, m) != (0, 0))
            .map(|(n, m)| [n as f64, m as f64])
            .collect();
        Self { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Samples the (possibly rotated) ball around `x` against the current
/// readable set.
pub fn evaluate(
    image: &ImageBuffer,
    mask: &LabelMask,
    x: PixelCoord,
    g: [f64; 2],
    params: &FillParams,
    stencil: &Stencil,
) -> PixelEval {
    let rot = match params.neighborhood {
        Neighborhood::AxisBall => BallRotation::IDENTITY,
        Neighborhood::RotatedBall => BallRotation::aligned_with(g),
    };
    let (cx, cy) = (x.i as f64, x.j as f64);
    let channels = image.channels();
    let across = |d: [f64; 2]| (-g[1] * d[0] + g[0] * d[1]).abs();

    if params.mu.is_infinite() {
        let mut best_all = f64::INFINITY;
        let mut best_readable = f64::INFINITY;
        for &[n, m] in &stencil.offsets {
            let d = rot.apply(n, m);
            let a = across(d);
            best_all = best_all.min(a);
            if a < best_readable && sample_bilinear(image, mask, GhostPoint::new(cx + d[0], cy + d[1])).is_some() {
                best_readable = a;
            }
        }
        let (mut total, mut readable, mut acc_mass) = (0.0, 0.0, 0.0);
        let mut acc = Accumulator::new(channels);
        for &[n, m] in &stencil.offsets {
            let d = rot.apply(n, m);
            let a = across(d);
            let near_all = a <= best_all + ARGMIN_TOLERANCE;
            let near_readable = a <= best_readable + ARGMIN_TOLERANCE;
            if !near_all && !near_readable {
                continue;
            }
            let w = 1.0 / d[0].hypot(d[1]);
            let sample = sample_bilinear(image, mask, GhostPoint::new(cx + d[0], cy + d[1]));
            if near_all {
                total += w;
                if sample.is_some() {
                    readable += w;
                }
            }
            if let (true, Some(c)) = (near_readable, sample) {
                acc_mass += w;
                acc.add(w, &c);
            }
        }
        return finish(total, readable, acc_mass, &acc);
    }

    let scale = params.mu * params.mu / (2.0 * params.eps() * params.eps());
    let (mut total, mut readable) = (0.0, 0.0);
    let mut acc = Accumulator::new(channels);
    for &[n, m] in &stencil.offsets {
        let d = rot.apply(n, m);
        let a = across(d);
        let w = (-scale * a * a).exp() / d[0].hypot(d[1]);
        total += w;
        if let Some(c) = sample_bilinear(image, mask, GhostPoint::new(cx + d[0], cy + d[1])) {
            readable += w;
            acc.add(w, &c);
        }
    }
    finish(total, readable, readable, &acc)
}

/// Weighted sum of deviations from the first sample, so a ball of identical
/// colors averages to exactly that color.
struct Accumulator {
    channels: usize,
    base: Option<Color>,
    sum: Color,
}

impl Accumulator {
    fn new(channels: usize) -> Self {
        Self { channels, base: None, sum: [0.0; 4] }
    }

    #[inline]
    fn add(&mut self, w: f64, c: &Color) {
        let base = *self.base.get_or_insert(*c);
        for ch in 0..self.channels {
            self.sum[ch] += w * (c[ch] - base[ch]);
        }
    }

    fn mean(&self, mass: f64) -> Option<Color> {
        let base = self.base?;
        let mut out = base;
        for ch in 0..self.channels {
            out[ch] = base[ch] + self.sum[ch] / mass;
        }
        Some(out)
    }
}

fn finish(total: f64, readable: f64, acc_mass: f64, acc: &Accumulator) -> PixelEval {
    let confidence = if total > 0.0 { readable / total } else { 0.0 };
    let color = if acc_mass > 0.0 { acc.mean(acc_mass) } else { None };
    PixelEval { confidence, color }
}

/// Inverse-distance average of the readable 8-neighbors of `x`.
pub fn neighbor_average(image: &ImageBuffer, mask: &LabelMask, x: PixelCoord) -> Option<Color> {
    let channels = image.channels();
    let mut acc = [0.0; 4];
    let mut mass = 0.0;
    for (i, j) in mask.neighbors8(x.i, x.j) {
        if !mask.is_readable(i, j) {
            continue;
        }
        let w = if i != x.i && j != x.j { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
        let c = image.get(i, j);
        for ch in 0..channels {
            acc[ch] += w * c[ch];
        }
        mass += w;
    }
    (mass > 0.0).then(|| {
        for v in acc.iter_mut().take(channels) {
            *v /= mass;
        }
        acc
    })
}
