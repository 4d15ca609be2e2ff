use serde::{Deserialize, Serialize};

use super::GuideError;
use crate::grid::{ImageBuffer, LabelMask, PixelCoord};

/// Half-width of a truncated Gaussian window, `⌈2s⌉` (window `4s+1`).
pub fn kernel_radius(scale: f64) -> usize {
    (2.0 * scale).ceil() as usize
}

/// Truncated, unit-mass 1D Gaussian with standard deviation `scale`.
pub fn gaussian_kernel(scale: f64) -> Vec<f64> {
    let r = kernel_radius(scale) as isize;
    let mut k: Vec<f64> = (-r..=r).map(|t| (-((t * t) as f64) / (2.0 * scale * scale)).exp()).collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Chebyshev radius of the full cascade: smoothing window, centered
/// difference, then integration window.
pub fn combined_radius(sigma: f64, rho: f64) -> usize {
    kernel_radius(sigma) + kernel_radius(rho) + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorSample {
    pub matrix: [[f64; 2]; 2],
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub v_max: [f64; 2],
    pub v_min: [f64; 2],
}

impl TensorSample {
    pub fn from_matrix(a: f64, b: f64, c: f64) -> Self {
        let mean = 0.5 * (a + c);
        let half_diff = 0.5 * (a - c);
        let disc = half_diff.hypot(b);
        let lambda_max = mean + disc;
        let lambda_min = mean - disc;
        let v_max = if b != 0.0 {
            // Pick the better conditioned of the two equivalent forms.
            let (x, y) = if a >= c { (lambda_max - c, b) } else { (b, lambda_max - a) };
            let n = x.hypot(y);
            [x / n, y / n]
        } else if a >= c {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        Self {
            matrix: [[a, b], [b, c]],
            lambda_max,
            lambda_min,
            v_max,
            v_min: [-v_max[1], v_max[0]],
        }
    }

    pub fn coherence_gap(&self) -> f64 {
        (self.lambda_max - self.lambda_min).max(0.0)
    }
}

/// Orientation of `v` in degrees within `[0, 180)`, measured counter-clockwise
/// from the +x axis with y pointing up (image rows grow downwards).
pub fn orientation_degrees(v: [f64; 2]) -> f64 {
    (-v[1]).atan2(v[0]).to_degrees().rem_euclid(180.0)
}

/// Smallest absolute difference between two orientations in degrees.
pub fn orientation_error(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

struct Clamped<'a> {
    image: &'a ImageBuffer,
    mask: &'a LabelMask,
}

impl Clamped<'_> {
    #[inline]
    fn at(&self, x: isize, y: isize) -> (usize, usize) {
        let i = x.clamp(0, self.image.width() as isize - 1) as usize;
        let j = y.clamp(0, self.image.height() as isize - 1) as usize;
        (i, j)
    }

    #[inline]
    fn readable(&self, x: isize, y: isize) -> bool {
        let (i, j) = self.at(x, y);
        self.mask.is_readable(i, j)
    }

    /// Gaussian smoothing at `(x, y)`. With `masked`, only readable pixels
    /// contribute and the result is renormalized; `None` means zero mass.
    fn smooth(&self, x: isize, y: isize, k: &[f64], masked: bool, out: &mut [f64]) -> Option<()> {
        let r = (k.len() / 2) as isize;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut mass = 0.0;
        for b in -r..=r {
            let kb = k[(b + r) as usize];
            for a in -r..=r {
                if masked && !self.readable(x + a, y + b) {
                    continue;
                }
                let w = k[(a + r) as usize] * kb;
                let (i, j) = self.at(x + a, y + b);
                for (ch, o) in out.iter_mut().enumerate() {
                    *o += w * self.image.channel(i, j, ch);
                }
                mass += w;
            }
        }
        if mass <= 0.0 {
            return None;
        }
        if masked {
            out.iter_mut().for_each(|v| *v /= mass);
        }
        Some(())
    }
}

fn accumulate(image: &ImageBuffer, mask: &LabelMask, x: PixelCoord, sigma: f64, rho: f64, masked: bool) -> Option<TensorSample> {
    let view = Clamped { image, mask };
    let ks = gaussian_kernel(sigma);
    let kr = gaussian_kernel(rho);
    let rr = (kr.len() / 2) as isize;
    let span = rr + 1;
    let side = (2 * span + 1) as usize;
    let ch = image.channels();
    let (cx, cy) = (x.i as isize, x.j as isize);

    let mut smoothed: Vec<Option<Vec<f64>>> = vec![None; side * side];
    let mut buf = vec![0.0; ch];
    for dy in -span..=span {
        for dx in -span..=span {
            let idx = ((dy + span) as usize) * side + (dx + span) as usize;
            if view.smooth(cx + dx, cy + dy, &ks, masked, &mut buf).is_some() {
                smoothed[idx] = Some(buf.clone());
            }
        }
    }
    let at = |dx: isize, dy: isize| smoothed[((dy + span) as usize) * side + (dx + span) as usize].as_deref();

    let (mut a, mut b, mut c, mut mass) = (0.0, 0.0, 0.0, 0.0);
    for dy in -rr..=rr {
        for dx in -rr..=rr {
            if masked && !view.readable(cx + dx, cy + dy) {
                continue;
            }
            let w = kr[(dx + rr) as usize] * kr[(dy + rr) as usize];
            mass += w;
            let diff = |p: Option<&[f64]>, q: Option<&[f64]>, k: usize| match (p, q) {
                (Some(p), Some(q)) => 0.5 * (p[k] - q[k]),
                _ => 0.0,
            };
            for k in 0..ch {
                let gx = diff(at(dx + 1, dy), at(dx - 1, dy), k);
                let gy = diff(at(dx, dy + 1), at(dx, dy - 1), k);
                a += w * gx * gx;
                b += w * gx * gy;
                c += w * gy * gy;
            }
        }
    }
    if mass <= 0.0 {
        return None;
    }
    if masked {
        a /= mass;
        b /= mass;
        c /= mass;
    }
    Some(TensorSample::from_matrix(a, b, c))
}

/// Structure tensor at `x`. Every pixel of the cascaded window (clamped to the
/// lattice) must be readable.
pub fn structure_tensor(
    image: &ImageBuffer,
    mask: &LabelMask,
    x: PixelCoord,
    sigma: f64,
    rho: f64,
) -> Result<TensorSample, GuideError> {
    mask.check_matches(image)?;
    let view = Clamped { image, mask };
    let r = combined_radius(sigma, rho) as isize;
    let (cx, cy) = (x.i as isize, x.j as isize);
    for dy in -r..=r {
        for dx in -r..=r {
            if !view.readable(cx + dx, cy + dy) {
                return Err(GuideError::WindowOverlap { at: x });
            }
        }
    }
    Ok(accumulate(image, mask, x, sigma, rho, false).expect("unmasked kernels have unit mass"))
}

/// Structure tensor with every convolution restricted to readable pixels and
/// renormalized by the readable mass.
pub fn modified_structure_tensor(
    image: &ImageBuffer,
    mask: &LabelMask,
    x: PixelCoord,
    sigma: f64,
    rho: f64,
) -> Result<TensorSample, GuideError> {
    mask.check_matches(image)?;
    accumulate(image, mask, x, sigma, rho, true).ok_or(GuideError::ZeroMass { at: x })
}
