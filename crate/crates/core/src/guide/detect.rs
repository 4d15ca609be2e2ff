use std::collections::VecDeque;

use super::spline::{Spline, SplineSource};
use super::tensor::{gaussian_kernel, kernel_radius, structure_tensor, TensorSample};
use super::{DetectParams, GuideError};
use crate::exec::{self, Backend};
use crate::grid::{chebyshev_distance, ImageBuffer, Label, LabelMask, PixelCoord};

/// Gap, in pixels, left between the ring and the domain so the cascaded
/// tensor windows stay clear of it.
pub fn ring_gap(sigma: f64, rho: f64) -> usize {
    (2.0 * sigma + 2.0 * rho).ceil() as usize + 1
}

/// Readable pixels whose Chebyshev distance to the inpainting domain is
/// exactly `ring_gap + 1` and that are at least that far from any bystander.
pub fn compute_ring(mask: &LabelMask, sigma: f64, rho: f64) -> Result<Vec<PixelCoord>, GuideError> {
    let d = ring_gap(sigma, rho) as u32 + 1;
    let to_domain = chebyshev_distance(mask, |l| l == Label::Inpaint);
    let to_blocked = chebyshev_distance(mask, |l| l != Label::Readable);
    let w = mask.width();
    let ring: Vec<PixelCoord> = (0..to_domain.len())
        .filter(|&k| to_domain[k] == d && to_blocked[k] >= d)
        .map(|k| PixelCoord::from_key(k, w))
        .collect();
    if ring.is_empty() {
        return Err(GuideError::EmptyRing);
    }
    Ok(ring)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeSeed {
    pub at: PixelCoord,
    /// Scale-normalized gradient magnitude, roughly the edge contrast.
    pub strength: f64,
}

const SEED_CLUSTER_RADIUS: usize = 3;

/// Canny edge detection on an annulus around the ring, restricted to readable
/// pixels; returns ring pixels touching a retained edge, one per cluster.
pub fn detect_edge_seeds(
    image: &ImageBuffer,
    mask: &LabelMask,
    ring: &[PixelCoord],
    sigma: f64,
    canny_low: f64,
    canny_high: f64,
) -> Vec<EdgeSeed> {
    if ring.is_empty() {
        return Vec::new();
    }
    let (w, h) = mask.dims();
    let band = kernel_radius(sigma) as u32 + 2;
    let ring_dist = {
        let mut tmp = LabelMask::new(w, h, Label::Readable).expect("non-empty lattice");
        for p in ring {
            tmp.set(p.i, p.j, Label::Inpaint);
        }
        chebyshev_distance(&tmp, |l| l == Label::Inpaint)
    };
    let in_annulus = |k: usize| ring_dist[k] <= band && mask.labels()[k] == Label::Readable;

    let ks = gaussian_kernel(sigma);
    let r = (ks.len() / 2) as isize;
    let ch = image.channels();
    // Masked smoothing on pixels near the annulus.
    let near = |k: usize| ring_dist[k] <= band + 1;
    let mut smooth = vec![0.0; w * h * ch];
    for k in (0..w * h).filter(|&k| near(k)) {
        let (ci, cj) = ((k % w) as isize, (k / w) as isize);
        let mut mass = 0.0;
        let mut acc = [0.0; 4];
        for b in -r..=r {
            for a in -r..=r {
                let (x, y) = (ci + a, cj + b);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                if !mask.is_readable(x, y) {
                    continue;
                }
                let wt = ks[(a + r) as usize] * ks[(b + r) as usize];
                mass += wt;
                for (c, v) in acc.iter_mut().enumerate().take(ch) {
                    *v += wt * image.channel(x, y, c);
                }
            }
        }
        if mass > 0.0 {
            for c in 0..ch {
                smooth[k * ch + c] = acc[c] / mass;
            }
        }
    }

    let scale = sigma * (2.0 * std::f64::consts::PI).sqrt();
    let mut mag = vec![0.0; w * h];
    let mut dir = vec![[0.0f64; 2]; w * h];
    for k in (0..w * h).filter(|&k| in_annulus(k)) {
        let (i, j) = (k % w, k / w);
        if i == 0 || j == 0 || i + 1 == w || j + 1 == h {
            continue;
        }
        let mut best = (0.0, [0.0, 0.0]);
        for c in 0..ch {
            let gx = 0.5 * (smooth[(k + 1) * ch + c] - smooth[(k - 1) * ch + c]);
            let gy = 0.5 * (smooth[(k + w) * ch + c] - smooth[(k - w) * ch + c]);
            let m = gx.hypot(gy);
            if m > best.0 {
                best = (m, [gx, gy]);
            }
        }
        mag[k] = best.0 * scale;
        dir[k] = best.1;
    }

    // Non-maximum suppression along the quantized gradient direction.
    let mut thin = vec![0.0; w * h];
    for k in (0..w * h).filter(|&k| mag[k] > 0.0) {
        let [gx, gy] = dir[k];
        let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
        let step: isize = if !(22.5..157.5).contains(&angle) {
            1
        } else if angle < 67.5 {
            w as isize + 1
        } else if angle < 112.5 {
            w as isize
        } else {
            w as isize - 1
        };
        let k = k as isize;
        let fwd = mag[(k + step) as usize];
        let back = mag[(k - step) as usize];
        if mag[k as usize] >= fwd && mag[k as usize] > back {
            thin[k as usize] = mag[k as usize];
        }
    }

    // Hysteresis.
    let mut edge = vec![false; w * h];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for k in 0..w * h {
        if thin[k] >= canny_high {
            edge[k] = true;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        for (ni, nj) in mask.neighbors8(k % w, k / w) {
            let nk = nj * w + ni;
            if !edge[nk] && thin[nk] >= canny_low {
                edge[nk] = true;
                queue.push_back(nk);
            }
        }
    }

    // Ring pixels on an edge outrank those merely touching one.
    let mut seeds: Vec<(bool, EdgeSeed)> = ring
        .iter()
        .filter_map(|&p| {
            let k = p.key(w);
            if edge[k] {
                return Some((true, EdgeSeed { at: p, strength: thin[k] }));
            }
            let mut strength: f64 = 0.0;
            for (ni, nj) in [(0isize, -1isize), (-1, 0), (1, 0), (0, 1)]
                .iter()
                .filter_map(|&(di, dj)| mask.resolve(p.i as isize + di, p.j as isize + dj))
            {
                let nk = nj * w + ni;
                if edge[nk] {
                    strength = strength.max(thin[nk]);
                }
            }
            (strength > 0.0).then_some((false, EdgeSeed { at: p, strength }))
        })
        .collect();

    seeds.sort_by(|(da, a), (db, b)| {
        db.cmp(da).then(b.strength.total_cmp(&a.strength)).then(a.at.key(w).cmp(&b.at.key(w)))
    });
    let mut kept: Vec<EdgeSeed> = Vec::new();
    for (_, s) in seeds {
        let close = kept.iter().any(|k| {
            k.at.i.abs_diff(s.at.i) <= SEED_CLUSTER_RADIUS && k.at.j.abs_diff(s.at.j) <= SEED_CLUSTER_RADIUS
        });
        if !close {
            kept.push(s);
        }
    }
    kept.sort_by_key(|s| s.at.key(w));
    kept
}

const MARCH_STEP: f64 = 0.5;

fn label_at(mask: &LabelMask, x: f64, y: f64) -> Option<Label> {
    let (i, j) = (x.round(), y.round());
    if i < 0.0 || j < 0.0 || i >= mask.width() as f64 || j >= mask.height() as f64 {
        return None;
    }
    Some(mask.get(i as usize, j as usize))
}

/// Steps until the ray from `seed` along `dir` first lands on an inpaint
/// pixel, within `max_len` pixels.
fn entry_steps(mask: &LabelMask, seed: [f64; 2], dir: [f64; 2], max_len: f64) -> Option<usize> {
    let steps = (max_len / MARCH_STEP).ceil() as usize;
    (1..=steps).find_map(|s| {
        let t = s as f64 * MARCH_STEP;
        match label_at(mask, seed[0] + t * dir[0], seed[1] + t * dir[1]) {
            Some(Label::Inpaint) => Some(Some(s)),
            None => Some(None),
            _ => None,
        }
    })?
}

/// Builds a straight spline from `seed` along the minor eigenvector of
/// `tensor`, oriented into the inpainting domain.
pub fn make_spline(
    id: impl Into<String>,
    seed: PixelCoord,
    tensor: &TensorSample,
    mask: &LabelMask,
    params: &DetectParams,
) -> Result<Spline, GuideError> {
    let coherence = (tensor.coherence_gap() / params.lambda).tanh().min(1.0 - f64::EPSILON);
    let v = tensor.v_min;
    let origin = [seed.i as f64, seed.j as f64];
    let reach = 2.0 * (ring_gap(params.sigma, params.rho) + 1) as f64;
    let fwd = entry_steps(mask, origin, v, reach);
    let back = entry_steps(mask, origin, [-v[0], -v[1]], reach);
    let dir = match (fwd, back) {
        (Some(a), Some(b)) if b < a => [-v[0], -v[1]],
        (Some(_), _) => v,
        (None, Some(_)) => [-v[0], -v[1]],
        (None, None) => return Err(GuideError::NoEntry { seed }),
    };

    let mut s = entry_steps(mask, origin, dir, reach).expect("direction enters the domain");
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    let end = loop {
        let t = s as f64 * MARCH_STEP;
        let p = [origin[0] + t * dir[0], origin[1] + t * dir[1]];
        match label_at(mask, p[0], p[1]) {
            Some(Label::Readable) => break p,
            None => break [p[0].clamp(0.0, w - 1.0), p[1].clamp(0.0, h - 1.0)],
            _ => s += 1,
        }
    };
    Ok(Spline::polyline(id, SplineSource::Auto, [coherence * dir[0], coherence * dir[1]], vec![origin, end]))
}

/// Ring, seeds, tensors and splines in one pass.
pub fn detect_splines(
    image: &ImageBuffer,
    mask: &LabelMask,
    params: &DetectParams,
    backend: Backend,
) -> Result<Vec<Spline>, GuideError> {
    mask.check_matches(image)?;
    let ring = compute_ring(mask, params.sigma, params.rho)?;
    let seeds = detect_edge_seeds(image, mask, &ring, params.sigma, params.canny_low, params.canny_high);
    let built = exec::map_slice(backend, &seeds, |s| {
        let tensor = structure_tensor(image, mask, s.at, params.sigma, params.rho).ok()?;
        make_spline(String::new(), s.at, &tensor, mask, params).ok()
    });
    Ok(built
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(k, mut s)| {
            s.id = format!("auto-{k}");
            s
        })
        .collect())
}
