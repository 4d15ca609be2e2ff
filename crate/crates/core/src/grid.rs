//! Image lattice, label masks, discrete boundary operators and ghost-pixel
//! sampling.
//!
//! Coordinates are in pixel units with the origin at the top-left pixel
//! center, `x` growing to the right and `y` growing downwards. A pixel
//! `(i, j)` has its center at `(i as f64, j as f64)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Maximum number of channels an [`ImageBuffer`] may carry.
pub const MAX_CHANNELS: usize = 4;

/// A per-pixel color. Only the first `channels` entries are meaningful.
pub type Color = [f64; MAX_CHANNELS];

/// Ghost coordinates closer than this to a lattice line are snapped onto it,
/// so rounding noise in rotated offsets never drags an extra stencil pixel in.
pub const SNAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("image dimensions must be non-zero (got {width}x{height})")]
    EmptyLattice { width: usize, height: usize },
    #[error("channel count must be in 1..=4 (got {0})")]
    BadChannels(usize),
    #[error("buffer length {got} does not match {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: image is {image:?}, mask is {mask:?}")]
    DimensionMismatch {
        image: (usize, usize),
        mask: (usize, usize),
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelCoord {
    pub i: usize,
    pub j: usize,
}

impl PixelCoord {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    /// Row-major sort key; ordering by it is the `(j, i)` lexicographic order.
    #[inline]
    pub fn key(self, width: usize) -> usize {
        self.j * width + self.i
    }

    #[inline]
    pub fn from_key(key: usize, width: usize) -> Self {
        Self { i: key % width, j: key / width }
    }

    #[inline]
    pub fn to_point(self) -> GhostPoint {
        GhostPoint::new(self.i as f64, self.j as f64)
    }
}

/// A continuous sample position, possibly between pixel centers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhostPoint {
    pub x: f64,
    pub y: f64,
}

impl GhostPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self, GridError> {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self, GridError> {
        check_dims(width, height)?;
        if !(1..=MAX_CHANNELS).contains(&channels) {
            return Err(GridError::BadChannels(channels));
        }
        if !value.is_finite() {
            return Err(GridError::NonFinite(0));
        }
        Ok(Self { width, height, channels, data: vec![value; width * height * channels] })
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, GridError> {
        check_dims(width, height)?;
        if !(1..=MAX_CHANNELS).contains(&channels) {
            return Err(GridError::BadChannels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(GridError::BadLength { expected, got: data.len() });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(idx));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds a buffer by evaluating `f(i, j)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize) -> Color,
    ) -> Result<Self, GridError> {
        let mut img = Self::new(width, height, channels)?;
        for j in 0..height {
            for i in 0..width {
                let c = f(i, j);
                img.set(i, j, &c);
            }
        }
        if let Some(idx) = img.data.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(idx));
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (j * self.width + i) * self.channels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Color {
        let o = self.offset(i, j);
        let mut c = [0.0; MAX_CHANNELS];
        c[..self.channels].copy_from_slice(&self.data[o..o + self.channels]);
        c
    }

    #[inline]
    pub fn channel(&self, i: usize, j: usize, ch: usize) -> f64 {
        self.data[self.offset(i, j) + ch]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: &Color) {
        let o = self.offset(i, j);
        let n = self.channels;
        self.data[o..o + n].copy_from_slice(&c[..n]);
    }

    /// Per-channel minimum and maximum over all pixels for which `keep` holds.
    pub fn range_where(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Option<(Color, Color)> {
        let mut lo = [f64::INFINITY; MAX_CHANNELS];
        let mut hi = [f64::NEG_INFINITY; MAX_CHANNELS];
        let mut any = false;
        for j in 0..self.height {
            for i in 0..self.width {
                if !keep(i, j) {
                    continue;
                }
                any = true;
                let c = self.get(i, j);
                for ch in 0..self.channels {
                    lo[ch] = lo[ch].min(c[ch]);
                    hi[ch] = hi[ch].max(c[ch]);
                }
            }
        }
        any.then_some((lo, hi))
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), GridError> {
    if width == 0 || height == 0 {
        return Err(GridError::EmptyLattice { width, height });
    }
    Ok(())
}

/// Per-pixel role in an inpainting problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    /// Usable data.
    Readable,
    /// Part of the domain to fill.
    Inpaint,
    /// Neither filled nor consumed, e.g. a foreground object.
    Bystander,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<Label>,
    wrap_x: bool,
}

const NEIGHBOR_OFFSETS: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

impl LabelMask {
    pub fn new(width: usize, height: usize, fill: Label) -> Result<Self, GridError> {
        check_dims(width, height)?;
        Ok(Self { width, height, labels: vec![fill; width * height], wrap_x: false })
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<Label>) -> Result<Self, GridError> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(GridError::BadLength { expected: width * height, got: labels.len() });
        }
        Ok(Self { width, height, labels, wrap_x: false })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Label) -> Result<Self, GridError> {
        let mut m = Self::new(width, height, Label::Readable)?;
        for j in 0..height {
            for i in 0..width {
                m.labels[j * width + i] = f(i, j);
            }
        }
        Ok(m)
    }

    /// Enables periodic wrap in `x`; neighbors and ghost stencils then cross
    /// the left/right lattice edges.
    pub fn with_wrap_x(mut self, wrap: bool) -> Self {
        self.wrap_x = wrap;
        self
    }

    pub fn wrap_x(&self) -> bool {
        self.wrap_x
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Label {
        self.labels[j * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, label: Label) {
        self.labels[j * self.width + i] = label;
    }

    #[inline]
    pub fn is_readable(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == Label::Readable
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn check_matches(&self, image: &ImageBuffer) -> Result<(), GridError> {
        if image.dims() != self.dims() {
            return Err(GridError::DimensionMismatch { image: image.dims(), mask: self.dims() });
        }
        Ok(())
    }

    /// Resolves a possibly out-of-lattice column, honoring `wrap_x`.
    #[inline]
    pub fn resolve_x(&self, x: isize) -> Option<usize> {
        let w = self.width as isize;
        if (0..w).contains(&x) {
            Some(x as usize)
        } else if self.wrap_x {
            Some(x.rem_euclid(w) as usize)
        } else {
            None
        }
    }

    #[inline]
    pub fn resolve(&self, x: isize, y: isize) -> Option<(usize, usize)> {
        if y < 0 || y >= self.height as isize {
            return None;
        }
        self.resolve_x(x).map(|i| (i, y as usize))
    }

    /// In-lattice 8-neighbors of `(i, j)`. Duplicates cannot occur unless the
    /// lattice is narrower than three columns with wrap enabled.
    pub fn neighbors8(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        NEIGHBOR_OFFSETS.iter().filter_map(move |&(di, dj)| {
            let (ni, nj) = self.resolve(i as isize + di, j as isize + dj)?;
            (ni != i || nj != j).then_some((ni, nj))
        })
    }

    #[inline]
    pub fn has_neighbor(&self, i: usize, j: usize, mut pred: impl FnMut(Label) -> bool) -> bool {
        self.neighbors8(i, j).any(|(ni, nj)| pred(self.get(ni, nj)))
    }

    /// Active-boundary predicate for a single pixel.
    #[inline]
    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == Label::Inpaint && self.has_neighbor(i, j, |l| l == Label::Readable)
    }

    pub fn coords_with(&self, label: Label) -> Vec<PixelCoord> {
        let w = self.width;
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(k, _)| PixelCoord::from_key(k, w))
            .collect()
    }
}

/// Pixels labelled `target` with at least one in-lattice 8-neighbor of a
/// different label. Sorted in row-major order.
pub fn inner_boundary(mask: &LabelMask, target: Label) -> Vec<PixelCoord> {
    scan(mask, |m, i, j| m.get(i, j) == target && m.has_neighbor(i, j, |l| l != target))
}

/// Pixels not labelled `target` with at least one 8-neighbor labelled `target`.
pub fn outer_boundary(mask: &LabelMask, target: Label) -> Vec<PixelCoord> {
    scan(mask, |m, i, j| m.get(i, j) != target && m.has_neighbor(i, j, |l| l == target))
}

/// Inner boundary of the inpainting domain restricted to pixels with a
/// readable 8-neighbor.
pub fn active_boundary(mask: &LabelMask) -> Vec<PixelCoord> {
    scan(mask, |m, i, j| m.is_active(i, j))
}

fn scan(mask: &LabelMask, pred: impl Fn(&LabelMask, usize, usize) -> bool) -> Vec<PixelCoord> {
    let mut out = Vec::new();
    for j in 0..mask.height {
        for i in 0..mask.width {
            if pred(mask, i, j) {
                out.push(PixelCoord::new(i, j));
            }
        }
    }
    out
}

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_TOLERANCE {
        r
    } else {
        v
    }
}

/// Bilinear interpolation at a ghost point. Returns `None` (unreadable) unless
/// every stencil center with nonzero weight is an in-lattice readable pixel.
#[inline]
pub fn sample_bilinear(image: &ImageBuffer, mask: &LabelMask, p: GhostPoint) -> Option<Color> {
    let x = snap(p.x);
    let y = snap(p.y);
    if !x.is_finite() || !y.is_finite() {
        return None;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let xi = x0 as isize;
    let yi = y0 as isize;

    let fetch = |sx: isize, sy: isize| -> Option<Color> {
        let (i, j) = mask.resolve(sx, sy)?;
        mask.is_readable(i, j).then(|| image.get(i, j))
    };
    // Interpolate as nested lerps so constant stencils reproduce exactly.
    let row = |sy: isize| -> Option<Color> {
        let a = fetch(xi, sy)?;
        if fx == 0.0 {
            return Some(a);
        }
        let b = fetch(xi + 1, sy)?;
        Some(lerp(&a, &b, fx, image.channels()))
    };
    let top = row(yi)?;
    if fy == 0.0 {
        return Some(top);
    }
    let bottom = row(yi + 1)?;
    Some(lerp(&top, &bottom, fy, image.channels()))
}

#[inline]
fn lerp(a: &Color, b: &Color, t: f64, channels: usize) -> Color {
    let mut out = *a;
    for ch in 0..channels {
        out[ch] = a[ch] + t * (b[ch] - a[ch]);
    }
    out
}

/// Integer offsets `(n, m)` with `n² + m² ≤ r²`, in row-major order.
pub fn ball_offsets(r: u32) -> Vec<(i32, i32)> {
    let r = r as i32;
    let mut out = Vec::new();
    for m in -r..=r {
        for n in -r..=r {
            if n * n + m * m <= r * r {
                out.push((n, m));
            }
        }
    }
    out
}

/// The rotation taking `(0, 1)` onto `ĝ`; identity when `g` is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallRotation {
    gx: f64,
    gy: f64,
}

impl BallRotation {
    pub const IDENTITY: Self = Self { gx: 0.0, gy: 1.0 };

    pub fn aligned_with(g: [f64; 2]) -> Self {
        let norm = g[0].hypot(g[1]);
        if norm == 0.0 || !norm.is_finite() {
            return Self::IDENTITY;
        }
        Self { gx: g[0] / norm, gy: g[1] / norm }
    }

    /// `R (n, m) = n R e₁ + m ĝ` with `R e₁ = (ĝ_y, -ĝ_x)`.
    #[inline]
    pub fn apply(&self, n: f64, m: f64) -> [f64; 2] {
        [n * self.gy + m * self.gx, -n * self.gx + m * self.gy]
    }
}

/// Discrete ball of radius `r` around `center`, rotated so its lattice axis
/// `(0, 1)` is aligned with `g`. Includes the center itself.
pub fn rotated_ball(center: GhostPoint, g: [f64; 2], r: u32) -> Vec<GhostPoint> {
    let rot = BallRotation::aligned_with(g);
    ball_offsets(r)
        .into_iter()
        .map(|(n, m)| {
            let [dx, dy] = rot.apply(n as f64, m as f64);
            GhostPoint::new(center.x + dx, center.y + dy)
        })
        .collect()
}

/// Lattice-aligned discrete ball of radius `r` around `center`.
pub fn axis_ball(center: GhostPoint, r: u32) -> Vec<GhostPoint> {
    rotated_ball(center, [0.0, 0.0], r)
}

/// Chebyshev (8-connected) distance from every pixel to the nearest pixel for
/// which `source` holds. `u32::MAX` where no source is reachable.
pub fn chebyshev_distance(mask: &LabelMask, source: impl Fn(Label) -> bool) -> Vec<u32> {
    let (w, h) = mask.dims();
    let mut dist = vec![u32::MAX; w * h];
    let mut queue = VecDeque::new();
    for (k, &l) in mask.labels().iter().enumerate() {
        if source(l) {
            dist[k] = 0;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k % w, k / w);
        let d = dist[k] + 1;
        for (ni, nj) in mask.neighbors8(i, j) {
            let nk = nj * w + ni;
            if dist[nk] == u32::MAX {
                dist[nk] = d;
                queue.push_back(nk);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn block_mask(size: usize, lo: usize, hi: usize, inside: Label, outside: Label) -> LabelMask {
        LabelMask::from_fn(size, size, |i, j| {
            if (lo..hi).contains(&i) && (lo..hi).contains(&j) {
                inside
            } else {
                outside
            }
        })
        .unwrap()
    }

    fn brute_inner(mask: &LabelMask, target: Label) -> BTreeSet<PixelCoord> {
        let mut s = BTreeSet::new();
        for j in 0..mask.height() as isize {
            for i in 0..mask.width() as isize {
                if mask.get(i as usize, j as usize) != target {
                    continue;
                }
                let mut hit = false;
                for dj in -1..=1isize {
                    for di in -1..=1isize {
                        let (x, y) = (i + di, j + dj);
                        if (di, dj) == (0, 0) || x < 0 || y < 0 || x >= mask.width() as isize || y >= mask.height() as isize {
                            continue;
                        }
                        hit |= mask.get(x as usize, y as usize) != target;
                    }
                }
                if hit {
                    s.insert(PixelCoord::new(i as usize, j as usize));
                }
            }
        }
        s
    }

    #[test]
    fn uniform_mask_has_no_boundary() {
        let m = LabelMask::new(5, 5, Label::Inpaint).unwrap();
        assert!(inner_boundary(&m, Label::Inpaint).is_empty());
        assert!(outer_boundary(&m, Label::Inpaint).is_empty());
        assert!(active_boundary(&m).is_empty());
    }

    #[test]
    fn single_pixel_boundaries() {
        let mut m = LabelMask::new(5, 5, Label::Readable).unwrap();
        m.set(2, 2, Label::Inpaint);
        assert_eq!(inner_boundary(&m, Label::Inpaint), vec![PixelCoord::new(2, 2)]);
        let outer = outer_boundary(&m, Label::Inpaint);
        assert_eq!(outer.len(), 8);
        assert!(outer.iter().all(|p| p.i.abs_diff(2) <= 1 && p.j.abs_diff(2) <= 1));
    }

    #[test]
    fn block_boundaries_match_brute_force() {
        let m = block_mask(8, 2, 6, Label::Inpaint, Label::Readable);
        let inner = inner_boundary(&m, Label::Inpaint);
        assert_eq!(inner.len(), 12);
        assert_eq!(inner.iter().copied().collect::<BTreeSet<_>>(), brute_inner(&m, Label::Inpaint));
        assert_eq!(outer_boundary(&m, Label::Inpaint).len(), 20);
        assert_eq!(active_boundary(&m), inner);
    }

    #[test]
    fn active_boundary_respects_bystanders() {
        // 4x4 block at columns 2..6 with readable pixels only to the left.
        let m = LabelMask::from_fn(8, 8, |i, j| {
            if (2..6).contains(&i) && (2..6).contains(&j) {
                Label::Inpaint
            } else if i < 2 {
                Label::Readable
            } else {
                Label::Bystander
            }
        })
        .unwrap();
        let active = active_boundary(&m);
        assert_eq!(active, (2..6).map(|j| PixelCoord::new(2, j)).collect::<Vec<_>>());

        let enclosed = block_mask(8, 2, 6, Label::Inpaint, Label::Bystander);
        assert!(active_boundary(&enclosed).is_empty());
        assert_eq!(inner_boundary(&enclosed, Label::Inpaint).len(), 12);
    }

    #[test]
    fn wrap_x_links_left_and_right_edges() {
        let mut m = LabelMask::new(6, 3, Label::Inpaint).unwrap().with_wrap_x(true);
        m.set(5, 1, Label::Readable);
        let active = active_boundary(&m);
        assert!(active.contains(&PixelCoord::new(0, 1)));
        assert!(active.contains(&PixelCoord::new(0, 0)));
    }

    fn ramp_image() -> ImageBuffer {
        ImageBuffer::from_fn(8, 8, 1, |i, j| [0.1 * i as f64 + 0.01 * j as f64, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn sampling_reproduces_nodes() {
        let img = ramp_image();
        let m = LabelMask::new(8, 8, Label::Readable).unwrap();
        let c = sample_bilinear(&img, &m, GhostPoint::new(3.0, 4.0)).unwrap();
        assert_eq!(c[0], img.channel(3, 4, 0));
    }

    #[test]
    fn sampling_midpoint_is_average() {
        let img = ImageBuffer::from_fn(4, 4, 1, |_, j| [if j >= 2 { 1.0 } else { 0.0 }, 0.0, 0.0, 0.0]).unwrap();
        let m = LabelMask::new(4, 4, Label::Readable).unwrap();
        let c = sample_bilinear(&img, &m, GhostPoint::new(1.5, 1.5)).unwrap();
        assert_eq!(c[0], 0.5);
    }

    #[test]
    fn sampling_requires_readable_stencil() {
        let img = ramp_image();
        let mut m = LabelMask::new(8, 8, Label::Readable).unwrap();
        m.set(4, 4, Label::Inpaint);
        assert!(sample_bilinear(&img, &m, GhostPoint::new(3.5, 4.0)).is_none());
        // Zero-weight stencil centers do not matter.
        assert!(sample_bilinear(&img, &m, GhostPoint::new(3.0, 3.0)).is_some());
        assert!(sample_bilinear(&img, &m, GhostPoint::new(-0.5, 2.0)).is_none());
        assert!(sample_bilinear(&img, &m, GhostPoint::new(7.0, 7.5)).is_none());
    }

    #[test]
    fn snapping_absorbs_rounding_noise() {
        let img = ramp_image();
        let mut m = LabelMask::new(8, 8, Label::Readable).unwrap();
        m.set(4, 4, Label::Inpaint);
        let p = GhostPoint::new(3.0 + 1e-13, 4.0 - 1e-13);
        assert_eq!(sample_bilinear(&img, &m, p).unwrap()[0], img.channel(3, 4, 0));
    }

    #[test]
    fn rotated_ball_identity_and_quarter_turn() {
        let c = GhostPoint::new(10.0, 10.0);
        let b = rotated_ball(c, [0.0, 1.0], 2);
        assert_eq!(b.len(), 13);
        assert_eq!(b, axis_ball(c, 2));
        let key = |p: &GhostPoint| ((p.x * 4.0) as i64, (p.y * 4.0) as i64);
        let cross: BTreeSet<_> = rotated_ball(c, [1.0, 0.0], 1).iter().map(key).collect();
        let axis: BTreeSet<_> = axis_ball(c, 1).iter().map(key).collect();
        assert_eq!(cross, axis);
    }

    #[test]
    fn rotated_ball_contains_on_line_points() {
        let t = 73f64.to_radians();
        let g = [t.cos(), t.sin()];
        let c = GhostPoint::new(0.0, 0.0);
        let b = rotated_ball(c, g, 3);
        assert_eq!(b.len(), 29);
        let target = [-2.0 * g[0], -2.0 * g[1]];
        let hit = b
            .iter()
            .find(|p| (p.x - target[0]).abs() < 1e-12 && (p.y - target[1]).abs() < 1e-12)
            .expect("R(0,-2) is in the ball");
        // Distance to the line through the center along g.
        let perp = -g[1] * hit.x + g[0] * hit.y;
        assert!(perp.abs() < 1e-12);
    }

    #[test]
    fn chebyshev_distance_half_plane() {
        let m = LabelMask::from_fn(20, 5, |i, _| if i >= 10 { Label::Inpaint } else { Label::Readable }).unwrap();
        let d = chebyshev_distance(&m, |l| l == Label::Inpaint);
        assert_eq!(d[2 * 20 + 9], 1);
        assert_eq!(d[2 * 20], 10);
        assert_eq!(d[2 * 20 + 15], 0);
    }

    #[test]
    fn image_validation() {
        assert!(ImageBuffer::new(0, 3, 1).is_err());
        assert!(ImageBuffer::new(3, 3, 5).is_err());
        assert!(ImageBuffer::from_vec(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(ImageBuffer::from_vec(2, 1, 1, vec![0.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_mask() -> impl Strategy<Value = LabelMask> {
            (3usize..12, 3usize..12).prop_flat_map(|(w, h)| {
                proptest::collection::vec(0u8..3, w * h).prop_map(move |v| {
                    let labels = v
                        .into_iter()
                        .map(|b| match b {
                            0 => Label::Readable,
                            1 => Label::Inpaint,
                            _ => Label::Bystander,
                        })
                        .collect();
                    LabelMask::from_labels(w, h, labels).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn boundary_partition(mask in arb_mask()) {
                let inner = inner_boundary(&mask, Label::Inpaint);
                let outer = outer_boundary(&mask, Label::Inpaint);
                let active = active_boundary(&mask);
                prop_assert!(inner.iter().all(|p| mask.get(p.i, p.j) == Label::Inpaint));
                prop_assert!(outer.iter().all(|p| mask.get(p.i, p.j) != Label::Inpaint));
                let inner_set: BTreeSet<_> = inner.iter().collect();
                prop_assert!(active.iter().all(|p| inner_set.contains(p)));
                prop_assert_eq!(inner.iter().copied().collect::<BTreeSet<_>>(), brute_inner(&mask, Label::Inpaint));
            }

            #[test]
            fn ball_cardinality_is_rotation_invariant(theta in 0.0f64..std::f64::consts::TAU, r in 1u32..6) {
                let g = [theta.cos(), theta.sin()];
                let c = GhostPoint::new(0.0, 0.0);
                prop_assert_eq!(rotated_ball(c, g, r).len(), axis_ball(c, r).len());
            }

            #[test]
            fn opposite_directions_reflect_the_ball(theta in 0.0f64..std::f64::consts::TAU, r in 1u32..5) {
                let g = [theta.cos(), theta.sin()];
                let c = GhostPoint::new(0.0, 0.0);
                let a = rotated_ball(c, g, r);
                let b = rotated_ball(c, [-g[0], -g[1]], r);
                for p in &a {
                    prop_assert!(b.iter().any(|q| (q.x + p.x).abs() < 1e-12 && (q.y + p.y).abs() < 1e-12));
                }
            }

            #[test]
            fn sampling_at_centers_is_exact(vals in proptest::collection::vec(0.0f64..1.0, 16), i in 0usize..4, j in 0usize..4) {
                let img = ImageBuffer::from_vec(4, 4, 1, vals).unwrap();
                let m = LabelMask::new(4, 4, Label::Readable).unwrap();
                let c = sample_bilinear(&img, &m, GhostPoint::new(i as f64, j as f64)).unwrap();
                prop_assert_eq!(c[0], img.channel(i, j, 0));
            }
        }
    }
}
