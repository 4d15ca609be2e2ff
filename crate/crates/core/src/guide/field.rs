use super::spline::{point_polyline_distance, Spline};
use crate::exec::{self, Backend};
use crate::grid::{Label, LabelMask};

/// Per-pixel guidance vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct GuideField {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 2]>,
}

impl GuideField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, vectors: vec![[0.0; 2]; width * height] }
    }

    /// The same vector everywhere.
    pub fn constant(width: usize, height: usize, g: [f64; 2]) -> Self {
        Self { width, height, vectors: vec![g; width * height] }
    }

    pub fn from_vectors(width: usize, height: usize, vectors: Vec<[f64; 2]>) -> Option<Self> {
        (vectors.len() == width * height).then_some(Self { width, height, vectors })
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        self.vectors[j * self.width + i]
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    /// Every `step`-th pixel in both directions, row by row.
    pub fn downsample(&self, step: usize) -> Vec<Vec<[f64; 2]>> {
        let step = step.max(1);
        (0..self.height)
            .step_by(step)
            .map(|j| (0..self.width).step_by(step).map(|i| self.get(i, j)).collect())
            .collect()
    }
}

/// Guidance decays with the distance to the nearest spline and is cut off
/// beyond `3·eta`. Pixels outside the inpainting domain get zero.
pub fn build_guide_field(splines: &[Spline], mask: &LabelMask, eta: f64, backend: Backend) -> GuideField {
    let (w, h) = mask.dims();
    let curves: Vec<(Vec<[f64; 2]>, [f64; 2])> = splines.iter().map(|s| (s.flatten(), s.direction)).collect();
    let cutoff = 3.0 * eta;
    let rows = exec::map_range(backend, h, |j| {
        (0..w)
            .map(|i| {
                if mask.get(i, j) != Label::Inpaint {
                    return [0.0, 0.0];
                }
                let p = [i as f64, j as f64];
                let mut best: Option<(f64, [f64; 2])> = None;
                for (line, dir) in &curves {
                    let d = point_polyline_distance(p, line);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, *dir));
                    }
                }
                match best {
                    Some((d, dir)) if d <= cutoff => {
                        let f = (-(d * d) / (2.0 * eta * eta)).exp();
                        [dir[0] * f, dir[1] * f]
                    }
                    _ => [0.0, 0.0],
                }
            })
            .collect::<Vec<_>>()
    });
    GuideField { width: w, height: h, vectors: rows.concat() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guide::SplineSource;

    fn all_inpaint() -> LabelMask {
        LabelMask::new(40, 40, Label::Inpaint).unwrap()
    }

    fn horizontal(y: f64, dir: [f64; 2]) -> Spline {
        Spline::polyline("h", SplineSource::User, dir, vec![[0.0, y], [39.0, y]])
    }

    #[test]
    fn empty_spline_list_gives_zero_field() {
        let f = build_guide_field(&[], &all_inpaint(), 3.0, Backend::Sequential);
        assert!(f.vectors().iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn falloff_and_cutoff() {
        let g = [0.6, 0.0];
        let f = build_guide_field(&[horizontal(20.0, g)], &all_inpaint(), 3.0, Backend::Parallel);
        assert_eq!(f.get(5, 20), g);
        let at_eta = f.get(5, 23);
        assert!((at_eta[0] - 0.6 * (-0.5f64).exp()).abs() < 1e-15);
        assert_ne!(f.get(5, 29), [0.0, 0.0]);
        assert_eq!(f.get(5, 30), [0.0, 0.0]);
    }

    #[test]
    fn outside_domain_is_zero() {
        let mut m = all_inpaint();
        m.set(5, 20, Label::Readable);
        let f = build_guide_field(&[horizontal(20.0, [1.0 - f64::EPSILON, 0.0])], &m, 3.0, Backend::Sequential);
        assert_eq!(f.get(5, 20), [0.0, 0.0]);
    }

    #[test]
    fn nearest_spline_wins() {
        let a = horizontal(10.0, [0.5, 0.0]);
        let b = horizontal(16.0, [0.0, 0.5]);
        let f = build_guide_field(&[a, b], &all_inpaint(), 3.0, Backend::Sequential);
        assert!(f.get(3, 12)[0] > 0.0 && f.get(3, 12)[1] == 0.0);
        assert!(f.get(3, 14)[1] > 0.0 && f.get(3, 14)[0] == 0.0);
    }

    #[test]
    fn downsample_shape() {
        let f = GuideField::constant(10, 7, [1.0, 0.0]);
        let d = f.downsample(3);
        assert_eq!(d.len(), 3);
        assert_eq!(d[0].len(), 4);
    }
}
