use proptest::prelude::*;

use guidefill::engine::{self, FillOrder, FillParams, GuideSource, Neighborhood, Tracking};
use guidefill::exec::Backend;
use guidefill::grid::{ImageBuffer, Label, LabelMask, PixelCoord};
use guidefill::guide::{
    build_guide_field, make_spline, modified_structure_tensor, point_polyline_distance, structure_tensor, DetectParams,
    Spline, SplineSet, SplineSource,
};
use guidefill::harness::{fit_power_law, render_problem, SyntheticProblem};
use guidefill::limits::{direction, half_ball, limit_direction, BallKind};
use guidefill::pipeline::{run_pipeline, PipelineParams};
use guidefill::tracker::{run_tracked, run_verified};

fn arb_labels(max: usize) -> impl Strategy<Value = LabelMask> {
    (3..=max, 3..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(prop_oneof![6 => Just(Label::Readable), 3 => Just(Label::Inpaint), 1 => Just(Label::Bystander)], w * h)
            .prop_map(move |labels| {
                let mut m = LabelMask::from_labels(w, h, labels).unwrap();
                if m.count(Label::Inpaint) == 0 {
                    m.set(w / 2, h / 2, Label::Inpaint);
                }
                if m.count(Label::Readable) == 0 {
                    m.set(0, 0, Label::Readable);
                }
                m
            })
    })
}

/// Rectangle of inpaint pixels inside a readable margin wider than the ball.
fn arb_surrounded() -> impl Strategy<Value = LabelMask> {
    const MARGIN: usize = 4;
    (1usize..30, 1usize..30, 0usize..6, 0usize..6).prop_map(|(dw, dh, ex, ey)| {
        let (w, h) = (dw + 2 * MARGIN + ex, dh + 2 * MARGIN + ey);
        LabelMask::from_fn(w, h, |i, j| {
            if (MARGIN..MARGIN + dw).contains(&i) && (MARGIN..MARGIN + dh).contains(&j) {
                Label::Inpaint
            } else {
                Label::Readable
            }
        })
        .unwrap()
    })
}

fn texture(w: usize, h: usize, channels: usize, seed: u64) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, channels, |i, j| {
        let k = (i as u64 * 73 + j as u64 * 151 + seed * 31) % 97;
        [k as f64 / 96.0, ((k * 7) % 97) as f64 / 96.0, ((k * 13) % 97) as f64 / 96.0, 1.0]
    })
    .unwrap()
}

fn arb_guidance() -> impl Strategy<Value = [f64; 2]> {
    prop_oneof![Just([0.0, 0.0]), (0.0f64..std::f64::consts::TAU, 0.1f64..1.0).prop_map(|(t, s)| [s * t.cos(), s * t.sin()])]
}

fn same_bits(a: &ImageBuffer, b: &ImageBuffer) -> bool {
    a.dims() == b.dims() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn tracker_matches_rescan_and_untracked_output(mask in arb_labels(48), g in arb_guidance(), smart in any::<bool>()) {
        let img = texture(mask.width(), mask.height(), 3, 1);
        let params = FillParams { order: if smart { FillOrder::Smart } else { FillOrder::Onion }, ..FillParams::default() };
        let (tracked, _) = run_verified(&img, &mask, GuideSource::Fixed(g), &params).unwrap();
        let plain = engine::inpaint(&img, &mask, GuideSource::Fixed(g), &params).unwrap();
        prop_assert!(same_bits(&tracked.image, &plain.image));
        prop_assert_eq!(tracked.mask, plain.mask);
    }

    #[test]
    fn surrounded_onion_work_equals_domain_size(mask in arb_surrounded(), g in arb_guidance()) {
        let img = texture(mask.width(), mask.height(), 1, 2);
        let (out, metrics) = run_tracked(&img, &mask, GuideSource::Fixed(g), &FillParams::default()).unwrap();
        prop_assert_eq!(metrics.total_frontier(), mask.count(Label::Inpaint));
        prop_assert_eq!(out.report.forced_fills, 0);
    }

    #[test]
    fn backends_agree_bit_for_bit(mask in arb_labels(40), g in arb_guidance()) {
        let img = texture(mask.width(), mask.height(), 3, 3);
        let seq = FillParams { backend: Backend::Sequential, order: FillOrder::Smart, ..FillParams::default() };
        let par = FillParams { backend: Backend::Parallel, ..seq };
        let a = engine::run(&img, &mask, GuideSource::Fixed(g), &seq, Tracking::Tracked { verify: false }).unwrap();
        let b = engine::run(&img, &mask, GuideSource::Fixed(g), &par, Tracking::Untracked).unwrap();
        prop_assert!(same_bits(&a.image, &b.image));
    }

    #[test]
    fn zero_guidance_ignores_ball_rotation(mask in arb_labels(32), r in 1u32..5) {
        let img = texture(mask.width(), mask.height(), 1, 4);
        let rot = FillParams { r, neighborhood: Neighborhood::RotatedBall, ..FillParams::default() };
        let axis = FillParams { neighborhood: Neighborhood::AxisBall, ..rot };
        let a = engine::inpaint(&img, &mask, GuideSource::ZERO, &rot).unwrap();
        let b = engine::inpaint(&img, &mask, GuideSource::ZERO, &axis).unwrap();
        prop_assert!(same_bits(&a.image, &b.image));
    }

    #[test]
    fn guide_field_cutoff_and_monotone_falloff(
        lines in proptest::collection::vec(((0.0f64..40.0, 0.0f64..40.0), (0.0f64..40.0, 0.0f64..40.0), 0.0f64..std::f64::consts::TAU), 1..4),
        eta in 0.5f64..5.0,
    ) {
        let mask = LabelMask::new(40, 40, Label::Inpaint).unwrap();
        let splines: Vec<Spline> = lines
            .iter()
            .enumerate()
            .map(|(k, &((ax, ay), (bx, by), t))| Spline::polyline(format!("s{k}"), SplineSource::User, [0.9 * t.cos(), 0.9 * t.sin()], vec![[ax, ay], [bx, by]]))
            .collect();
        let field = build_guide_field(&splines, &mask, eta, Backend::default());
        let flat: Vec<Vec<[f64; 2]>> = splines.iter().map(|s| s.flatten()).collect();
        let mut by_spline: Vec<Vec<(f64, f64)>> = vec![Vec::new(); splines.len()];
        for j in 0..40 {
            for i in 0..40 {
                let p = [i as f64, j as f64];
                let (k, d) = flat
                    .iter()
                    .map(|l| point_polyline_distance(p, l))
                    .enumerate()
                    .fold((0, f64::INFINITY), |best, (k, d)| if d < best.1 { (k, d) } else { best });
                let v = field.get(i, j);
                if d > 3.0 * eta {
                    prop_assert_eq!(v, [0.0, 0.0]);
                }
                by_spline[k].push((d, v[0].hypot(v[1])));
            }
        }
        for mut samples in by_spline {
            samples.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in samples.windows(2) {
                prop_assert!(w[1].1 <= w[0].1 + 1e-15);
            }
        }
    }

    #[test]
    fn tensors_agree_on_readable_windows(seed in 0u64..1000, i in 16usize..24, j in 16usize..24) {
        let img = texture(40, 40, 1, seed);
        let mut mask = LabelMask::new(40, 40, Label::Readable).unwrap();
        mask.set(0, 0, Label::Inpaint);
        let at = PixelCoord::new(i, j);
        let a = structure_tensor(&img, &mask, at, 2.0, 4.0).unwrap();
        let b = modified_structure_tensor(&img, &mask, at, 2.0, 4.0).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                prop_assert!((a.matrix[r][c] - b.matrix[r][c]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn spline_direction_is_a_shortened_minor_eigenvector(theta in 10.0f64..170.0) {
        let t = theta.to_radians();
        let normal = [t.sin(), t.cos()];
        let img = ImageBuffer::from_fn(80, 80, 1, |i, j| {
            let s = (i as f64 - 40.0) * normal[0] + (j as f64 - 16.0) * normal[1];
            [if s > 0.0 { 1.0 } else { 0.0 }, 0.0, 0.0, 0.0]
        })
        .unwrap();
        let mask = LabelMask::from_fn(80, 80, |i, j| if (30..50).contains(&i) && (30..50).contains(&j) { Label::Inpaint } else { Label::Readable }).unwrap();
        let params = DetectParams::default();
        let seed = PixelCoord::new(40, 16);
        let tensor = structure_tensor(&img, &mask, seed, params.sigma, params.rho).unwrap();
        if let Ok(s) = make_spline("x", seed, &tensor, &mask, &params) {
            let g = s.direction;
            prop_assert!(g[0].hypot(g[1]) < 1.0);
            let cross = g[0] * tensor.v_min[1] - g[1] * tensor.v_min[0];
            prop_assert!(cross.abs() <= 1e-12);
        }
    }

    #[test]
    fn limit_angle_ignores_guidance_scale(theta in 0.01f64..3.13, k in -8i32..8, s in 0.01f64..100.0, mu in prop_oneof![Just(f64::INFINITY), 1.0f64..100.0]) {
        for kind in [BallKind::Axis, BallKind::Rotated] {
            let g = direction(theta);
            let a = limit_direction(kind, 3, mu, g).unwrap().theta_star;
            let exact = 2f64.powi(k);
            let b = limit_direction(kind, 3, mu, [exact * g[0], exact * g[1]]).unwrap().theta_star;
            prop_assert_eq!(a, b);
            let c = limit_direction(kind, 3, mu, [s * g[0], s * g[1]]).unwrap().theta_star;
            prop_assert!((a - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn limit_angle_mirror_symmetry(theta in 0.01f64..3.13, mu in prop_oneof![Just(f64::INFINITY), 1.0f64..100.0], r in 1u32..6) {
        for kind in [BallKind::Axis, BallKind::Rotated] {
            let a = limit_direction(kind, r, mu, direction(theta));
            let b = limit_direction(kind, r, mu, direction(std::f64::consts::PI - theta));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!((b.theta_star - (std::f64::consts::PI - a.theta_star)).abs() <= 1e-9),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }

    #[test]
    fn rotated_limit_follows_guidance_when_on_line_points_exist(theta in 0.01f64..3.13, r in 1u32..6) {
        let g = direction(theta);
        let on_line = half_ball(BallKind::Rotated, r, g)
            .points
            .iter()
            .any(|p| (p[0] * g[1] - p[1] * g[0]).abs() < 1e-9);
        if on_line {
            let t = limit_direction(BallKind::Rotated, r, f64::INFINITY, g).unwrap().theta_star;
            prop_assert!((t - theta).abs() <= 1e-12);
        }
    }

    #[test]
    fn power_law_fit_is_exact_on_power_laws(a in 0.01f64..100.0, alpha in -2.0f64..2.0) {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1e3, 1e4, 1e5].iter().map(|&n| (n, a * f64::powf(n, alpha))).collect();
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.alpha - alpha).abs() <= 1e-12);
        prop_assert!((fit.a / a - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn spline_documents_round_trip_bytes(
        pts in proptest::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 2..8),
        dir in (-0.7f64..0.7, -0.7f64..0.7),
    ) {
        let mut points: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        points.dedup();
        prop_assume!(points.len() >= 2);
        let set = SplineSet::new(vec![Spline::polyline("a", SplineSource::User, [dir.0, dir.1], points)]);
        let text = set.to_json();
        let back = SplineSet::from_json(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn synthetic_pipeline_is_deterministic() {
    let spec = SyntheticProblem::half_plane(60.0, 120);
    let run = || {
        let r = render_problem(&spec).unwrap();
        engine::inpaint(&r.image, &r.mask, GuideSource::Fixed([0.5, -0.866]), &FillParams::default()).unwrap().image
    };
    assert!(same_bits(&run(), &run()));
}

#[test]
fn detect_then_fill_is_reproducible() {
    let img = ImageBuffer::from_fn(96, 96, 3, |i, j| if i + j < 96 { [0.9, 0.1, 0.2, 0.0] } else { [0.1, 0.3, 0.8, 0.0] }).unwrap();
    let mask = LabelMask::from_fn(96, 96, |i, j| if (36..60).contains(&i) && (36..60).contains(&j) { Label::Inpaint } else { Label::Readable }).unwrap();
    let params = PipelineParams::default();
    let a = run_pipeline(&img, &mask, None, &params).unwrap();
    let b = run_pipeline(&img, &mask, Some(&a.splines), &params).unwrap();
    assert!(!a.splines.splines.is_empty());
    assert!(same_bits(&a.outcome.image, &b.outcome.image));
}
