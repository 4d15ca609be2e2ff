use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use guidefill::engine::{self, FillParams, GuideSource, Tracking};
use guidefill::exec::Backend;
use guidefill::harness::{render_problem, SyntheticProblem};

fn backends(c: &mut Criterion) {
    let mut group = c.benchmark_group("fill");
    group.sample_size(10);
    for height in [100, 220] {
        let spec = SyntheticProblem::scaling_stripe(height);
        let r = render_problem(&spec).expect("valid stripe");
        for backend in [Backend::Sequential, Backend::Parallel] {
            for (name, tracking) in [("tracked", Tracking::Tracked { verify: false }), ("untracked", Tracking::Untracked)] {
                let params = FillParams { backend, ..FillParams::default() };
                let id = BenchmarkId::new(format!("{backend:?}/{name}").to_lowercase(), height);
                group.bench_with_input(id, &params, |b, p| {
                    b.iter(|| engine::run(black_box(&r.image), &r.mask, GuideSource::Fixed([1.0, 0.0]), p, tracking).unwrap())
                });
            }
        }
    }
    group.finish();
}

criterion_group!(benches, backends);
criterion_main!(benches);
