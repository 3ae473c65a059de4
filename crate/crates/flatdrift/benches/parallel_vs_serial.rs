//! Rayon vs sequential comparison of the Monte-Carlo kernels. The parallel
//! path goes through `par_map_collect` (plain loop when the `parallel`
//! feature is off), the baseline always runs sequentially; both produce
//! identical outputs by construction.

use criterion::{criterion_group, criterion_main, Criterion};
use flatdrift::config::ConstantsRegistry;
use flatdrift::flow::FlowState;
use flatdrift::geom::Mat2;
use flatdrift::norms::{agy_norm, default_cutoff};
use flatdrift::parallel::{par_map_collect, seq_map_collect, stream_seed};
use flatdrift::prototypes::{perturbed_prototype_surface, Prototype};
use flatdrift::saddle::systole;
use flatdrift::surface::{PeriodVector, TranslationSurface};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn base_surface() -> TranslationSurface {
    perturbed_prototype_surface(&Prototype { a: 0, b: 2, c: 1, e: 0 }, 5, 0.15)
        .unwrap()
        .normalize_area()
}

fn nondiv_kernel(s: &TranslationSurface, reg: &ConstantsRegistry, seed: u64, i: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
    let r: f64 = rng.gen_range(0.0..1.0);
    let mut state = FlowState::new(s.apply_gl2(&Mat2::horocycle(r)).unwrap()).unwrap();
    state.flow(4.0, 0.5, reg).unwrap();
    systole(&state.surface)
}

fn norm_kernel(s: &TranslationSurface, w: &PeriodVector, seed: u64, i: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
    let r: f64 = rng.gen_range(0.0..1.0);
    let g = Mat2::geodesic(2.0).mul(&Mat2::horocycle(r));
    let moved = s.apply_gl2(&g).unwrap();
    let out = flatdrift::delaunay::delaunay_with(&moved, &[w.clone()], 1_000_000).unwrap();
    let wt = out.tracked[0].apply_gl2(&g);
    agy_norm(&out.surface, &wt, default_cutoff(&out.surface).min(100.0), 100_000).value
}

fn bench_nondivergence(c: &mut Criterion) {
    let reg = ConstantsRegistry::default();
    let s = base_surface();
    let n = 256;
    let mut group = c.benchmark_group("nondivergence_mc");
    group.sample_size(10);
    group.bench_function("data_parallel", |b| {
        b.iter(|| par_map_collect(n, |i| nondiv_kernel(&s, &reg, 7, i)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| seq_map_collect(n, |i| nondiv_kernel(&s, &reg, 7, i)))
    });
    group.finish();
}

fn bench_norm_flow(c: &mut Criterion) {
    let s = base_surface();
    let raw = PeriodVector {
        coords: (0..4)
            .map(|k| flatdrift::geom::C::new(0.2 + 0.1 * k as f64, -0.3 + 0.07 * k as f64))
            .collect(),
    };
    let w = flatdrift::norms::project_balance(&s, &raw).unwrap();
    let n = 64;
    let mut group = c.benchmark_group("flowed_agy_norm");
    group.sample_size(10);
    group.bench_function("data_parallel", |b| {
        b.iter(|| par_map_collect(n, |i| norm_kernel(&s, &w, 11, i)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| seq_map_collect(n, |i| norm_kernel(&s, &w, 11, i)))
    });
    group.finish();
}

criterion_group!(benches, bench_nondivergence, bench_norm_flow);
criterion_main!(benches);
