use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use hoamix_core::{
    mdct_analyze, mdct_synthesize, sh_encode, solve, upmix, Dictionary, LayerSpec,
    MultichannelSignal, SolverConfig, UpmixConfig, UpmixMode,
};

fn random_samples(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn bench_mdct(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("mdct_round_trip");
    for n in [32usize, 256, 2048] {
        let spec = LayerSpec::new(n).unwrap();
        let signal = random_samples(&mut rng, 16_384);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let coeffs = mdct_analyze(black_box(&signal), &spec).unwrap();
                black_box(mdct_synthesize(&coeffs, &spec).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_solver_iterations(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let signal = MultichannelSignal::new(vec![random_samples(&mut rng, 8192)], 48_000).unwrap();
    let dict = Dictionary::default_layers(8192).unwrap();
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    for (label, alias) in [("100_iters_plain", 0.0), ("100_iters_alias", 0.5)] {
        let config = SolverConfig {
            iterations: 100,
            alias_weight: alias,
            ..Default::default()
        };
        group.bench_function(label, |b| {
            b.iter(|| black_box(solve(&signal, &dict, &config).unwrap()))
        });
    }
    group.finish();
}

fn bench_sh_encode(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dirs: Vec<[f64; 3]> = (0..256)
        .map(|_| loop {
            let v: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-3 {
                break [v[0] / n, v[1] / n, v[2] / n];
            }
        })
        .collect();
    c.bench_function("sh_encode_order7_x256", |b| {
        b.iter(|| {
            for d in &dirs {
                black_box(sh_encode(*d, 7).unwrap());
            }
        })
    });
}

fn bench_upmix_linear(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let foa = MultichannelSignal::new(
        (0..4).map(|_| random_samples(&mut rng, 8192)).collect(),
        48_000,
    )
    .unwrap();
    let config = UpmixConfig {
        order: 7,
        mode: UpmixMode::Linear,
        ..Default::default()
    };
    let mut group = c.benchmark_group("upmix");
    group.sample_size(10);
    group.bench_function("linear_order7_8k", |b| {
        b.iter(|| black_box(upmix(&foa, &config).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_mdct,
    bench_solver_iterations,
    bench_sh_encode,
    bench_upmix_linear
);
criterion_main!(benches);
