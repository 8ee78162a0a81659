//! Sequential vs. parallel execution of the hot kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use tpvm::model::{fuse_raw, perceive_spatial_with};
use tpvm::{factorize, make_concentric_mask, Execution, FusionMode, Image, RingOrder, SolverConfig, TargetSet};

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
}

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_fusion(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (w, h) = (1024, 768);
    let frames: Vec<Image> = (0..4).map(|_| random_image(&mut rng, w, h)).collect();
    let weights = [0.25, 0.5, 0.75, 1.0];
    let mask = make_concentric_mask(w, h, (512.0, 384.0), &[100.0, 200.0, 300.0, 400.0], RingOrder::Identity).unwrap();

    let mut group = c.benchmark_group("fusion_1024x768_m4");
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::new("global", name), &exec, |b, &exec| {
            b.iter(|| fuse_raw(black_box(&frames), &weights, FusionMode::Sum, exec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("spatial", name), &exec, |b, &exec| {
            b.iter(|| perceive_spatial_with(black_box(&frames), &mask, FusionMode::Sum, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_solver(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let targets = TargetSet::new((0..3).map(|_| random_image(&mut rng, 256, 256)).collect()).unwrap();

    let mut group = c.benchmark_group("factorize_256x256_k3_m4");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let cfg = SolverConfig {
            max_iterations: 20,
            restarts: 3,
            execution: exec,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| factorize(black_box(&targets), 4, None, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fusion, bench_solver);
criterion_main!(benches);
