use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use tvdmd_bench::{fixed_rank_workload, random_matrix, random_vector};
use tvdmd_core::{DmdModel, StreamConfig, TruncationPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn svd_update(c: &mut Criterion) {
    let mut g = c.benchmark_group("weighted_update_r10");
    for n in [256, 512, 1024] {
        let (state, stream) = fixed_rank_workload(n, 10, 64, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut i = 0;
            b.iter_batched_ref(
                || state.clone(),
                |s| {
                    i = (i + 1) % stream.len();
                    s.weighted_update(black_box(&stream[i])).unwrap();
                },
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn dmd_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("dmd_step");
    for (label, cfg) in [
        ("weighted", StreamConfig::weighted(0.9)),
        ("windowed", StreamConfig::windowed(40)),
        ("weighted_reduced", StreamConfig::weighted(0.9).with_full(false)),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 64;
        let cfg = cfg.with_truncation(TruncationPolicy::FixedRank(20));
        let model = DmdModel::init(&random_matrix(&mut rng, n, 40), &random_matrix(&mut rng, n, 40), cfg).unwrap();
        let (x, y) = (random_vector(&mut rng, n), random_vector(&mut rng, n));
        g.bench_function(label, |b| {
            b.iter_batched_ref(|| model.clone(), |m| m.step_pair(black_box(&x), black_box(&y)).unwrap(), BatchSize::SmallInput)
        });
    }
    g.finish();
}

criterion_group!(benches, svd_update, dmd_step);
criterion_main!(benches);
