//! Workload builders shared by the benchmarks and the complexity check.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvdmd_core::{SvdOptions, SvdState, TruncationPolicy};

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Weighted state of rank `r` over `n` rows with a stream of fresh columns.
pub fn fixed_rank_workload(n: usize, r: usize, columns: usize, seed: u64) -> (SvdState, Vec<DVector<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = random_matrix(&mut rng, n, 2 * r);
    let opts = SvdOptions::weighted(0.95).with_truncation(TruncationPolicy::FixedRank(r));
    let state = SvdState::from_batch(&x0, opts).expect("valid workload");
    let stream = (0..columns).map(|_| random_vector(&mut rng, n)).collect();
    (state, stream)
}

/// Median wall time in seconds of one rank-`r` weighted update at width `n`.
pub fn median_update_seconds(n: usize, r: usize, samples: usize, seed: u64) -> f64 {
    let (mut state, stream) = fixed_rank_workload(n, r, samples + 10, seed);
    for x in &stream[..10] {
        state.weighted_update(x).expect("update");
    }
    let mut times: Vec<f64> = stream[10..]
        .iter()
        .map(|x| {
            let t = Instant::now();
            state.weighted_update(x).expect("update");
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}
