//! Latent `Y` samples per sweep, sparse against full covariance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracemix_core::count_models::SymMatrix;
use tracemix_core::synth::{gen_count_sequence, sticky_transitions, SynthSpec};
use tracemix_core::{run_gibbs, CountVectorSequence, FitConfig, Hyperparams, ModelKind, SmvpParams};

/// Two clusters over twenty bins, each active on its own half.
pub fn half_active_spec() -> SynthSpec {
    let m = 20;
    let clusters = (0..2)
        .map(|c| {
            let set: Vec<usize> = (c * 10..(c + 1) * 10).collect();
            let mut lambda = SymMatrix::new(m);
            let mut b = vec![false; m];
            for (i, &j) in set.iter().enumerate() {
                b[j] = true;
                lambda.set(j, j, 6.0);
                for &l in &set[i + 1..] {
                    lambda.set(j, l, 0.5);
                }
            }
            SmvpParams { lambda, lambda_hat: vec![0.05; m], b }
        })
        .collect();
    SynthSpec { t: 200, initial: vec![0.5, 0.5], transition: sticky_transitions(2, 0.9), clusters }
}

pub fn half_active_data(seed: u64) -> CountVectorSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_count_sequence(&half_active_spec(), &mut rng).unwrap().0
}

/// Mean `Y` samples per sweep over the second half of a short fit.
pub fn y_samples_per_sweep(data: &CountVectorSequence, kind: ModelKind, sweeps: usize, seed: u64) -> f64 {
    let cfg = FitConfig { iterations: sweeps, burn_in: sweeps / 2, thinning: 1, seed, ..FitConfig::default() };
    let out = run_gibbs(data, kind, Hyperparams::default(), &cfg).unwrap();
    let tail = &out.diagnostics.y_updates[sweeps / 2..];
    tail.iter().sum::<u64>() as f64 / tail.len() as f64
}

/// Sparse-to-full ratio of `Y` samples per sweep.
pub fn sweep_cost_ratio(seed: u64) -> (f64, f64, f64) {
    let data = half_active_data(seed);
    let sparse = y_samples_per_sweep(&data, ModelKind::SparseHmmDpMmvp, 40, seed);
    let full = y_samples_per_sweep(&data, ModelKind::HmmDpMmvp, 40, seed);
    (sparse / full, sparse, full)
}
