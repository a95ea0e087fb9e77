//! Brute-force path enumeration for the decoder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracemix_core::count_models::log_poisson_vec;
use tracemix_core::{FittedModel, ModelKind};

pub fn random_model(k: usize, dim: usize, rng: &mut ChaCha8Rng) -> FittedModel {
    let mut simplex = |n: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let pi = (0..k).map(|_| simplex(k)).collect();
    let pi0 = simplex(k);
    let mu = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(0.2..8.0)).collect())
        .collect();
    FittedModel::from_means(ModelKind::HmmDpMmvp, pi, pi0, mu)
}

pub fn random_counts(t: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u64>> {
    (0..t).map(|_| (0..dim).map(|_| rng.random_range(0..9)).collect()).collect()
}

fn all_paths(k: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..t {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn path_log_prob(model: &FittedModel, xs: &[Vec<u64>], path: &[usize]) -> f64 {
    let mut lp = 0.0;
    for (t, (&k, x)) in path.iter().zip(xs).enumerate() {
        lp += if t == 0 { model.pi0[k].ln() } else { model.pi[path[t - 1]][k].ln() };
        lp += log_poisson_vec(x, &model.mu[k]);
    }
    lp
}

pub fn brute_path(model: &FittedModel, xs: &[Vec<u64>]) -> Vec<usize> {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for p in all_paths(model.num_clusters(), xs.len()) {
        let lp = path_log_prob(model, xs, &p);
        if lp > best.0 {
            best = (lp, p);
        }
    }
    best.1
}

/// `argmax_k max_path p(path, X) π[z_T][k] Poisson(⌊μ_k⌋; μ_k)`.
pub fn brute_predict(model: &FittedModel, xs: &[Vec<u64>]) -> usize {
    let k_len = model.num_clusters();
    let modes: Vec<Vec<u64>> = model.mu.iter().map(|m| m.iter().map(|v| v.floor() as u64).collect()).collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..k_len {
        let emit = log_poisson_vec(&modes[k], &model.mu[k]);
        let score = if xs.is_empty() {
            model.pi0[k].ln() + emit
        } else {
            all_paths(k_len, xs.len())
                .iter()
                .map(|p| path_log_prob(model, xs, p) + model.pi[*p.last().unwrap()][k].ln() + emit)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        if score > best.0 {
            best = (score, k);
        }
    }
    best.1
}

/// Compares decoder against enumeration on `cases` random models; returns
/// the number of mismatches.
pub fn decoder_mismatches(cases: usize, seed: u64) -> usize {
    use tracemix_core::{decoder_observe, decoder_predict_next, DecoderState};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..cases {
        let k = rng.random_range(1..=3);
        let t = rng.random_range(1..=5);
        let model = random_model(k, 2, &mut rng);
        let xs = random_counts(t, 2, &mut rng);
        let mut st = DecoderState::new(&model);
        if decoder_predict_next(&st, &model) != brute_predict(&model, &[]) {
            bad += 1;
        }
        for i in 0..t {
            decoder_observe(&mut st, &model, &xs[i]);
            if st.path() != brute_path(&model, &xs[..=i]) {
                bad += 1;
            }
            if decoder_predict_next(&st, &model) != brute_predict(&model, &xs[..=i]) {
                bad += 1;
            }
        }
    }
    bad
}
