mod common;

use common::viterbi::{random_counts, random_model};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracemix_core::count_models::log_poisson_vec;
use tracemix_core::{heldout_loglik, BinningConfig, CountVectorSequence, FittedModel, ModelKind};

fn seq(x: Vec<Vec<u64>>) -> CountVectorSequence {
    CountVectorSequence::from_counts(x, BinningConfig::default())
}

#[test]
fn single_cluster_is_a_sum_of_emissions() {
    let model = FittedModel::from_means(ModelKind::HmmDpMip, vec![vec![1.0]], vec![1.0], vec![vec![2.5, 0.3]]);
    let x = vec![vec![1, 0], vec![4, 2], vec![0, 0]];
    let expected: f64 = x.iter().map(|xt| log_poisson_vec(xt, &model.mu[0])).sum();
    assert!((heldout_loglik(&model, &seq(x)) - expected).abs() < 1e-10);
}

#[test]
fn two_steps_match_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let model = random_model(2, 3, &mut rng);
        let x = random_counts(2, 3, &mut rng);
        let mut terms = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                terms.push(
                    model.pi0[a].ln()
                        + log_poisson_vec(&x[0], &model.mu[a])
                        + model.pi[a][b].ln()
                        + log_poisson_vec(&x[1], &model.mu[b]),
                );
            }
        }
        let expected = common::log_sum_exp(&terms);
        assert!((heldout_loglik(&model, &seq(x)) - expected).abs() < 1e-10);
    }
}

#[test]
fn mixture_weights_give_iid_likelihood() {
    let w = vec![0.3, 0.7];
    let mu = vec![vec![1.0], vec![6.0]];
    let model = FittedModel::from_means(ModelKind::DpMip, vec![w.clone(), w.clone()], w.clone(), mu.clone());
    let x = vec![vec![0], vec![5], vec![7]];
    let expected: f64 = x
        .iter()
        .map(|xt| common::log_sum_exp(&[w[0].ln() + log_poisson_vec(xt, &mu[0]), w[1].ln() + log_poisson_vec(xt, &mu[1])]))
        .sum();
    assert!((heldout_loglik(&model, &seq(x)) - expected).abs() < 1e-10);
}

#[test]
fn empty_data_has_zero_loglik() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = random_model(3, 2, &mut rng);
    assert_eq!(heldout_loglik(&model, &seq(Vec::new())), 0.0);
}

proptest! {
    #[test]
    fn longer_prefixes_never_gain(seed in 0u64..5000, len in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(3, 2, &mut rng);
        let x = random_counts(len, 2, &mut rng);
        let mut prev = 0.0;
        for t in 1..=len {
            let ll = heldout_loglik(&model, &seq(x[..t].to_vec()));
            prop_assert!(ll <= prev + 1e-9);
            prev = ll;
        }
    }
}
