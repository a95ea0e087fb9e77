//! Exact new-cluster marginals for the sparse Metropolis–Hastings estimate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracemix_core::gibbs::f_new_sparse;
use tracemix_core::{GibbsState, Hyperparams, MhSettings, ModelKind};

use super::{build_state, ln_fact, poisson_gamma_marginal};

/// `ln h(b)` for point `t` alone in a cluster with activity `b`.
pub fn reference_h(st: &GibbsState, t: usize, b: &[bool]) -> f64 {
    let hp = st.hp;
    let dim = st.dim();
    let mut y: Vec<Vec<u64>> = (0..dim).map(|j| (0..dim).map(|l| st.y[t].get(j, l)).collect()).collect();
    for j in 0..dim {
        for l in (j + 1)..dim {
            if !(b[j] && b[l]) {
                let v = y[j][l];
                y[j][l] = 0;
                y[l][j] = 0;
                y[j][j] += v;
                y[l][l] += v;
            }
        }
    }
    let mut total = 0.0;
    for j in 0..dim {
        if b[j] {
            for l in j..dim {
                if b[l] {
                    total += poisson_gamma_marginal(&[y[j][l]], hp.a_bar, hp.b_bar);
                }
            }
        } else {
            // Predictive of the pooled noise rate given the other inactive diagonals.
            let (s, n) = (st.s_hat[j], st.n_hat[j]);
            let a = hp.a_hat + s as f64;
            let r = hp.b_hat + n as f64;
            let v = y[j][j];
            total += statrs::function::gamma::ln_gamma(a + v as f64) - statrs::function::gamma::ln_gamma(a)
                + a * r.ln()
                - (a + v as f64) * (r + 1.0).ln()
                - ln_fact(v);
        }
    }
    total
}

/// `ln Σ_b p(b) h(b)` with `p(b_j = 1) = (c_j + a') / (K + a' + b')`.
pub fn exact_sum(st: &GibbsState, t: usize) -> f64 {
    let dim = st.dim();
    let k_len = st.num_clusters() as f64;
    let hp = st.hp;
    let p: Vec<f64> = (0..dim)
        .map(|j| {
            let c = st.b.iter().filter(|bk| bk[j]).count() as f64;
            (c + hp.a_prime) / (k_len + hp.a_prime + hp.b_prime)
        })
        .collect();
    let terms: Vec<f64> = (0..1usize << dim)
        .map(|mask| {
            let b: Vec<bool> = (0..dim).map(|j| mask >> j & 1 == 1).collect();
            let lp: f64 = b
                .iter()
                .zip(&p)
                .map(|(&bj, &pj)| if bj { pj.ln() } else { (1.0 - pj).ln() })
                .sum();
            lp + reference_h(st, t, &b)
        })
        .collect();
    super::log_sum_exp(&terms)
}

pub struct Fixture {
    pub state: GibbsState,
    pub t: usize,
    pub b_old: Vec<bool>,
}

pub fn fixtures() -> Vec<Fixture> {
    let hp = Hyperparams::default();
    let mut out = Vec::new();
    // M = 1: point 2 moves out of cluster 1, whose other member stays.
    let x1 = vec![vec![3], vec![0], vec![4], vec![1]];
    let st = build_state(
        ModelKind::SparseHmmDpMmvp,
        hp,
        &x1,
        &super::diagonal_y(&x1),
        &[0, 1, 1, 0],
        &[vec![true], vec![false]],
        &[0.3, 0.3, 0.4],
    );
    out.push((st, 2));
    // M = 2 with off-diagonal mass on the point being moved.
    let x2 = vec![vec![2, 1], vec![0, 1], vec![3, 3], vec![1, 0]];
    let y2 = vec![
        vec![vec![2, 0], vec![0, 1]],
        vec![vec![0, 0], vec![0, 1]],
        vec![vec![1, 2], vec![2, 1]],
        vec![vec![1, 0], vec![0, 0]],
    ];
    let st = build_state(
        ModelKind::SparseDpMmvp,
        hp,
        &x2,
        &y2,
        &[0, 1, 0, 1],
        &[vec![true, true], vec![false, true]],
        &[0.3, 0.3, 0.4],
    );
    out.push((st, 2));
    let st = build_state(
        ModelKind::SparseDpMmvp,
        hp,
        &x2,
        &super::diagonal_y(&x2),
        &[0, 1, 0, 1],
        &[vec![true, true], vec![false, true]],
        &[0.3, 0.3, 0.4],
    );
    out.push((st, 1));
    out.into_iter()
        .map(|(mut state, t)| {
            let (_, b_old) = state.remove_point(t);
            Fixture { state, t, b_old }
        })
        .collect()
}

/// Per fixture: exact value, replication mean, single-estimate standard
/// error, and the fraction of estimates within three standard errors.
pub fn mh_check(mh: &MhSettings, replications: usize, seed: u64) -> Vec<(f64, f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fixtures()
        .iter()
        .map(|f| {
            let exact = exact_sum(&f.state, f.t).exp();
            let est: Vec<f64> = (0..replications)
                .map(|_| f_new_sparse(f.t, &f.state, &f.b_old, mh, &mut rng).log_value.exp())
                .collect();
            let mean = est.iter().sum::<f64>() / replications as f64;
            let var = est.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (replications - 1) as f64;
            let se = var.sqrt();
            let inside = est.iter().filter(|v| (*v - exact).abs() <= 3.0 * se).count();
            (exact, mean, se, inside as f64 / replications as f64)
        })
        .collect()
}
