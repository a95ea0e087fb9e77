//! Shared fixtures and from-scratch reference computations.
#![allow(dead_code)]

pub mod exact;
pub mod cost;
pub mod fuzz;
pub mod mh;
pub mod viterbi;


use statrs::function::gamma::ln_gamma;
use tracemix_core::count_models::SymMatrix;
use tracemix_core::{GibbsState, Hyperparams, ModelKind};

pub fn ln_fact(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln ∫ Π_i Poisson(v_i | λ) Gamma(λ | shape, rate) dλ`.
pub fn poisson_gamma_marginal(values: &[u64], shape: f64, rate: f64) -> f64 {
    let n = values.len() as f64;
    let s: u64 = values.iter().sum();
    let a = shape + s as f64;
    shape * rate.ln() - ln_gamma(shape) + ln_gamma(a) - a * (rate + n).ln()
        - values.iter().map(|&v| ln_fact(v)).sum::<f64>()
}

/// Plain-vector description of a sampler configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub kind: ModelKind,
    pub hp: Hyperparams,
    pub x: Vec<Vec<u64>>,
    /// `y[t][j][l]`, full symmetric storage.
    pub y: Vec<Vec<Vec<u64>>>,
    pub z: Vec<usize>,
    pub b: Vec<Vec<bool>>,
    /// One weight per label plus the remainder.
    pub beta: Vec<f64>,
}

impl Config {
    pub fn from_state(st: &GibbsState) -> Self {
        let dim = st.dim();
        Self {
            kind: st.kind,
            hp: st.hp,
            x: st.x.clone(),
            y: st
                .y
                .iter()
                .map(|m| (0..dim).map(|j| (0..dim).map(|l| m.get(j, l)).collect()).collect())
                .collect(),
            z: st.z.clone(),
            b: st.b.clone(),
            beta: st.beta.clone(),
        }
    }

    fn active(&self, k: usize, j: usize, l: usize) -> bool {
        if self.kind.is_independent() && j != l {
            return false;
        }
        !self.kind.is_sparse() || (self.b[k][j] && self.b[k][l])
    }

    /// Moves row/column mass of pairs inactive under `b[z[t]]` to the diagonal.
    pub fn project(&mut self, t: usize) {
        let k = self.z[t];
        let dim = self.x[0].len();
        for j in 0..dim {
            for l in (j + 1)..dim {
                if !self.active(k, j, l) {
                    let v = self.y[t][j][l];
                    self.y[t][j][l] = 0;
                    self.y[t][l][j] = 0;
                    self.y[t][j][j] += v;
                    self.y[t][l][l] += v;
                }
            }
        }
    }

    /// `ln p(Y, Z, b | β)` with every rate, `η` and transition row integrated out.
    pub fn joint(&self) -> f64 {
        let hp = &self.hp;
        let dim = self.x[0].len();
        let k_len = self.b.len();
        let mut total = 0.0;
        let mut noise: Vec<Vec<u64>> = vec![Vec::new(); dim];
        for k in 0..k_len {
            let members: Vec<usize> = (0..self.z.len()).filter(|&t| self.z[t] == k).collect();
            if members.is_empty() {
                continue;
            }
            for j in 0..dim {
                for l in j..dim {
                    if self.active(k, j, l) {
                        let vals: Vec<u64> = members.iter().map(|&t| self.y[t][j][l]).collect();
                        total += poisson_gamma_marginal(&vals, hp.a_bar, hp.b_bar);
                    }
                }
                if self.kind.is_sparse() && !self.b[k][j] {
                    noise[j].extend(members.iter().map(|&t| self.y[t][j][j]));
                }
            }
        }
        if self.kind.is_sparse() {
            let used: Vec<usize> = (0..k_len).filter(|&k| self.z.contains(&k)).collect();
            for (j, vals) in noise.iter().enumerate() {
                total += poisson_gamma_marginal(vals, hp.a_hat, hp.b_hat);
                let c = used.iter().filter(|&&k| self.b[k][j]).count() as f64;
                let kk = used.len() as f64;
                total += ln_beta(hp.a_prime + c, hp.b_prime + kk - c) - ln_beta(hp.a_prime, hp.b_prime);
            }
        }
        if self.kind.is_temporal() {
            total += self.beta[self.z[0]].ln();
            let mut counts = vec![vec![0u64; k_len]; k_len];
            for w in self.z.windows(2) {
                counts[w[0]][w[1]] += 1;
            }
            for row in &counts {
                let out: u64 = row.iter().sum();
                if out == 0 {
                    continue;
                }
                total += ln_gamma(hp.alpha) - ln_gamma(hp.alpha + out as f64);
                for (l, &n) in row.iter().enumerate() {
                    if n > 0 {
                        let ab = hp.alpha * self.beta[l];
                        total += ln_gamma(ab + n as f64) - ln_gamma(ab);
                    }
                }
            }
        } else {
            let t_len = self.z.len() as f64;
            for k in 0..k_len {
                let n = self.z.iter().filter(|&&zk| zk == k).count();
                if n > 0 {
                    total += hp.alpha.ln() + ln_gamma(n as f64);
                }
            }
            total += ln_gamma(hp.alpha) - ln_gamma(hp.alpha + t_len);
        }
        total
    }
}

/// Builds a sampler state with the given `(Z, Y, b, β)`.
pub fn build_state(
    kind: ModelKind,
    hp: Hyperparams,
    x: &[Vec<u64>],
    y: &[Vec<Vec<u64>>],
    z: &[usize],
    b: &[Vec<bool>],
    beta: &[f64],
) -> GibbsState {
    let dim = x[0].len();
    let k_len = b.len();
    let mut st = GibbsState::init_from_counts(x, kind, hp);
    st.z = z.to_vec();
    st.y = y
        .iter()
        .map(|rows| {
            let mut m = SymMatrix::new(dim);
            for j in 0..dim {
                for l in j..dim {
                    m.set(j, l, rows[j][l]);
                }
            }
            m
        })
        .collect();
    st.b = b.to_vec();
    st.beta = beta.to_vec();
    st.m_aux = vec![0; k_len];
    st.n_k = vec![0; k_len];
    st.rebuild_stats();
    st.check_invariants().expect("fixture violates an invariant");
    st
}

/// Diagonal `Y` for each count vector.
pub fn diagonal_y(x: &[Vec<u64>]) -> Vec<Vec<Vec<u64>>> {
    x.iter()
        .map(|row| {
            let dim = row.len();
            (0..dim)
                .map(|j| (0..dim).map(|l| if j == l { row[j] } else { 0 }).collect())
                .collect()
        })
        .collect()
}

pub fn normalize_log(logw: &[f64]) -> Vec<f64> {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Largest absolute gap between empirical frequencies and exact probabilities.
pub fn max_gap(counts: &[u64], exact: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(exact)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .fold(0.0, f64::max)
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `∫ Π_i Poisson(v_i | λ) Gamma(λ | shape, rate) dλ` by the trapezoid rule.
pub fn grid_marginal(values: &[u64], shape: f64, rate: f64) -> f64 {
    let n = values.len() as f64;
    let s: u64 = values.iter().sum();
    let mean = (shape + s as f64) / (rate + n);
    let upper = 20.0 * mean + 50.0;
    let steps = 400_000;
    let h = upper / steps as f64;
    let log_norm = shape * rate.ln() - ln_gamma(shape);
    let f = |lam: f64| -> f64 {
        if lam == 0.0 {
            let zero = values.iter().all(|&v| v == 0) && shape == 1.0;
            return if zero { rate } else { 0.0 };
        }
        let mut lp = log_norm + (shape - 1.0) * lam.ln() - rate * lam;
        for &v in values {
            lp += v as f64 * lam.ln() - lam - ln_fact(v);
        }
        lp.exp()
    };
    let mut total = 0.5 * (f(0.0) + f(upper));
    for i in 1..steps {
        total += f(i as f64 * h);
    }
    total * h
}

/// A small seeded fixture for the conjugacy check: values, shape, rate.
pub fn conjugacy_fixtures(count: usize, seed: u64) -> Vec<(Vec<u64>, f64, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=4);
            let values = (0..n).map(|_| rng.random_range(0..=6)).collect();
            (values, rng.random_range(1.0..3.0), rng.random_range(0.5..3.0))
        })
        .collect()
}

/// Worst relative error of the collapsed factors against grid integration.
pub fn conjugacy_worst_error(count: usize, seed: u64) -> f64 {
    use tracemix_core::count_models::{log_f, log_f_hat};
    let mut worst: f64 = 0.0;
    for (values, shape, rate) in conjugacy_fixtures(count, seed) {
        let s: u64 = values.iter().sum();
        let n = values.len() as u64;
        let lfs: f64 = values.iter().map(|&v| ln_fact(v)).sum();
        let grid = grid_marginal(&values, shape, rate);
        let hp = Hyperparams { a_bar: shape, b_bar: rate, a_hat: shape, b_hat: rate, ..Hyperparams::default() };
        let f = (log_f(s, n, lfs, &hp) - log_f(0, 0, 0.0, &hp)).exp();
        let f_hat = (log_f_hat(s, n, lfs, &hp) - log_f_hat(0, 0, 0.0, &hp)).exp();
        worst = worst.max((f - grid).abs() / grid).max((f_hat - grid).abs() / grid);
    }
    worst
}
