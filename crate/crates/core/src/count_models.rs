//! Multivariate Poisson (MVP), Independent Poisson and Sparse MVP emissions.
//!
//! An MVP count vector is `X = Y·1` where `Y` is a symmetric matrix of
//! independent Poisson draws `Y[j][l] ~ Poisson(λ[j][l])`. Off-diagonal rates
//! are exactly the pairwise covariances of `X`. The sparse variant keeps the
//! full covariance structure only on the dimensions flagged active by `b`;
//! every inactive dimension is an independent low-rate Poisson noise source.
//!
//! Besides the samplers this module holds the Gamma-collapsed likelihood
//! kernels used throughout inference. All of them work in log space.

use std::cell::RefCell;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Symmetric `M×M` matrix stored as its packed upper triangle (`j ≤ l`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> SymMatrix<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::default(); dim * (dim + 1) / 2],
        }
    }

    pub fn filled(dim: usize, value: T) -> Self {
        Self {
            dim,
            data: vec![value; dim * (dim + 1) / 2],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j: usize, l: usize) -> T {
        self.data[self.offset(j, l)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, l: usize, value: T) {
        let i = self.offset(j, l);
        self.data[i] = value;
    }

    #[inline]
    pub fn get_mut(&mut self, j: usize, l: usize) -> &mut T {
        let i = self.offset(j, l);
        &mut self.data[i]
    }

    #[inline]
    fn offset(&self, j: usize, l: usize) -> usize {
        let (j, l) = if j <= l { (j, l) } else { (l, j) };
        debug_assert!(l < self.dim, "index ({j},{l}) out of range {}", self.dim);
        j * (2 * self.dim - j + 1) / 2 + (l - j)
    }

    /// Iterates `(j, l, value)` over the upper triangle in lexicographic order.
    pub fn iter_upper(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let dim = self.dim;
        (0..dim).flat_map(move |j| (j..dim).map(move |l| (j, l, self.get(j, l))))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl SymMatrix<u64> {
    /// `Σ_l Y[j][l]`, the count vector this latent matrix generates.
    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|l| self.get(j, l)).sum())
            .collect()
    }
}

/// Prior hyperparameters shared by every model variant.
///
/// Gamma priors use the shape–rate parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Shape of the Gamma prior on active rates `λ[k][j][l]`.
    pub a_bar: f64,
    /// Rate of the Gamma prior on active rates.
    pub b_bar: f64,
    /// Shape of the Gamma prior on noise rates `λ̂[j]`.
    pub a_hat: f64,
    /// Rate of the Gamma prior on noise rates.
    pub b_hat: f64,
    /// Beta prior on the per-dimension activity probability.
    pub a_prime: f64,
    pub b_prime: f64,
    /// DP concentration (also the per-state transition concentration).
    pub alpha: f64,
    /// Top-level GEM concentration.
    pub gamma: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            a_bar: 1.0,
            b_bar: 1.0,
            a_hat: 1.0,
            b_hat: 10.0,
            a_prime: 1.0,
            b_prime: 1.0,
            alpha: 1.0,
            gamma: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a_bar", self.a_bar),
            ("b_bar", self.b_bar),
            ("a_hat", self.a_hat),
            ("b_hat", self.b_hat),
            ("a_prime", self.a_prime),
            ("b_prime", self.b_prime),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Rates of a full-covariance MVP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvpParams {
    pub lambda: SymMatrix<f64>,
}

/// Rates of a sparse MVP: covariance on active dimensions, noise elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmvpParams {
    pub lambda: SymMatrix<f64>,
    pub lambda_hat: Vec<f64>,
    pub b: Vec<bool>,
}

impl SmvpParams {
    /// All dimensions active, no noise: equivalent to the plain MVP.
    pub fn from_mvp(params: &MvpParams) -> Self {
        let dim = params.lambda.dim();
        Self {
            lambda: params.lambda.clone(),
            lambda_hat: vec![0.0; dim],
            b: vec![true; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

#[inline]
fn draw_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    // Poisson::new only rejects non-positive or non-finite rates.
    Poisson::new(rate).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Draws the latent symmetric matrix `Y` of a sparse MVP.
pub fn sample_smvp_latent<R: Rng + ?Sized>(params: &SmvpParams, rng: &mut R) -> SymMatrix<u64> {
    let dim = params.dim();
    let mut y = SymMatrix::new(dim);
    for j in 0..dim {
        for l in j..dim {
            let v = if params.b[j] && params.b[l] {
                draw_poisson(params.lambda.get(j, l), rng)
            } else if j == l {
                draw_poisson(params.lambda_hat[j], rng)
            } else {
                0
            };
            y.set(j, l, v);
        }
    }
    y
}

/// One MVP count vector: `X[j] = Σ_l Y[j][l]`.
pub fn sample_mvp<R: Rng + ?Sized>(params: &MvpParams, rng: &mut R) -> Vec<u64> {
    let dim = params.lambda.dim();
    let mut x = vec![0u64; dim];
    for j in 0..dim {
        for l in j..dim {
            let v = draw_poisson(params.lambda.get(j, l), rng);
            x[j] += v;
            if l != j {
                x[l] += v;
            }
        }
    }
    x
}

/// One sparse-MVP count vector.
pub fn sample_smvp<R: Rng + ?Sized>(params: &SmvpParams, rng: &mut R) -> Vec<u64> {
    sample_smvp_latent(params, rng).row_sums()
}

const LN_FACT_TABLE_LEN: usize = 1 << 14;

/// `ln(n!)`, served from a table for small `n`.
#[inline]
pub fn ln_fact(n: u64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..LN_FACT_TABLE_LEN as u64).map(ln_factorial).collect());
    table.get(n as usize).copied().unwrap_or_else(|| ln_factorial(n))
}

thread_local! {
    static LN_GAMMA_TABLES: RefCell<Vec<(u64, Vec<f64>)>> = const { RefCell::new(Vec::new()) };
}

const LN_GAMMA_TABLE_LIMIT: u64 = 1 << 16;

/// `ln Γ(shape + k)`, memoized per thread for `k < 65536`.
#[inline]
pub fn ln_gamma_shifted(shape: f64, k: u64) -> f64 {
    if k >= LN_GAMMA_TABLE_LIMIT {
        return ln_gamma(shape + k as f64);
    }
    LN_GAMMA_TABLES.with(|cell| {
        let mut tables = cell.borrow_mut();
        let key = shape.to_bits();
        let idx = match tables.iter().position(|(s, _)| *s == key) {
            Some(i) => i,
            None => {
                if tables.len() >= 8 {
                    tables.remove(0);
                }
                tables.push((key, Vec::new()));
                tables.len() - 1
            }
        };
        let table = &mut tables[idx].1;
        let k = k as usize;
        if k >= table.len() {
            let end = (k + 1).next_power_of_two().clamp(64, LN_GAMMA_TABLE_LIMIT as usize);
            let start = table.len();
            table.extend((start..end).map(|i| ln_gamma(shape + i as f64)));
        }
        table[k]
    })
}

/// Collapsed Poisson–Gamma factor in log space:
/// `ln Γ(a+S) − (a+S)·ln(b+n) − Σ ln(Y!)`.
///
/// This is the unnormalized form; the conjugate marginal likelihood of the
/// `n` observations is `log_f_generic(S, n, ·) − log_f_generic(0, 0, 0)`.
#[inline]
pub fn log_f_generic(sum: u64, n: u64, log_fact_sum: f64, shape: f64, rate: f64) -> f64 {
    let a = shape + sum as f64;
    ln_gamma(a) - a * (rate + n as f64).ln() - log_fact_sum
}

/// `F` for an active covariance entry, using `(ā, b̄)`.
#[inline]
pub fn log_f(sum: u64, n: u64, log_fact_sum: f64, hp: &Hyperparams) -> f64 {
    log_f_generic(sum, n, log_fact_sum, hp.a_bar, hp.b_bar)
}

/// `F̂` for the pooled noise rate of one dimension, using `(â, b̂)`.
#[inline]
pub fn log_f_hat(sum_hat: u64, n_hat: u64, log_fact_sum: f64, hp: &Hyperparams) -> f64 {
    log_f_generic(sum_hat, n_hat, log_fact_sum, hp.a_hat, hp.b_hat)
}

/// Normalized collapsed marginal `∫ Π_t Poisson(Y_t|λ) Gamma(λ|shape,rate) dλ`.
#[inline]
pub fn log_marginal(sum: u64, n: u64, log_fact_sum: f64, shape: f64, rate: f64) -> f64 {
    log_f_generic(sum, n, log_fact_sum, shape, rate) - log_f_generic(0, 0, 0.0, shape, rate)
}

/// Change in `ln F` when one observation `y` joins a group with stats `(sum, n)`.
#[inline]
pub fn log_f_add(sum: u64, n: u64, y: u64, shape: f64, rate: f64) -> f64 {
    let a0 = shape + sum as f64;
    let a1 = shape + (sum + y) as f64;
    let r0 = rate + n as f64;
    ln_gamma_shifted(shape, sum + y) - ln_gamma_shifted(shape, sum) - a1 * (r0 + 1.0).ln() + a0 * r0.ln()
        - ln_fact(y)
}

/// Per-dimension emission means of a sparse MVP:
/// `μ_i = Σ_j λ[i][j]·b_i·b_j + (1 − b_i)·λ̂_i`.
pub fn mu_from_params(params: &SmvpParams) -> Vec<f64> {
    let dim = params.dim();
    (0..dim)
        .map(|i| {
            if params.b[i] {
                (0..dim)
                    .filter(|&j| params.b[j])
                    .map(|j| params.lambda.get(i, j))
                    .sum()
            } else {
                params.lambda_hat[i]
            }
        })
        .collect()
}

/// `ln Poisson(x; μ)`, with `ln Poisson(0; 0) = 0` and `−∞` for `x > 0, μ = 0`.
#[inline]
pub fn log_poisson(x: u64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    x as f64 * mu.ln() - mu - ln_fact(x)
}

/// `Σ_i ln Poisson(x_i; μ_i)`.
pub fn log_poisson_vec(x: &[u64], mu: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), mu.len());
    x.iter().zip(mu).map(|(&xi, &mi)| log_poisson(xi, mi)).sum()
}
