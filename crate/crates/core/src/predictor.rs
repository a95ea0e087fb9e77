//! Point estimates, the access map `H` and the online Viterbi decoder.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::count_models::{log_poisson, log_poisson_vec, mu_from_params, Hyperparams, SmvpParams, SymMatrix};
use crate::error::{Error, Result};
use crate::gibbs::{GibbsState, ModelKind};

/// Parameters used for prediction, taken from one posterior configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub hp: Hyperparams,
    /// Transition matrix (mixture weights repeated on every row for the
    /// exchangeable kinds).
    pub pi: Vec<Vec<f64>>,
    pub pi0: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub lambda: Vec<SymMatrix<f64>>,
    pub lambda_hat: Vec<f64>,
    pub b: Vec<Vec<bool>>,
}

impl FittedModel {
    pub fn num_clusters(&self) -> usize {
        self.mu.len()
    }

    pub fn dim(&self) -> usize {
        self.lambda_hat.len()
    }

    /// Builds a model directly from `π`, `π⁰` and `μ` (no rate matrices).
    pub fn from_means(kind: ModelKind, pi: Vec<Vec<f64>>, pi0: Vec<f64>, mu: Vec<Vec<f64>>) -> Self {
        let dim = mu.first().map_or(0, Vec::len);
        let k = mu.len();
        Self {
            kind,
            hp: Hyperparams::default(),
            pi,
            pi0,
            mu,
            lambda: vec![SymMatrix::new(dim); k],
            lambda_hat: vec![0.0; dim],
            b: vec![vec![true; dim]; k],
        }
    }

    /// `ln Π_i Poisson(⌊μ_ki⌋; μ_ki)` per cluster: the likelihood of each
    /// cluster's own mode.
    pub fn mode_log_probs(&self) -> Vec<f64> {
        self.mu
            .iter()
            .map(|mu| mu.iter().map(|&m| log_poisson(m.floor() as u64, m)).sum())
            .collect()
    }
}

/// Point estimates from the final retained sample.
pub fn estimate_params(samples: &[GibbsState]) -> Result<FittedModel> {
    samples.last().map(estimate_from_state).ok_or(Error::NoSamples)
}

/// Posterior-mean parameters given one `(Z, Y, b)` configuration.
pub fn estimate_from_state(st: &GibbsState) -> FittedModel {
    let hp = st.hp;
    let k_len = st.num_clusters();
    let dim = st.dim();
    let lambda: Vec<SymMatrix<f64>> = (0..k_len)
        .map(|k| {
            let mut m = SymMatrix::new(dim);
            let n = st.n_k[k] as f64;
            for j in 0..dim {
                for l in j..dim {
                    if st.pair_active(k, j, l) {
                        m.set(j, l, (hp.a_bar + st.s[k].get(j, l) as f64) / (hp.b_bar + n));
                    }
                }
            }
            m
        })
        .collect();
    let lambda_hat: Vec<f64> = (0..dim)
        .map(|j| (hp.a_hat + st.s_hat[j] as f64) / (hp.b_hat + st.n_hat[j] as f64))
        .collect();
    let b: Vec<Vec<bool>> = if st.kind.is_sparse() {
        st.b.clone()
    } else {
        vec![vec![true; dim]; k_len]
    };
    let mu = (0..k_len)
        .map(|k| {
            mu_from_params(&SmvpParams {
                lambda: lambda[k].clone(),
                lambda_hat: lambda_hat.clone(),
                b: b[k].clone(),
            })
        })
        .collect();

    let (pi, pi0) = if st.kind.is_temporal() {
        let pi = (0..k_len)
            .map(|k| {
                let row: Vec<f64> = (0..k_len)
                    .map(|l| st.n_trans[k][l] as f64 + hp.alpha * st.beta[l])
                    .collect();
                normalize(row)
            })
            .collect();
        (pi, normalize(st.beta[..k_len].to_vec()))
    } else {
        let w = normalize(st.n_k.iter().map(|&n| n as f64).collect());
        (vec![w.clone(); k_len], w)
    };

    FittedModel {
        kind: st.kind,
        hp,
        pi,
        pi0,
        mu,
        lambda,
        lambda_hat,
        b,
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// `H`: cluster id to the union of the access sets of its training slices.
pub type AccessMap = BTreeMap<usize, BTreeSet<u64>>;

pub fn build_access_map(z: &[usize], a: &[BTreeSet<u64>]) -> AccessMap {
    assert_eq!(z.len(), a.len(), "assignments and access sets differ in length");
    let mut map = AccessMap::new();
    for (&k, blocks) in z.iter().zip(a) {
        map.entry(k).or_default().extend(blocks.iter().copied());
    }
    map
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Online Viterbi state.
#[derive(Debug, Clone)]
pub struct DecoderState {
    /// `ω(t, k)` in log space after the last observation.
    pub omega: Vec<f64>,
    /// `Ψ(t, l)`: best predecessor of `l` at each observed step after the first.
    pub psi: Vec<Vec<usize>>,
    /// Observations absorbed so far.
    pub t: usize,
    log_pi: Vec<Vec<f64>>,
    log_pi0: Vec<f64>,
    mode_log: Vec<f64>,
}

impl DecoderState {
    pub fn new(model: &FittedModel) -> Self {
        Self {
            omega: Vec::new(),
            psi: Vec::new(),
            t: 0,
            log_pi: model
                .pi
                .iter()
                .map(|row| row.iter().map(|p| p.ln()).collect())
                .collect(),
            log_pi0: model.pi0.iter().map(|p| p.ln()).collect(),
            mode_log: model.mode_log_probs(),
        }
    }

    /// `max_{k'} ω(k') + ln π[k'][l]` and its argmax (lowest index on ties).
    fn best_into(&self, l: usize) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, &w) in self.omega.iter().enumerate() {
            let v = w + self.log_pi[k][l];
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }

    /// Scores of the next state before its emission is seen, with that
    /// emission replaced by each cluster's mode.
    pub fn next_scores(&self) -> Vec<f64> {
        (0..self.mode_log.len())
            .map(|k| {
                let prior = if self.t == 0 {
                    self.log_pi0[k]
                } else {
                    self.best_into(k).0
                };
                prior + self.mode_log[k]
            })
            .collect()
    }

    /// Most likely state sequence over the absorbed observations.
    pub fn path(&self) -> Vec<usize> {
        if self.t == 0 {
            return Vec::new();
        }
        let mut path = vec![argmax(&self.omega)];
        for back in self.psi.iter().rev() {
            let prev = back[*path.last().unwrap()];
            path.push(prev);
        }
        path.reverse();
        path
    }
}

/// Absorbs one observed count vector.
pub fn decoder_observe(state: &mut DecoderState, model: &FittedModel, x: &[u64]) {
    let k_len = model.num_clusters();
    let emit: Vec<f64> = model.mu.iter().map(|mu| log_poisson_vec(x, mu)).collect();
    if state.t == 0 {
        state.omega = (0..k_len).map(|k| state.log_pi0[k] + emit[k]).collect();
    } else {
        let mut omega = Vec::with_capacity(k_len);
        let mut back = Vec::with_capacity(k_len);
        for (l, &e) in emit.iter().enumerate() {
            let (v, k) = state.best_into(l);
            omega.push(v + e);
            back.push(k);
        }
        state.omega = omega;
        state.psi.push(back);
    }
    state.t += 1;
}

/// Predicted state of the next, not yet observed, slice.
pub fn decoder_predict_next(state: &DecoderState, _model: &FittedModel) -> usize {
    argmax(&state.next_scores())
}

/// Blocks to preload for the next slice; empty when the predicted cluster
/// has no entry in the map.
pub fn predict_blocks<'a>(
    state: &DecoderState,
    model: &FittedModel,
    map: &'a AccessMap,
) -> Option<&'a BTreeSet<u64>> {
    map.get(&decoder_predict_next(state, model))
}

/// Batch Viterbi over a whole sequence.
pub fn viterbi(model: &FittedModel, xs: &[Vec<u64>]) -> Vec<usize> {
    let mut st = DecoderState::new(model);
    for x in xs {
        decoder_observe(&mut st, model, x);
    }
    st.path()
}

/// Viterbi path from explicit initial, transition and emission
/// log-probabilities (`emit[t][k]`).
pub fn viterbi_from_logs(log_pi0: &[f64], log_pi: &[Vec<f64>], emit: &[Vec<f64>]) -> Vec<usize> {
    let Some(first) = emit.first() else {
        return Vec::new();
    };
    let k_len = log_pi0.len();
    let mut omega: Vec<f64> = (0..k_len).map(|k| log_pi0[k] + first[k]).collect();
    let mut psi: Vec<Vec<usize>> = Vec::with_capacity(emit.len());
    for e in &emit[1..] {
        let mut next = Vec::with_capacity(k_len);
        let mut back = Vec::with_capacity(k_len);
        for l in 0..k_len {
            let mut best = (f64::NEG_INFINITY, 0);
            for (k, &w) in omega.iter().enumerate() {
                let v = w + log_pi[k][l];
                if v > best.0 {
                    best = (v, k);
                }
            }
            next.push(best.0 + e[l]);
            back.push(best.1);
        }
        omega = next;
        psi.push(back);
    }
    let mut path = vec![argmax(&omega)];
    for back in psi.iter().rev() {
        path.push(back[*path.last().unwrap()]);
    }
    path.reverse();
    path
}

/// Everything the operating phase needs from a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub model: FittedModel,
    pub access_map: AccessMap,
    pub binning: crate::trace_ingest::BinningConfig,
}
