use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use super::{MhSettings, ModelKind};
use crate::count_models::{ln_fact, log_marginal, Hyperparams, SymMatrix};
use crate::trace_ingest::CountVectorSequence;

/// Marker for a point that is temporarily out of every cluster.
pub const UNASSIGNED: usize = usize::MAX;

/// Mean count above which a dimension starts out active.
const INIT_ACTIVITY_THRESHOLD: f64 = 0.25;

/// Full sampler state.
///
/// Invariants kept after every update:
/// * `Σ_l y[t][j][l] == x[t][j]`;
/// * `s[k] == Σ_{t: z[t]=k} y[t]`, `n_k[k] == |{t: z[t]=k}|`;
/// * `s_hat[j]`, `n_hat[j]` pool the diagonals of points whose cluster has `j` inactive;
/// * `n_trans[k][l]` counts consecutive pairs `(z[t-1], z[t]) == (k, l)`;
/// * every cluster is non-empty and `beta` has `K + 1` entries summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsState {
    pub kind: ModelKind,
    pub hp: Hyperparams,
    pub mh: MhSettings,
    pub x: Vec<Vec<u64>>,
    pub z: Vec<usize>,
    pub y: Vec<SymMatrix<u64>>,
    pub b: Vec<Vec<bool>>,
    pub beta: Vec<f64>,
    pub m_aux: Vec<u64>,
    pub n_trans: Vec<Vec<u64>>,
    pub n_k: Vec<u64>,
    pub s: Vec<SymMatrix<u64>>,
    pub s_hat: Vec<u64>,
    pub n_hat: Vec<u64>,
    /// Running count of `Y` entries resampled.
    pub y_updates: u64,
}

/// Sufficient statistics, as maintained or as recomputed from `(Z, Y, b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub n_k: Vec<u64>,
    pub s: Vec<SymMatrix<u64>>,
    pub s_hat: Vec<u64>,
    pub n_hat: Vec<u64>,
    pub n_trans: Vec<Vec<u64>>,
}

impl GibbsState {
    /// Single-cluster start with diagonal `Y`.
    pub fn init(data: &CountVectorSequence, kind: ModelKind, hp: Hyperparams) -> Self {
        Self::init_from_counts(&data.x, kind, hp)
    }

    pub fn init_from_counts(x: &[Vec<u64>], kind: ModelKind, hp: Hyperparams) -> Self {
        assert!(!x.is_empty(), "cannot initialize a sampler on empty data");
        let dim = x[0].len();
        let t_len = x.len();
        let y = x
            .iter()
            .map(|row| {
                let mut m = SymMatrix::new(dim);
                for (j, &v) in row.iter().enumerate() {
                    m.set(j, j, v);
                }
                m
            })
            .collect();
        let b0 = if kind.is_sparse() {
            (0..dim)
                .map(|j| {
                    let mean = x.iter().map(|r| r[j] as f64).sum::<f64>() / t_len as f64;
                    mean > INIT_ACTIVITY_THRESHOLD
                })
                .collect()
        } else {
            vec![true; dim]
        };
        let mut state = Self {
            kind,
            hp,
            mh: MhSettings::default(),
            x: x.to_vec(),
            z: vec![0; t_len],
            y,
            b: vec![b0],
            beta: vec![0.5, 0.5],
            m_aux: vec![0],
            n_trans: vec![vec![0]],
            n_k: vec![0],
            s: vec![SymMatrix::new(dim)],
            s_hat: vec![0; dim],
            n_hat: vec![0; dim],
            y_updates: 0,
        };
        state.rebuild_stats();
        state
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.n_k.len()
    }

    /// Whether `Y[j][l]` carries a Gamma-collapsed rate in cluster `k`.
    #[inline]
    pub fn pair_active(&self, k: usize, j: usize, l: usize) -> bool {
        pair_active(self.kind, &self.b[k], j, l)
    }

    pub fn members(&self, k: usize) -> Vec<usize> {
        self.z
            .iter()
            .enumerate()
            .filter(|&(_, &zk)| zk == k)
            .map(|(t, _)| t)
            .collect()
    }

    /// Recomputes every statistic from `(Z, Y, b)`.
    pub fn recompute_stats(&self) -> StatsSnapshot {
        let dim = self.dim();
        let k_len = self.num_clusters();
        let mut snap = StatsSnapshot {
            n_k: vec![0; k_len],
            s: vec![SymMatrix::new(dim); k_len],
            s_hat: vec![0; dim],
            n_hat: vec![0; dim],
            n_trans: vec![vec![0; k_len]; k_len],
        };
        for (t, &k) in self.z.iter().enumerate() {
            if k == UNASSIGNED {
                continue;
            }
            snap.n_k[k] += 1;
            for (j, l, v) in self.y[t].iter_upper() {
                *snap.s[k].get_mut(j, l) += v;
            }
            if self.kind.is_sparse() {
                for j in 0..dim {
                    if !self.b[k][j] {
                        snap.s_hat[j] += self.y[t].get(j, j);
                        snap.n_hat[j] += 1;
                    }
                }
            }
            if t > 0 && self.z[t - 1] != UNASSIGNED {
                snap.n_trans[self.z[t - 1]][k] += 1;
            }
        }
        snap
    }

    pub fn stats(&self) -> StatsSnapshot {
        StatsSnapshot {
            n_k: self.n_k.clone(),
            s: self.s.clone(),
            s_hat: self.s_hat.clone(),
            n_hat: self.n_hat.clone(),
            n_trans: self.n_trans.clone(),
        }
    }

    pub fn rebuild_stats(&mut self) {
        let snap = self.recompute_stats();
        self.n_k = snap.n_k;
        self.s = snap.s;
        self.s_hat = snap.s_hat;
        self.n_hat = snap.n_hat;
        self.n_trans = snap.n_trans;
        self.m_aux.resize(self.num_clusters(), 0);
    }

    /// Checks the structural invariants, returning the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (t, yt) in self.y.iter().enumerate() {
            if yt.row_sums() != self.x[t] {
                return Err(format!("row sums of Y[{t}] differ from X[{t}]"));
            }
            let k = self.z[t];
            if k == UNASSIGNED || k >= self.num_clusters() {
                return Err(format!("point {t} has invalid cluster {k}"));
            }
            for (j, l, v) in yt.iter_upper() {
                if v > 0 && j != l && !self.pair_active(k, j, l) {
                    return Err(format!("Y[{t}][{j}][{l}] = {v} on an inactive pair"));
                }
            }
        }
        if self.n_k.iter().any(|&n| n == 0) {
            return Err("empty cluster present".into());
        }
        if self.beta.len() != self.num_clusters() + 1 {
            return Err("beta length mismatch".into());
        }
        let total: f64 = self.beta.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(format!("beta sums to {total}"));
        }
        if self.stats() != self.recompute_stats() {
            return Err("incremental statistics diverged from recomputation".into());
        }
        Ok(())
    }

    /// Moves any mass on pairs inactive under `b` onto the diagonals.
    pub fn project(kind: ModelKind, y: &mut SymMatrix<u64>, b: &[bool]) {
        if !kind.is_sparse() {
            return;
        }
        let dim = y.dim();
        for j in 0..dim {
            for l in (j + 1)..dim {
                if b[j] && b[l] {
                    continue;
                }
                let v = y.get(j, l);
                if v > 0 {
                    y.set(j, l, 0);
                    *y.get_mut(j, j) += v;
                    *y.get_mut(l, l) += v;
                }
            }
        }
    }

    /// Takes point `t` out of its cluster. Returns the old label and its
    /// activity vector; an emptied cluster is deleted.
    pub fn remove_point(&mut self, t: usize) -> (usize, Vec<bool>) {
        let k = self.z[t];
        debug_assert_ne!(k, UNASSIGNED);
        let dim = self.dim();
        self.n_k[k] -= 1;
        for (j, l, v) in self.y[t].iter_upper() {
            if v > 0 {
                *self.s[k].get_mut(j, l) -= v;
            }
        }
        if self.kind.is_sparse() {
            for j in 0..dim {
                if !self.b[k][j] {
                    self.s_hat[j] -= self.y[t].get(j, j);
                    self.n_hat[j] -= 1;
                }
            }
        }
        if t > 0 {
            self.n_trans[self.z[t - 1]][k] -= 1;
        }
        if t + 1 < self.len() {
            self.n_trans[k][self.z[t + 1]] -= 1;
        }
        self.z[t] = UNASSIGNED;
        let b_old = self.b[k].clone();
        if self.n_k[k] == 0 {
            self.delete_cluster(k);
        }
        (k, b_old)
    }

    /// Puts point `t` into cluster `k`; `y[t]` must already respect `b[k]`.
    pub fn add_point(&mut self, t: usize, k: usize) {
        let dim = self.dim();
        self.z[t] = k;
        self.n_k[k] += 1;
        for (j, l, v) in self.y[t].iter_upper() {
            if v > 0 {
                *self.s[k].get_mut(j, l) += v;
            }
        }
        if self.kind.is_sparse() {
            for j in 0..dim {
                if !self.b[k][j] {
                    self.s_hat[j] += self.y[t].get(j, j);
                    self.n_hat[j] += 1;
                }
            }
        }
        if t > 0 {
            self.n_trans[self.z[t - 1]][k] += 1;
        }
        if t + 1 < self.len() {
            self.n_trans[k][self.z[t + 1]] += 1;
        }
    }

    /// Removes an empty cluster; its stick weight returns to the remainder.
    fn delete_cluster(&mut self, k: usize) {
        debug_assert_eq!(self.n_k[k], 0);
        let w = self.beta.remove(k);
        *self.beta.last_mut().expect("remainder weight") += w;
        self.b.remove(k);
        self.m_aux.remove(k);
        self.n_k.remove(k);
        self.s.remove(k);
        self.n_trans.remove(k);
        for row in &mut self.n_trans {
            row.remove(k);
        }
        for zk in &mut self.z {
            if *zk != UNASSIGNED && *zk > k {
                *zk -= 1;
            }
        }
    }

    /// Opens an empty cluster with activity `b`, taking a `Beta(1, γ)`
    /// fraction of the remainder stick weight.
    pub fn open_cluster<R: Rng + ?Sized>(&mut self, b: Vec<bool>, rng: &mut R) -> usize {
        let k = self.num_clusters();
        let rest = *self.beta.last().expect("remainder weight");
        let frac = Beta::new(1.0, self.hp.gamma)
            .map(|d| d.sample(rng))
            .unwrap_or(0.5);
        let w = frac * rest;
        *self.beta.last_mut().unwrap() = rest - w;
        self.beta.insert(k, w);
        self.b.push(b);
        self.m_aux.push(0);
        self.n_k.push(0);
        self.s.push(SymMatrix::new(self.dim()));
        for row in &mut self.n_trans {
            row.push(0);
        }
        self.n_trans.push(vec![0; k + 1]);
        k
    }

    /// Collapsed joint log-density `ln p(Y, Z, b | β)` used for diagnostics.
    ///
    /// Per-cluster terms are summed in sorted order so that relabeling the
    /// clusters reproduces the value bit-for-bit.
    pub fn joint_log_density(&self) -> f64 {
        let hp = &self.hp;
        let dim = self.dim();
        let k_len = self.num_clusters();
        let mut cluster_terms = Vec::with_capacity(k_len);
        let mut lf_hat = vec![0.0; dim];
        for k in 0..k_len {
            let members = self.members(k);
            let n = self.n_k[k];
            let mut term = 0.0;
            for j in 0..dim {
                for l in j..dim {
                    if !self.pair_active(k, j, l) {
                        continue;
                    }
                    let lf: f64 = members.iter().map(|&t| ln_fact(self.y[t].get(j, l))).sum();
                    term += log_marginal(self.s[k].get(j, l), n, lf, hp.a_bar, hp.b_bar);
                }
                if self.kind.is_sparse() && !self.b[k][j] {
                    lf_hat[j] += members
                        .iter()
                        .map(|&t| ln_fact(self.y[t].get(j, j)))
                        .sum::<f64>();
                }
            }
            if !self.kind.is_temporal() {
                term += hp.alpha.ln() + ln_gamma(n as f64);
            }
            cluster_terms.push(term);
        }
        cluster_terms.sort_by(f64::total_cmp);
        let mut total: f64 = cluster_terms.iter().sum();

        if self.kind.is_sparse() {
            for j in 0..dim {
                total += log_marginal(self.s_hat[j], self.n_hat[j], lf_hat[j], hp.a_hat, hp.b_hat);
                let c = self.b.iter().filter(|bk| bk[j]).count() as f64;
                total += ln_beta(hp.a_prime + c, hp.b_prime + k_len as f64 - c)
                    - ln_beta(hp.a_prime, hp.b_prime);
            }
        }

        if self.kind.is_temporal() {
            total += self.beta[self.z[0]].ln();
            for row in &self.n_trans {
                let out: u64 = row.iter().sum();
                total += ln_gamma(hp.alpha) - ln_gamma(hp.alpha + out as f64);
                for (l, &n) in row.iter().enumerate() {
                    if n > 0 {
                        let ab = hp.alpha * self.beta[l];
                        total += ln_gamma(ab + n as f64) - ln_gamma(ab);
                    }
                }
            }
        } else {
            total += ln_gamma(hp.alpha) - ln_gamma(hp.alpha + self.len() as f64);
        }
        total
    }

    /// Number of `Y` entries one sweep resamples under the current `(Z, b)`.
    pub fn y_variables_per_sweep(&self) -> u64 {
        if self.kind.is_independent() {
            return 0;
        }
        let dim = self.dim();
        self.z
            .iter()
            .map(|&k| {
                let active = (0..dim).filter(|&j| self.b[k][j]).count() as u64;
                active * active.saturating_sub(1) / 2
            })
            .sum()
    }

    /// Applies a cluster relabeling `new_label = perm[old_label]`.
    pub fn relabel(&mut self, perm: &[usize]) {
        let k_len = self.num_clusters();
        assert_eq!(perm.len(), k_len);
        let mut inv = vec![0; k_len];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        for zk in &mut self.z {
            *zk = perm[*zk];
        }
        self.b = inv.iter().map(|&o| self.b[o].clone()).collect();
        self.n_k = inv.iter().map(|&o| self.n_k[o]).collect();
        self.s = inv.iter().map(|&o| self.s[o].clone()).collect();
        self.m_aux = inv.iter().map(|&o| self.m_aux[o]).collect();
        let mut beta: Vec<f64> = inv.iter().map(|&o| self.beta[o]).collect();
        beta.push(self.beta[k_len]);
        self.beta = beta;
        self.n_trans = inv
            .iter()
            .map(|&o| inv.iter().map(|&p| self.n_trans[o][p]).collect())
            .collect();
    }
}

#[inline]
pub(crate) fn pair_active(kind: ModelKind, b: &[bool], j: usize, l: usize) -> bool {
    if kind.is_independent() {
        j == l
    } else if kind.is_sparse() {
        b[j] && b[l]
    } else {
        true
    }
}
