//! Single-variable Gibbs updates.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::state::{pair_active, GibbsState};
use super::MhSettings;
use crate::count_models::{ln_fact, ln_gamma_shifted, log_f_add, SymMatrix};

/// Draws an index from unnormalized log weights.
pub(crate) fn sample_log_categorical<R: Rng + ?Sized>(logw: &[f64], rng: &mut R) -> usize {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite(), "all candidate weights are zero");
    let w: Vec<f64> = logw.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return i;
        }
        u -= wi;
    }
    w.iter().rposition(|&wi| wi > 0.0).unwrap_or(w.len() - 1)
}

fn log_mean_exp(vals: &[f64]) -> f64 {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = vals.iter().map(|&v| (v - max).exp()).sum();
    max + (s / vals.len() as f64).ln()
}

/// Log-likelihood change from adding `y` (already conforming to `b`) to a
/// group with statistics `s`, size `n` and activity `b`.
fn log_lik_add(st: &GibbsState, s: Option<&SymMatrix<u64>>, n: u64, b: &[bool], y: &SymMatrix<u64>) -> f64 {
    let hp = &st.hp;
    let dim = st.dim();
    let r0 = hp.b_bar + n as f64;
    let (ln_r0, ln_r1) = (r0.ln(), (r0 + 1.0).ln());
    let add = |sum: u64, yv: u64| -> f64 {
        let a0 = hp.a_bar + sum as f64;
        let a1 = hp.a_bar + (sum + yv) as f64;
        ln_gamma_shifted(hp.a_bar, sum + yv) - ln_gamma_shifted(hp.a_bar, sum) - a1 * ln_r1 + a0 * ln_r0
            - ln_fact(yv)
    };
    let mut total = 0.0;
    for j in 0..dim {
        for l in j..dim {
            if !pair_active(st.kind, b, j, l) {
                continue;
            }
            let sum = s.map_or(0, |s| s.get(j, l));
            total += add(sum, y.get(j, l));
        }
        if st.kind.is_sparse() && !b[j] {
            total += log_f_add(st.s_hat[j], st.n_hat[j], y.get(j, j), hp.a_hat, hp.b_hat);
        }
    }
    total
}

/// `ln f_k(Y_t)`: change in the collapsed likelihood from adding point `t`
/// (currently unassigned) to existing cluster `k`. Sparse kinds first project
/// `Y_t` onto `b_k`.
pub fn f_existing(t: usize, k: usize, st: &GibbsState) -> f64 {
    let mut y = st.y[t].clone();
    GibbsState::project(st.kind, &mut y, &st.b[k]);
    log_lik_add(st, Some(&st.s[k]), st.n_k[k], &st.b[k], &y)
}

/// `h(b)`: likelihood of point `t` opening a new cluster with activity `b`.
pub fn f_new(t: usize, st: &GibbsState, b: &[bool]) -> f64 {
    let mut y = st.y[t].clone();
    GibbsState::project(st.kind, &mut y, b);
    log_lik_add(st, None, 0, b, &y)
}

/// `P(b_j = 1)` for a new cluster, with `η` integrated out against the
/// activity of the existing clusters.
pub fn new_cluster_prior(st: &GibbsState) -> Vec<f64> {
    let k_len = st.num_clusters() as f64;
    let hp = &st.hp;
    (0..st.dim())
        .map(|j| {
            let c = st.b.iter().filter(|bk| bk[j]).count() as f64;
            (c + hp.a_prime) / (k_len + hp.a_prime + hp.b_prime)
        })
        .collect()
}

/// Monte-Carlo estimate of a new cluster's marginal likelihood.
#[derive(Debug, Clone)]
pub struct NewClusterEstimate {
    /// `ln E_b[h(b)]`.
    pub log_value: f64,
    /// Chain samples of `b` with their `ln h(b)`.
    pub samples: Vec<(Vec<bool>, f64)>,
}

/// Estimates `E_{b ~ p(b | b_old)}[h(b)]` with a Metropolis–Hastings chain
/// started at `b_init`, proposing independent per-coordinate flips.
pub fn f_new_sparse<R: Rng + ?Sized>(
    t: usize,
    st: &GibbsState,
    b_init: &[bool],
    mh: &MhSettings,
    rng: &mut R,
) -> NewClusterEstimate {
    let prior = new_cluster_prior(st);
    let log_target = |b: &[bool]| -> f64 {
        b.iter()
            .zip(&prior)
            .map(|(&bj, &p)| if bj { p.ln() } else { (1.0 - p).ln() })
            .sum()
    };
    let mut current = b_init.to_vec();
    let mut current_lp = log_target(&current);
    let mut samples = Vec::with_capacity(mh.samples);
    for _ in 0..mh.samples {
        if mh.flip_prob > 0.0 {
            let mut proposal = current.clone();
            for bj in proposal.iter_mut() {
                if rng.random::<f64>() < mh.flip_prob {
                    *bj = !*bj;
                }
            }
            let lp = log_target(&proposal);
            if lp >= current_lp || rng.random::<f64>() < (lp - current_lp).exp() {
                current = proposal;
                current_lp = lp;
            }
        }
        // rejected proposals revisit states, so h is memoized per chain
        let h = match samples.iter().rev().find(|(b, _)| *b == current) {
            Some(&(_, h)) => h,
            None => f_new(t, st, &current),
        };
        samples.push((current.clone(), h));
    }
    let hs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    NewClusterEstimate {
        log_value: log_mean_exp(&hs),
        samples,
    }
}

fn new_cluster_candidate<R: Rng + ?Sized>(
    t: usize,
    st: &GibbsState,
    b_old: &[bool],
    rng: &mut R,
) -> NewClusterEstimate {
    if st.kind.is_sparse() {
        f_new_sparse(t, st, b_old, &st.mh.clone(), rng)
    } else {
        let b = vec![true; st.dim()];
        let h = f_new(t, st, &b);
        NewClusterEstimate {
            log_value: h,
            samples: vec![(b, h)],
        }
    }
}

/// Places unassigned point `t` into `choice` (or a new cluster when
/// `choice == K`).
fn assign<R: Rng + ?Sized>(
    t: usize,
    choice: usize,
    candidate: NewClusterEstimate,
    st: &mut GibbsState,
    rng: &mut R,
) {
    let k = if choice == st.num_clusters() {
        let logw: Vec<f64> = candidate.samples.iter().map(|s| s.1).collect();
        let pick = sample_log_categorical(&logw, rng);
        let b = candidate.samples.into_iter().nth(pick).unwrap().0;
        st.open_cluster(b, rng)
    } else {
        choice
    };
    let kind = st.kind;
    let b = st.b[k].clone();
    GibbsState::project(kind, &mut st.y[t], &b);
    st.add_point(t, k);
}

/// Resamples `Z_t` under the Chinese restaurant process prior.
pub fn sample_z_dp<R: Rng + ?Sized>(t: usize, st: &mut GibbsState, rng: &mut R) {
    debug_assert!(!st.kind.is_temporal());
    let (_, b_old) = st.remove_point(t);
    let k_len = st.num_clusters();
    let mut logw = Vec::with_capacity(k_len + 1);
    for k in 0..k_len {
        logw.push((st.n_k[k] as f64).ln() + f_existing(t, k, st));
    }
    let candidate = new_cluster_candidate(t, st, &b_old, rng);
    logw.push(st.hp.alpha.ln() + candidate.log_value);
    let choice = sample_log_categorical(&logw, rng);
    assign(t, choice, candidate, st, rng);
}

/// Log prior weights of `Z_t` under the direct-assignment HDP-HMM, with
/// point `t` already removed. The last entry is the new cluster.
pub(crate) fn hdp_prior_logw(t: usize, st: &GibbsState) -> Vec<f64> {
    let alpha = st.hp.alpha;
    let k_len = st.num_clusters();
    let prev = (t > 0).then(|| st.z[t - 1]);
    let next = (t + 1 < st.len()).then(|| st.z[t + 1]);
    let mut logw = Vec::with_capacity(k_len + 1);
    for k in 0..k_len {
        let incoming = match prev {
            Some(p) => st.n_trans[p][k] as f64 + alpha * st.beta[k],
            None => st.beta[k],
        };
        let outgoing = match next {
            Some(l) => {
                let self_loop = (prev == Some(k) && k == l) as u64 as f64;
                let enter = (prev == Some(k)) as u64 as f64;
                let row: u64 = st.n_trans[k].iter().sum();
                (st.n_trans[k][l] as f64 + alpha * st.beta[l] + self_loop)
                    / (alpha + row as f64 + enter)
            }
            None => 1.0,
        };
        logw.push(incoming.ln() + outgoing.ln());
    }
    let rest = st.beta[k_len];
    let incoming = if prev.is_some() { alpha * rest } else { rest };
    let outgoing = next.map_or(1.0, |l| st.beta[l]);
    logw.push(incoming.ln() + outgoing.ln());
    logw
}

/// Resamples `Z_t` under the HDP-HMM direct-assignment prior.
pub fn sample_z_hdp<R: Rng + ?Sized>(t: usize, st: &mut GibbsState, rng: &mut R) {
    debug_assert!(st.kind.is_temporal());
    let (_, b_old) = st.remove_point(t);
    let mut logw = hdp_prior_logw(t, st);
    let k_len = st.num_clusters();
    for (k, w) in logw.iter_mut().enumerate().take(k_len) {
        *w += f_existing(t, k, st);
    }
    let candidate = new_cluster_candidate(t, st, &b_old, rng);
    logw[k_len] += candidate.log_value;
    let choice = sample_log_categorical(&logw, rng);
    assign(t, choice, candidate, st, rng);
}

/// Dispatches to the CRP or HDP-HMM update by model kind.
pub fn sample_z<R: Rng + ?Sized>(t: usize, st: &mut GibbsState, rng: &mut R) {
    if st.kind.is_temporal() {
        sample_z_hdp(t, st, rng)
    } else {
        sample_z_dp(t, st, rng)
    }
}

/// Log conditional weights of `Y[t][j][l] = v` over its finite support.
pub(crate) fn y_conditional(t: usize, j: usize, l: usize, st: &GibbsState) -> Vec<f64> {
    let k = st.z[t];
    let hp = &st.hp;
    let n = st.n_k[k] as f64;
    let y = &st.y[t];
    let (cur_jl, cur_jj, cur_ll) = (y.get(j, l), y.get(j, j), y.get(l, l));
    let s = &st.s[k];
    let (s_jl, s_jj, s_ll) = (
        s.get(j, l) - cur_jl,
        s.get(j, j) - cur_jj,
        s.get(l, l) - cur_ll,
    );
    let log_rate = (hp.b_bar + n).ln();
    let term = |sum: u64, yv: u64| -> f64 {
        let a = hp.a_bar + (sum + yv) as f64;
        ln_gamma_shifted(hp.a_bar, sum + yv) - a * log_rate - ln_fact(yv)
    };
    let upper = cur_jl + cur_jj.min(cur_ll);
    (0..=upper)
        .map(|v| {
            let jj = cur_jj + cur_jl - v;
            let ll = cur_ll + cur_jl - v;
            term(s_jl, v) + term(s_jj, jj) + term(s_ll, ll)
        })
        .collect()
}

/// Resamples the off-diagonal `Y[t][j][l]` (`j < l`), then resets the two
/// diagonals so both row sums still equal `X_t`.
pub fn sample_y<R: Rng + ?Sized>(t: usize, j: usize, l: usize, st: &mut GibbsState, rng: &mut R) {
    debug_assert!(j < l);
    let k = st.z[t];
    debug_assert!(st.pair_active(k, j, l));
    let logw = y_conditional(t, j, l, st);
    let v = sample_log_categorical(&logw, rng) as u64;
    let cur = st.y[t].get(j, l);
    st.y_updates += 1;
    if v == cur {
        return;
    }
    let y = &mut st.y[t];
    let s = &mut st.s[k];
    // v ≤ cur + min(diagonals), so the diagonals stay non-negative.
    y.set(j, l, v);
    *y.get_mut(j, j) = y.get(j, j) + cur - v;
    *y.get_mut(l, l) = y.get(l, l) + cur - v;
    *s.get_mut(j, l) = s.get(j, l) + v - cur;
    *s.get_mut(j, j) = s.get(j, j) + cur - v;
    *s.get_mut(l, l) = s.get(l, l) + cur - v;
}

/// Log weights `[b_kj = 0, b_kj = 1]` of the activity update.
pub(crate) fn b_conditional(k: usize, j: usize, st: &GibbsState) -> [f64; 2] {
    let hp = &st.hp;
    let dim = st.dim();
    let members = st.members(k);
    let n = st.n_k[k];
    let currently_active = st.b[k][j];
    let others: Vec<usize> = (0..dim).filter(|&l| l != j && st.b[k][l]).collect();

    // Active configuration uses Y as is (an inactive row j is already diagonal).
    let mut act_jl = vec![(0u64, 0.0f64); others.len()];
    let mut act_ll = vec![(0u64, 0.0f64); others.len()];
    let mut act_jj = (0u64, 0.0f64);
    // Inactive configuration: row j's off-diagonal mass folded onto the diagonals.
    let mut off_ll = vec![(0u64, 0.0f64); others.len()];
    let mut off_hat = (0u64, 0.0f64);

    for &t in &members {
        let y = &st.y[t];
        for (i, &l) in others.iter().enumerate() {
            let (yjl, yll) = (y.get(j, l), y.get(l, l));
            act_jl[i].0 += yjl;
            act_jl[i].1 += ln_fact(yjl);
            act_ll[i].0 += yll;
            act_ll[i].1 += ln_fact(yll);
            off_ll[i].0 += yll + yjl;
            off_ll[i].1 += ln_fact(yll + yjl);
        }
        let yjj = y.get(j, j);
        act_jj.0 += yjj;
        act_jj.1 += ln_fact(yjj);
        let xj = st.x[t][j];
        off_hat.0 += xj;
        off_hat.1 += ln_fact(xj);
    }

    let marg = |(sum, lf): (u64, f64)| -> f64 {
        crate::count_models::log_marginal(sum, n, lf, hp.a_bar, hp.b_bar)
    };
    // Noise pool without cluster k's contribution; the other clusters'
    // factorial terms are common to both configurations and dropped.
    let (base_s, base_n) = if currently_active {
        (st.s_hat[j], st.n_hat[j])
    } else {
        (st.s_hat[j] - act_jj.0, st.n_hat[j] - n)
    };
    let hat = |sum: u64, cnt: u64, lf: f64| -> f64 {
        crate::count_models::log_marginal(sum, cnt, lf, hp.a_hat, hp.b_hat)
    };

    let mut active = marg(act_jj) + hat(base_s, base_n, 0.0);
    for i in 0..others.len() {
        active += marg(act_jl[i]) + marg(act_ll[i]);
    }
    let mut inactive = hat(base_s + off_hat.0, base_n + n, off_hat.1);
    for v in &off_ll {
        inactive += marg(*v);
    }

    let c = st
        .b
        .iter()
        .enumerate()
        .filter(|&(kk, bk)| kk != k && bk[j])
        .count() as f64;
    let k_len = st.num_clusters() as f64;
    let prior_on = (c + hp.a_prime).ln();
    let prior_off = (k_len - 1.0 - c + hp.b_prime).ln();
    [prior_off + inactive, prior_on + active]
}

/// Resamples the activity indicator `b[k][j]`; a toggle re-projects the
/// cluster's `Y` matrices and moves the diagonal mass in or out of the
/// noise pool.
pub fn sample_b<R: Rng + ?Sized>(k: usize, j: usize, st: &mut GibbsState, rng: &mut R) {
    debug_assert!(st.kind.is_sparse());
    let logw = b_conditional(k, j, st);
    let new = sample_log_categorical(&logw, rng) == 1;
    if new == st.b[k][j] {
        return;
    }
    let members = st.members(k);
    let n = st.n_k[k];
    let diag: u64 = members.iter().map(|&t| st.x[t][j]).sum();
    if new {
        // Row j is diagonal-only while inactive, so Y and S are unchanged.
        st.s_hat[j] -= diag;
        st.n_hat[j] -= n;
        st.b[k][j] = true;
    } else {
        st.b[k][j] = false;
        let b = st.b[k].clone();
        let kind = st.kind;
        for &t in &members {
            let before = st.y[t].clone();
            GibbsState::project(kind, &mut st.y[t], &b);
            for (a, c, v) in st.y[t].iter_upper() {
                let old = before.get(a, c);
                if old != v {
                    let s = st.s[k].get_mut(a, c);
                    *s = *s + v - old;
                }
            }
        }
        st.s_hat[j] += diag;
        st.n_hat[j] += n;
    }
}

/// Number of tables after seating `n` customers with new-table weight `ab`:
/// `Σ_{i=1..n} Bernoulli(ab / (i - 1 + ab))`.
pub fn draw_table_count<R: Rng + ?Sized>(n: u64, ab: f64, rng: &mut R) -> u64 {
    (1..=n)
        .filter(|&i| rng.random::<f64>() < ab / ((i - 1) as f64 + ab))
        .count() as u64
}

/// Resamples the auxiliary counts `m` and then `β ~ Dir(m_1..m_K, γ)`.
///
/// Temporal kinds draw `m_k` from every source row of the transition counts
/// plus the initial state; the exchangeable kinds use the cluster sizes and
/// the posterior of the mixture weights, `Dir(n_1..n_K, α)`.
pub fn sample_m_beta<R: Rng + ?Sized>(st: &mut GibbsState, rng: &mut R) {
    let k_len = st.num_clusters();
    let alpha = st.hp.alpha;
    let (params, rest) = if st.kind.is_temporal() {
        let mut m = vec![0u64; k_len];
        for row in &st.n_trans {
            for (k, &n) in row.iter().enumerate() {
                m[k] += draw_table_count(n, alpha * st.beta[k], rng);
            }
        }
        m[st.z[0]] += 1;
        st.m_aux = m;
        (st.m_aux.clone(), st.hp.gamma)
    } else {
        st.m_aux = st.n_k.clone();
        (st.m_aux.clone(), alpha)
    };
    let mut w: Vec<f64> = params
        .iter()
        .map(|&m| {
            if m == 0 {
                0.0
            } else {
                Gamma::new(m as f64, 1.0).unwrap().sample(rng)
            }
        })
        .collect();
    w.push(Gamma::new(rest, 1.0).unwrap().sample(rng));
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    // absorb rounding so the weights sum to one
    let drift = 1.0 - w.iter().sum::<f64>();
    w[k_len] += drift;
    st.beta = w;
}
