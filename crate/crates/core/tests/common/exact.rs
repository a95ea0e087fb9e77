//! Exact-enumeration references for single-variable updates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracemix_core::gibbs::{sample_b, sample_y, sample_z_dp, sample_z_hdp};
use tracemix_core::{GibbsState, Hyperparams, ModelKind};

use super::{build_state, max_gap, normalize_log, Config};

pub fn x3() -> Vec<Vec<u64>> {
    vec![vec![2, 1], vec![1, 2], vec![3, 0]]
}

pub fn y3() -> Vec<Vec<Vec<u64>>> {
    vec![
        vec![vec![1, 1], vec![1, 0]],
        vec![vec![0, 1], vec![1, 1]],
        vec![vec![3, 0], vec![0, 0]],
    ]
}

pub fn fixture(kind: ModelKind, z: &[usize]) -> GibbsState {
    let k_len = z.iter().max().unwrap() + 1;
    let hp = Hyperparams::default();
    let y = if kind.is_independent() {
        super::diagonal_y(&x3())
    } else {
        y3()
    };
    let mut beta = vec![0.6 / k_len as f64; k_len];
    beta.push(0.4);
    build_state(kind, hp, &x3(), &y, z, &vec![vec![true; 2]; k_len], &beta)
}

/// Exact conditional of `Z_t` from joint densities of every completion.
pub fn exact_z(st: &GibbsState, t: usize) -> Vec<f64> {
    let mut removed = st.clone();
    removed.remove_point(t);
    let base = Config::from_state(&removed);
    let k_len = removed.num_clusters();
    let logw: Vec<f64> = (0..=k_len)
        .map(|k| {
            let mut c = base.clone();
            if k == k_len {
                c.b.push(vec![true; 2]);
            }
            c.z[t] = k;
            c.joint()
        })
        .collect();
    normalize_log(&logw)
}

/// Largest per-outcome gap of `sample_z_*` against enumeration over every `t`.
pub fn z_gap(kind: ModelKind, z: &[usize], draws: usize, seed: u64) -> f64 {
    let st = fixture(kind, z);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for t in 0..st.len() {
        let exact = exact_z(&st, t);
        let mut counts = vec![0u64; exact.len()];
        for _ in 0..draws {
            let mut s = st.clone();
            if kind.is_temporal() {
                sample_z_hdp(t, &mut s, &mut rng);
            } else {
                sample_z_dp(t, &mut s, &mut rng);
            }
            counts[s.z[t]] += 1;
        }
        worst = worst.max(max_gap(&counts, &exact));
    }
    worst
}

/// Same for `sample_y` on the pair `(0, 1)` of the first two points.
pub fn y_gap(kind: ModelKind, draws: usize, seed: u64) -> f64 {
    let st = fixture(kind, &[0, 0, 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for t in 0..2 {
        let exact = exact_y(&st, t);
        let mut counts = vec![0u64; exact.len()];
        for _ in 0..draws {
            let mut s = st.clone();
            sample_y(t, 0, 1, &mut s, &mut rng);
            counts[s.y[t].get(0, 1) as usize] += 1;
        }
        worst = worst.max(max_gap(&counts, &exact));
    }
    worst
}

/// Same for `sample_b` over every `(k, j)` of a two-cluster sparse fixture.
pub fn b_gap(kind: ModelKind, draws: usize, seed: u64) -> f64 {
    let b = vec![vec![true, true], vec![true, false]];
    let st = build_state(kind, Hyperparams::default(), &x3(), &y3(), &[0, 0, 1], &b, &[0.3, 0.3, 0.4]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        for j in 0..2 {
            let exact = exact_b(&st, k, j);
            let mut counts = [0u64; 2];
            for _ in 0..draws {
                let mut s = st.clone();
                sample_b(k, j, &mut s, &mut rng);
                counts[s.b[k][j] as usize] += 1;
            }
            worst = worst.max(max_gap(&counts, &exact));
        }
    }
    worst
}

pub fn exact_y(st: &GibbsState, t: usize) -> Vec<f64> {
    let base = Config::from_state(st);
    let (yjl, yjj, yll) = (base.y[t][0][1], base.y[t][0][0], base.y[t][1][1]);
    let upper = yjl + yjj.min(yll);
    let logw: Vec<f64> = (0..=upper)
        .map(|v| {
            let mut c = base.clone();
            c.y[t][0][1] = v;
            c.y[t][1][0] = v;
            c.y[t][0][0] = yjj + yjl - v;
            c.y[t][1][1] = yll + yjl - v;
            c.joint()
        })
        .collect();
    normalize_log(&logw)
}

pub fn exact_b(st: &GibbsState, k: usize, j: usize) -> Vec<f64> {
    let base = Config::from_state(st);
    let logw: Vec<f64> = [false, true]
        .iter()
        .map(|&on| {
            let mut c = base.clone();
            c.b[k][j] = on;
            for t in 0..c.z.len() {
                if c.z[t] == k {
                    c.project(t);
                }
            }
            c.joint()
        })
        .collect();
    normalize_log(&logw)
}

