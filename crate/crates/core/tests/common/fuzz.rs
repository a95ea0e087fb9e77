//! Sweeps with an invariant check after every single update.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracemix_core::gibbs::{sample_b, sample_m_beta, sample_y, sample_z};
use tracemix_core::{GibbsState, Hyperparams, ModelKind};

/// Small correlated count data with a few silent dimensions.
pub fn fuzz_data(t_len: usize, dim: usize, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..t_len)
        .map(|t| {
            let phase = (t / 5) % 3;
            (0..dim)
                .map(|j| {
                    if j % 3 == phase {
                        rng.random_range(0..8)
                    } else if rng.random::<f64>() < 0.1 {
                        1
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

fn check(st: &GibbsState, what: &str, sweep: usize) -> Result<(), String> {
    st.check_invariants()
        .map_err(|e| format!("sweep {sweep}, after {what}: {e}"))?;
    for (t, y) in st.y.iter().enumerate() {
        for j in 0..st.dim() {
            for l in 0..st.dim() {
                if y.get(j, l) != y.get(l, j) {
                    return Err(format!("Y[{t}] asymmetric at sweep {sweep}"));
                }
            }
        }
    }
    Ok(())
}

/// Runs `sweeps` full sweeps in the sampler's update order, checking every
/// invariant after each update. Returns the number of checks and the joint
/// density trace.
pub fn fuzz_invariants(kind: ModelKind, sweeps: usize, seed: u64) -> Result<(usize, Vec<f64>), String> {
    let x = fuzz_data(30, 4, seed);
    let mut st = GibbsState::init_from_counts(&x, kind, Hyperparams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut joint = Vec::with_capacity(sweeps);
    check(&st, "init", 0)?;
    for s in 1..=sweeps {
        for t in 0..st.len() {
            sample_z(t, &mut st, &mut rng);
            check(&st, "z", s)?;
            checks += 1;
            if kind.is_independent() {
                continue;
            }
            for j in 0..st.dim() {
                for l in (j + 1)..st.dim() {
                    if st.pair_active(st.z[t], j, l) {
                        sample_y(t, j, l, &mut st, &mut rng);
                        check(&st, "y", s)?;
                        checks += 1;
                    }
                }
            }
        }
        if kind.is_sparse() {
            for j in 0..st.dim() {
                for k in 0..st.num_clusters() {
                    sample_b(k, j, &mut st, &mut rng);
                    check(&st, "b", s)?;
                    checks += 1;
                }
            }
        }
        sample_m_beta(&mut st, &mut rng);
        check(&st, "beta", s)?;
        checks += 1;
        let total: f64 = st.beta.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(format!("beta sums to {total}"));
        }
        let j = st.joint_log_density();
        if !j.is_finite() {
            return Err(format!("joint density {j} at sweep {s}"));
        }
        joint.push(j);
    }
    Ok((checks, joint))
}
