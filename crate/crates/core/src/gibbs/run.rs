use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::GibbsState;
use super::updates::{sample_b, sample_m_beta, sample_y, sample_z};
use super::{FitConfig, ModelKind};
use crate::count_models::Hyperparams;
use crate::error::{Error, Result};
use crate::trace_ingest::CountVectorSequence;

/// Per-sweep traces recorded by a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub joint: Vec<f64>,
    pub num_clusters: Vec<usize>,
    /// Seconds since the start of the run, at the end of each sweep.
    pub wall_clock: Vec<f64>,
    /// `Y` entries resampled in each sweep.
    pub y_updates: Vec<u64>,
    /// Set when the wall-clock cap stopped the run before burn-in finished.
    pub partial: bool,
}

impl Diagnostics {
    pub fn sweeps(&self) -> usize {
        self.joint.len()
    }

    /// Writes `sweep,joint_log_density,num_clusters,wall_clock_secs` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sweep", "joint_log_density", "num_clusters", "wall_clock_secs"])
            .map_err(csv_err)?;
        for i in 0..self.sweeps() {
            w.write_record([
                (i + 1).to_string(),
                self.joint[i].to_string(),
                self.num_clusters[i].to_string(),
                format!("{:.6}", self.wall_clock[i]),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    /// Post-burn-in thinned states, oldest first.
    pub samples: Vec<GibbsState>,
    pub diagnostics: Diagnostics,
}

impl FitOutput {
    /// The retained sample with the highest joint log-density.
    pub fn map_sample(&self) -> &GibbsState {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, s) in self.samples.iter().enumerate() {
            let v = s.joint_log_density();
            if v > best_v {
                best = i;
                best_v = v;
            }
        }
        &self.samples[best]
    }

    pub fn final_sample(&self) -> &GibbsState {
        self.samples.last().expect("fit output always holds a sample")
    }
}

/// One full sweep: `Z_t` then its `Y` entries for every `t`, then every
/// `b[k][j]`, then `m` and `β`.
pub fn sweep<R: rand::Rng + ?Sized>(st: &mut GibbsState, rng: &mut R) {
    let dim = st.dim();
    let independent = st.kind.is_independent();
    for t in 0..st.len() {
        sample_z(t, st, rng);
        if independent {
            continue;
        }
        for j in 0..dim {
            for l in (j + 1)..dim {
                if st.pair_active(st.z[t], j, l) {
                    sample_y(t, j, l, st, rng);
                }
            }
        }
    }
    if st.kind.is_sparse() {
        for j in 0..dim {
            for k in 0..st.num_clusters() {
                sample_b(k, j, st, rng);
            }
        }
    }
    sample_m_beta(st, rng);
}

/// Fits `kind` to `data` from the single-cluster initial state.
pub fn run_gibbs(
    data: &CountVectorSequence,
    kind: ModelKind,
    hp: Hyperparams,
    cfg: &FitConfig,
) -> Result<FitOutput> {
    if data.is_empty() {
        return Err(Error::EmptyTrace);
    }
    hp.validate()?;
    run_gibbs_from(GibbsState::init(data, kind, hp), cfg)
}

/// Continues sampling from `state` (for instance a loaded checkpoint).
pub fn run_gibbs_from(mut state: GibbsState, cfg: &FitConfig) -> Result<FitOutput> {
    cfg.validate()?;
    state.mh = cfg.mh;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();
    let mut diag = Diagnostics::default();
    let mut samples = Vec::new();
    for s in 1..=cfg.iterations {
        let before = state.y_updates;
        sweep(&mut state, &mut rng);
        let elapsed = start.elapsed().as_secs_f64();
        diag.joint.push(state.joint_log_density());
        diag.num_clusters.push(state.num_clusters());
        diag.wall_clock.push(elapsed);
        diag.y_updates.push(state.y_updates - before);
        if s > cfg.burn_in && (s - cfg.burn_in) % cfg.thinning == 0 {
            samples.push(state.clone());
        }
        if cfg.wall_clock_limit.is_some_and(|limit| elapsed >= limit) && s < cfg.iterations {
            diag.partial = s < cfg.burn_in;
            break;
        }
    }
    if samples.last() != Some(&state) {
        samples.push(state);
    }
    Ok(FitOutput {
        samples,
        diagnostics: diag,
    })
}

/// Runs `chains` independent chains on scoped threads (seeds `seed + i`) and
/// keeps the one whose final joint log-density is highest.
pub fn run_chains(
    data: &CountVectorSequence,
    kind: ModelKind,
    hp: Hyperparams,
    cfg: &FitConfig,
    chains: usize,
) -> Result<FitOutput> {
    if chains <= 1 {
        return run_gibbs(data, kind, hp, cfg);
    }
    let outputs: Vec<Result<FitOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|i| {
                let cfg = FitConfig {
                    seed: cfg.seed.wrapping_add(i as u64),
                    ..cfg.clone()
                };
                scope.spawn(move || run_gibbs(data, kind, hp, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    });
    let mut best: Option<(f64, FitOutput)> = None;
    for out in outputs {
        let out = out?;
        let v = out.final_sample().joint_log_density();
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, out));
        }
    }
    Ok(best.expect("at least one chain").1)
}
