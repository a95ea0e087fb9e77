//! Collapsed Gibbs samplers for the six DP / HDP-HMM mixtures of
//! (sparse) Multivariate Poisson distributions.
//!
//! The rates `Λ`, `λ̂`, the activity prior `η` and the transition rows `π`
//! are all integrated out; the sampler state holds cluster assignments `Z`,
//! latent MVP matrices `Y`, activity indicators `b`, stick weights `β` and
//! integer sufficient statistics maintained incrementally.

mod heldout;
mod run;
mod state;
mod updates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use heldout::heldout_loglik;
pub use run::{run_chains, run_gibbs, run_gibbs_from, sweep, Diagnostics, FitOutput};
pub use state::{GibbsState, StatsSnapshot, UNASSIGNED};
pub use updates::{
    draw_table_count, f_existing, f_new, f_new_sparse, new_cluster_prior, sample_b,
    sample_m_beta, sample_y, sample_z, sample_z_dp, sample_z_hdp, NewClusterEstimate,
};

/// The six model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// DP mixture of independent Poissons.
    DpMip,
    /// DP mixture of full-covariance MVPs.
    DpMmvp,
    /// HDP-HMM with independent Poisson emissions.
    HmmDpMip,
    /// HDP-HMM with full MVP emissions.
    HmmDpMmvp,
    /// DP mixture of sparse MVPs.
    SparseDpMmvp,
    /// HDP-HMM with sparse MVP emissions.
    SparseHmmDpMmvp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::DpMip,
        ModelKind::DpMmvp,
        ModelKind::HmmDpMip,
        ModelKind::HmmDpMmvp,
        ModelKind::SparseDpMmvp,
        ModelKind::SparseHmmDpMmvp,
    ];

    pub fn is_temporal(self) -> bool {
        matches!(
            self,
            ModelKind::HmmDpMip | ModelKind::HmmDpMmvp | ModelKind::SparseHmmDpMmvp
        )
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, ModelKind::SparseDpMmvp | ModelKind::SparseHmmDpMmvp)
    }

    /// Diagonal-only `Λ` (independent Poisson emissions).
    pub fn is_independent(self) -> bool {
        matches!(self, ModelKind::DpMip | ModelKind::HmmDpMip)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DpMip => "dp-mip",
            ModelKind::DpMmvp => "dp-mmvp",
            ModelKind::HmmDpMip => "hmm-dp-mip",
            ModelKind::HmmDpMmvp => "hmm-dp-mmvp",
            ModelKind::SparseDpMmvp => "sparse-dp-mmvp",
            ModelKind::SparseHmmDpMmvp => "sparse-hmm-dp-mmvp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown model kind '{s}'")))
    }
}

/// Settings of the Metropolis–Hastings estimate of the new-cluster marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhSettings {
    /// Number of chain samples `S`.
    pub samples: usize,
    /// Per-coordinate flip probability of the proposal.
    pub flip_prob: f64,
}

impl Default for MhSettings {
    fn default() -> Self {
        Self {
            samples: 20,
            flip_prob: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Wall-clock cap in seconds.
    pub wall_clock_limit: Option<f64>,
    pub mh: MhSettings,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            burn_in: 100,
            thinning: 10,
            wall_clock_limit: Some(4.0 * 3600.0),
            mh: MhSettings::default(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be >= 1".into()));
        }
        if self.mh.samples == 0 {
            return Err(Error::Config("MH sample count must be >= 1".into()));
        }
        if !(self.mh.flip_prob > 0.0 && self.mh.flip_prob < 1.0) {
            return Err(Error::Config(format!(
                "MH flip probability must lie in (0, 1), got {}",
                self.mh.flip_prob
            )));
        }
        if let Some(limit) = self.wall_clock_limit {
            if !(limit > 0.0) {
                return Err(Error::Config("wall-clock limit must be > 0".into()));
            }
        }
        Ok(())
    }
}
