use std::path::Path;

use clap::Args;
use serde::Deserialize;
use tracemix_core::{BinningConfig, CountMode, FitConfig, Hyperparams, MhSettings, ModelKind, TraceFormat};

use crate::CliError;

/// Settings shared by every subcommand. Loaded from TOML, then overridden
/// by flags.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `simple` or `msr`.
    pub format: String,
    pub bins: usize,
    pub slice_secs: f64,
    pub block_size: u64,
    /// Count one increment per covered block instead of per request.
    pub per_block: bool,
    pub include_writes: bool,
    pub split: f64,
    pub kind: String,
    pub iters: usize,
    pub burn_in: Option<usize>,
    pub thinning: usize,
    pub wall_clock_secs: f64,
    pub seed: u64,
    pub chains: usize,
    pub cache_frac: f64,
    pub mh_samples: usize,
    pub mh_flip_prob: f64,
    pub hyper: Hyperparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            format: "simple".into(),
            bins: 10,
            slice_secs: 30.0,
            block_size: tracemix_core::trace_ingest::DEFAULT_BLOCK_SIZE,
            per_block: false,
            include_writes: false,
            split: 0.5,
            kind: ModelKind::SparseHmmDpMmvp.name().into(),
            iters: fit.iterations,
            burn_in: None,
            thinning: fit.thinning,
            wall_clock_secs: 4.0 * 3600.0,
            seed: 0,
            chains: 1,
            cache_frac: 0.05,
            mh_samples: MhSettings::default().samples,
            mh_flip_prob: MhSettings::default().flip_prob,
            hyper: Hyperparams::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Trace layout: simple or msr.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Number of address bins M.
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Slice length in seconds.
    #[arg(long, global = true)]
    pub slice_secs: Option<f64>,
    #[arg(long, global = true)]
    pub block_size: Option<u64>,
    /// Count every covered block rather than every request.
    #[arg(long, global = true)]
    pub per_block: bool,
    #[arg(long, global = true)]
    pub include_writes: bool,
    /// Fraction of slices used for learning.
    #[arg(long, global = true)]
    pub split: Option<f64>,
    /// Model variant, e.g. sparse-hmm-dp-mmvp.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// Gibbs sweeps.
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    #[arg(long, global = true)]
    pub burn_in: Option<usize>,
    #[arg(long, global = true)]
    pub thinning: Option<usize>,
    #[arg(long, global = true)]
    pub wall_clock_secs: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Independent chains run in parallel; the best final state is kept.
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    /// Cache capacity as a fraction of the distinct blocks in the trace.
    #[arg(long, global = true)]
    pub cache_frac: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = ov.$f.clone() { cfg.$f = v; } )* };
        }
        take!(format, bins, slice_secs, block_size, split, kind, iters, thinning, wall_clock_secs, seed, chains, cache_frac);
        if ov.burn_in.is_some() {
            cfg.burn_in = ov.burn_in;
        }
        cfg.per_block |= ov.per_block;
        cfg.include_writes |= ov.include_writes;
        Ok(cfg)
    }

    pub fn trace_format(&self) -> Result<TraceFormat, CliError> {
        Ok(TraceFormat::from_id(&self.format)?)
    }

    pub fn binning(&self) -> Result<BinningConfig, CliError> {
        let b = BinningConfig {
            m: self.bins,
            nu: self.slice_secs,
            block_size: self.block_size,
            count_mode: if self.per_block { CountMode::PerBlock } else { CountMode::PerRequest },
            include_writes: self.include_writes,
            ..BinningConfig::default()
        };
        b.validate()?;
        Ok(b)
    }

    pub fn model_kind(&self) -> Result<ModelKind, CliError> {
        Ok(self.kind.parse()?)
    }

    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        let cfg = FitConfig {
            iterations: self.iters,
            burn_in: self.burn_in.unwrap_or(self.iters / 2),
            thinning: self.thinning,
            wall_clock_limit: Some(self.wall_clock_secs),
            mh: MhSettings {
                samples: self.mh_samples,
                flip_prob: self.mh_flip_prob,
            },
            seed: self.seed,
        };
        cfg.validate()?;
        self.hyper.validate()?;
        if self.chains == 0 {
            return Err(CliError::Config("--chains must be >= 1".into()));
        }
        Ok(cfg)
    }
}
