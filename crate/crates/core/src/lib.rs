//! Mining block I/O traces with sparse non-parametric mixtures of
//! Multivariate Poisson distributions, and using the fitted models to
//! preload a simulated cache.

pub mod artifact;
pub mod cachesim;
pub mod count_models;
pub mod error;
pub mod gibbs;
pub mod metrics;
pub mod pipeline;
pub mod predictor;
pub mod synth;
pub mod trace_ingest;

pub use cachesim::{capacity_from_trace, simulate_baseline, simulate_preloading, Cache, SimReport};
pub use count_models::{Hyperparams, MvpParams, SmvpParams, SymMatrix};
pub use error::{Error, Result};
pub use gibbs::{
    heldout_loglik, run_chains, run_gibbs, run_gibbs_from, Diagnostics, FitConfig, FitOutput,
    GibbsState, MhSettings, ModelKind,
};
pub use predictor::{
    build_access_map, decoder_observe, decoder_predict_next, estimate_params, predict_blocks,
    viterbi, viterbi_from_logs, AccessMap, DecoderState, FittedModel, ModelBundle,
};
pub use trace_ingest::{
    aggregate, parse_trace, split_learn_operate, BinningConfig, CountMode, CountVectorSequence,
    Op, TraceEvent, TraceFormat,
};
