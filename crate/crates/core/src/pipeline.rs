//! Glue for the learn-then-operate workflow on raw events.

use crate::count_models::Hyperparams;
use crate::error::{Error, Result};
use crate::gibbs::{run_chains, FitConfig, FitOutput, ModelKind};
use crate::predictor::{build_access_map, estimate_params, ModelBundle};
use crate::trace_ingest::{aggregate, learning_len, BinningConfig, CountVectorSequence, TraceEvent};

/// Events cut at a slice boundary.
#[derive(Debug, Clone)]
pub struct EventSplit {
    pub learn: Vec<TraceEvent>,
    pub operate: Vec<TraceEvent>,
    /// Number of learning slices.
    pub learn_slices: usize,
}

/// Splits `events` into the first `ceil(fraction · T)` slices and the rest,
/// where `T` counts slices up to the last event.
pub fn split_events(events: &[TraceEvent], nu: f64, fraction: f64) -> Result<EventSplit> {
    if events.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let last = events.iter().map(|e| e.timestamp).fold(0.0, f64::max);
    let total = (last / nu).floor() as usize + 1;
    let n = learning_len(total, fraction)?;
    let boundary = n as f64 * nu;
    let (learn, operate) = events.iter().cloned().partition(|e| e.timestamp < boundary);
    Ok(EventSplit {
        learn,
        operate,
        learn_slices: n,
    })
}

/// Aggregates the learning events over their own address range.
pub fn learning_sequence(learn: &[TraceEvent], binning: &BinningConfig) -> Result<CountVectorSequence> {
    let binning = binning.clone().with_range_of(learn);
    binning.validate()?;
    let seq = aggregate(learn, &binning);
    if seq.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(seq)
}

/// Fits `kind` and packages the point estimate with the access map of the
/// same sample.
pub fn fit_bundle(
    seq: &CountVectorSequence,
    kind: ModelKind,
    hp: Hyperparams,
    cfg: &FitConfig,
    chains: usize,
) -> Result<(ModelBundle, FitOutput)> {
    let out = run_chains(seq, kind, hp, cfg, chains)?;
    let model = estimate_params(&out.samples)?;
    let access_map = build_access_map(&out.final_sample().z, &seq.a);
    let bundle = ModelBundle {
        model,
        access_map,
        binning: seq.config.clone(),
    };
    Ok((bundle, out))
}
