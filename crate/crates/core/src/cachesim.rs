//! Trace-replay block cache: plain LRU and LRU with model-driven preloading.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{decoder_observe, predict_blocks, AccessMap, DecoderState, FittedModel};
use crate::trace_ingest::{accumulate, BinningConfig, TraceEvent};

/// Fixed-capacity LRU set of block ids.
#[derive(Debug, Clone)]
pub struct Cache {
    capacity: usize,
    clock: u64,
    stamp_of: HashMap<u64, u64>,
    by_stamp: BTreeMap<u64, u64>,
}

impl Cache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "cache capacity must be at least one block");
        Self {
            capacity,
            clock: 0,
            stamp_of: HashMap::with_capacity(capacity),
            by_stamp: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.stamp_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamp_of.is_empty()
    }

    pub fn contains(&self, block: u64) -> bool {
        self.stamp_of.contains_key(&block)
    }

    /// Blocks from least to most recently used.
    pub fn lru_order(&self) -> Vec<u64> {
        self.by_stamp.values().copied().collect()
    }

    /// Makes `block` the most recent entry, evicting the LRU block if a new
    /// entry does not fit. Returns whether it was already resident.
    pub fn touch(&mut self, block: u64) -> bool {
        self.clock += 1;
        let hit = match self.stamp_of.insert(block, self.clock) {
            Some(old) => {
                self.by_stamp.remove(&old);
                true
            }
            None => false,
        };
        self.by_stamp.insert(self.clock, block);
        if self.stamp_of.len() > self.capacity {
            let (_, victim) = self.by_stamp.pop_first().expect("non-empty cache");
            self.stamp_of.remove(&victim);
        }
        hit
    }
}

/// Result of one simulated replay.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub hits: u64,
    pub misses: u64,
    /// Blocks inserted at each slice boundary (empty for the baseline).
    pub preload_volumes: Vec<usize>,
    /// Predicted cluster at each slice boundary.
    pub predicted: Vec<usize>,
    pub wall_clock: f64,
    /// Hit (`true`) or miss per block access, when recording was requested.
    pub outcomes: Option<Vec<bool>>,
}

impl SimReport {
    pub fn hitrate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }

    pub fn accesses(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn summary(&self) -> String {
        format!(
            "hits {} misses {} hitrate {:.4} preloaded {} blocks over {} slices ({:.2}s)",
            self.hits,
            self.misses,
            self.hitrate(),
            self.preload_volumes.iter().sum::<usize>(),
            self.preload_volumes.len(),
            self.wall_clock
        )
    }

    pub fn write_csv<W: Write>(&self, label: &str, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let rows = [
            ["run", "hits", "misses", "hitrate", "preloaded_blocks", "wall_clock_secs"].map(String::from),
            [
                label.to_string(),
                self.hits.to_string(),
                self.misses.to_string(),
                format!("{:.6}", self.hitrate()),
                self.preload_volumes.iter().sum::<usize>().to_string(),
                format!("{:.3}", self.wall_clock),
            ],
        ];
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per slice boundary: `boundary,predicted_cluster,preloaded_blocks`.
    pub fn write_preload_log<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["boundary", "predicted_cluster", "preloaded_blocks"])
            .map_err(csv_err)?;
        for (i, (k, v)) in self.predicted.iter().zip(&self.preload_volumes).enumerate() {
            w.write_record([i.to_string(), k.to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `ceil(fraction · distinct blocks)`, at least one block.
pub fn capacity_from_trace(events: &[TraceEvent], block_size: u64, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "cache fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let distinct: BTreeSet<u64> = events.iter().flat_map(|e| e.block_ids(block_size)).collect();
    Ok(((fraction * distinct.len() as f64).ceil() as usize).max(1))
}

fn replay_reads(
    cache: &mut Cache,
    event: &TraceEvent,
    block_size: u64,
    report: &mut SimReport,
) {
    if !event.is_read() {
        return;
    }
    for block in event.block_ids(block_size) {
        let hit = cache.touch(block);
        if hit {
            report.hits += 1;
        } else {
            report.misses += 1;
        }
        if let Some(o) = report.outcomes.as_mut() {
            o.push(hit);
        }
    }
}

/// Plain LRU replay of the read requests.
pub fn simulate_baseline(
    events: &[TraceEvent],
    block_size: u64,
    capacity: usize,
    record: bool,
) -> SimReport {
    let start = Instant::now();
    let mut cache = Cache::new(capacity);
    let mut report = SimReport {
        outcomes: record.then(Vec::new),
        ..SimReport::default()
    };
    for e in events {
        replay_reads(&mut cache, e, block_size, &mut report);
    }
    report.wall_clock = start.elapsed().as_secs_f64();
    report
}

/// LRU replay with preloading: before the first slice and after every
/// completed slice, the decoder absorbs that slice's count vector and the
/// blocks of the predicted cluster are inserted in ascending id order.
/// Preload insertions count neither as hits nor as misses.
pub fn simulate_preloading(
    events: &[TraceEvent],
    model: &FittedModel,
    access_map: &AccessMap,
    binning: &BinningConfig,
    capacity: usize,
    record: bool,
) -> Result<SimReport> {
    if model.dim() != binning.m {
        return Err(Error::Config(format!(
            "model has {} dimensions but binning uses {} bins",
            model.dim(),
            binning.m
        )));
    }
    let start = Instant::now();
    let mut cache = Cache::new(capacity);
    let mut report = SimReport {
        outcomes: record.then(Vec::new),
        ..SimReport::default()
    };
    let Some(first) = events.first() else {
        report.wall_clock = start.elapsed().as_secs_f64();
        return Ok(report);
    };
    let mut decoder = DecoderState::new(model);

    let preload = |decoder: &DecoderState, cache: &mut Cache, report: &mut SimReport| {
        let k = crate::predictor::decoder_predict_next(decoder, model);
        let blocks = predict_blocks(decoder, model, access_map);
        for &b in blocks.into_iter().flatten() {
            cache.touch(b);
        }
        report.predicted.push(k);
        report.preload_volumes.push(blocks.map_or(0, BTreeSet::len));
    };

    let mut slice = binning.slice_of(first.timestamp);
    let mut x = vec![0u64; binning.m];
    let mut a = BTreeSet::new();
    preload(&decoder, &mut cache, &mut report);
    for e in events {
        let s = binning.slice_of(e.timestamp);
        while slice < s {
            decoder_observe(&mut decoder, model, &x);
            x.iter_mut().for_each(|v| *v = 0);
            a.clear();
            preload(&decoder, &mut cache, &mut report);
            slice += 1;
        }
        if binning.accepts(e) {
            accumulate(binning, e, &mut x, &mut a);
        }
        replay_reads(&mut cache, e, binning.block_size, &mut report);
    }
    report.wall_clock = start.elapsed().as_secs_f64();
    Ok(report)
}
