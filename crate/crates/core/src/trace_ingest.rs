//! Block I/O trace parsing and aggregation into count-vector sequences.
//!
//! A trace is cut into slices of `nu` seconds and the LBA range into `M`
//! equal bins. Slice `t` becomes the histogram `X[t]` of request start
//! offsets over the bins, together with the set `A[t]` of every block the
//! slice's requests touched.

use std::collections::BTreeSet;
use std::io::Read;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BLOCK_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Seconds since trace start.
    pub timestamp: f64,
    pub op: Op,
    /// Byte offset of the request.
    pub offset: u64,
    /// Request length in bytes, always > 0.
    pub size: u64,
}

impl TraceEvent {
    /// Block ids covered by `[offset, offset + size)`.
    pub fn block_ids(&self, block_size: u64) -> Range<u64> {
        let first = self.offset / block_size;
        let last = (self.offset + self.size).div_ceil(block_size);
        first..last
    }

    pub fn is_read(&self) -> bool {
        self.op == Op::Read
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimestampUnit {
    Seconds,
    /// Windows FILETIME ticks (100 ns); rebased to the first event.
    FileTime,
}

/// Column layout of a CSV trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFormat {
    pub timestamp_col: usize,
    pub op_col: usize,
    pub offset_col: usize,
    pub size_col: usize,
    pub timestamp_unit: TimestampUnit,
}

impl TraceFormat {
    /// MSR Cambridge layout:
    /// `Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime`.
    pub const MSR: TraceFormat = TraceFormat {
        timestamp_col: 0,
        op_col: 3,
        offset_col: 4,
        size_col: 5,
        timestamp_unit: TimestampUnit::FileTime,
    };

    /// `timestamp_secs,op,offset,size`, as written by the synthetic generator.
    pub const SIMPLE: TraceFormat = TraceFormat {
        timestamp_col: 0,
        op_col: 1,
        offset_col: 2,
        size_col: 3,
        timestamp_unit: TimestampUnit::Seconds,
    };

    pub fn from_id(id: &str) -> Result<Self> {
        match id.to_ascii_lowercase().as_str() {
            "msr" => Ok(Self::MSR),
            "simple" => Ok(Self::SIMPLE),
            other => Err(Error::Config(format!("unknown trace format '{other}'"))),
        }
    }
}

#[derive(Clone, Copy)]
enum RawTime {
    Secs(f64),
    Ticks(u64),
}

fn parse_op(s: &str) -> Option<Op> {
    match s.trim().to_ascii_lowercase().as_str() {
        "read" | "r" => Some(Op::Read),
        "write" | "w" => Some(Op::Write),
        _ => None,
    }
}

/// Parses a CSV trace. Lines starting with `#` are comments.
///
/// Events come back sorted by timestamp (stable); writes are kept and
/// filtered downstream.
pub fn parse_trace<R: Read>(input: R, format: &TraceFormat) -> Result<Vec<TraceEvent>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);

    let needed = [
        format.timestamp_col,
        format.op_col,
        format.offset_col,
        format.size_col,
    ]
    .into_iter()
    .max()
    .unwrap_or(0);

    let mut raw: Vec<(RawTime, Op, u64, u64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |msg: String| Error::Parse { line, msg };
        if record.len() <= needed {
            return Err(err(format!(
                "expected at least {} columns, found {}",
                needed + 1,
                record.len()
            )));
        }
        let ts_field = &record[format.timestamp_col];
        let timestamp = match format.timestamp_unit {
            TimestampUnit::Seconds => {
                let secs: f64 = ts_field
                    .parse()
                    .map_err(|_| err(format!("bad timestamp '{ts_field}'")))?;
                if !secs.is_finite() || secs < 0.0 {
                    return Err(err(format!("timestamp must be >= 0, got {ts_field}")));
                }
                RawTime::Secs(secs)
            }
            TimestampUnit::FileTime => RawTime::Ticks(
                ts_field
                    .parse::<u64>()
                    .map_err(|_| err(format!("bad timestamp '{ts_field}'")))?,
            ),
        };
        let op_field = &record[format.op_col];
        let op = parse_op(op_field).ok_or_else(|| err(format!("bad op '{op_field}'")))?;
        let offset_field = &record[format.offset_col];
        let offset: u64 = offset_field
            .parse()
            .map_err(|_| err(format!("bad offset '{offset_field}'")))?;
        let size_field = &record[format.size_col];
        let size: u64 = size_field
            .parse()
            .map_err(|_| err(format!("bad size '{size_field}'")))?;
        if size == 0 {
            return Err(err("request size must be > 0".into()));
        }
        raw.push((timestamp, op, offset, size));
    }

    if raw.is_empty() {
        return Err(Error::EmptyTrace);
    }

    // Ticks are rebased in integer arithmetic; as f64 they would lose
    // microseconds at present-day FILETIME magnitudes.
    let base = raw
        .iter()
        .filter_map(|r| match r.0 {
            RawTime::Ticks(t) => Some(t),
            RawTime::Secs(_) => None,
        })
        .min()
        .unwrap_or(0);
    let mut events: Vec<TraceEvent> = raw
        .into_iter()
        .map(|(ts, op, offset, size)| TraceEvent {
            timestamp: match ts {
                RawTime::Secs(v) => v,
                RawTime::Ticks(t) => (t - base) as f64 * 1e-7,
            },
            op,
            offset,
            size,
        })
        .collect();
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(events)
}

/// Writes events in the [`TraceFormat::SIMPLE`] layout.
pub fn write_simple_trace<W: std::io::Write>(events: &[TraceEvent], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for e in events {
        let op = match e.op {
            Op::Read => "Read",
            Op::Write => "Write",
        };
        w.write_record([
            format!("{:.6}", e.timestamp),
            op.to_string(),
            e.offset.to_string(),
            e.size.to_string(),
        ])
        .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// How a request contributes to its slice's count vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CountMode {
    /// One increment in the bin of the starting offset.
    #[default]
    PerRequest,
    /// One increment per covered block, each in its own bin.
    PerBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    /// Number of bins `M`.
    pub m: usize,
    /// Partitioned byte range `[lba_lo, lba_hi)`.
    pub lba_lo: u64,
    pub lba_hi: u64,
    /// Slice length in seconds.
    pub nu: f64,
    pub block_size: u64,
    pub count_mode: CountMode,
    pub include_writes: bool,
}

impl BinningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("bin count must be >= 1".into()));
        }
        if self.lba_hi <= self.lba_lo {
            return Err(Error::Config(format!(
                "empty LBA range [{}, {})",
                self.lba_lo, self.lba_hi
            )));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::Config(format!("slice length must be > 0, got {}", self.nu)));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block size must be > 0".into()));
        }
        Ok(())
    }

    /// Range spanning the offsets of `events` (after the write filter).
    pub fn with_range_of(mut self, events: &[TraceEvent]) -> Self {
        let offsets = events
            .iter()
            .filter(|e| self.include_writes || e.is_read())
            .map(|e| e.offset);
        let (lo, hi) = offsets.fold((u64::MAX, 0u64), |(lo, hi), o| (lo.min(o), hi.max(o)));
        if lo == u64::MAX {
            self.lba_lo = 0;
            self.lba_hi = 1;
        } else {
            self.lba_lo = lo;
            self.lba_hi = hi + 1;
        }
        self
    }

    /// Bin of a byte address; out-of-range addresses clamp to the edge bins.
    #[inline]
    pub fn bin_of(&self, offset: u64) -> usize {
        if offset <= self.lba_lo {
            return 0;
        }
        let width = (self.lba_hi - self.lba_lo) as u128;
        let rel = (offset - self.lba_lo) as u128;
        let j = rel * self.m as u128 / width;
        (j as usize).min(self.m - 1)
    }

    #[inline]
    pub fn slice_of(&self, timestamp: f64) -> usize {
        (timestamp / self.nu).floor().max(0.0) as usize
    }

    pub fn accepts(&self, event: &TraceEvent) -> bool {
        self.include_writes || event.is_read()
    }
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            m: 10,
            lba_lo: 0,
            lba_hi: 1,
            nu: 30.0,
            block_size: DEFAULT_BLOCK_SIZE,
            count_mode: CountMode::PerRequest,
            include_writes: false,
        }
    }
}

/// Aggregated trace: one count vector and one access set per slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountVectorSequence {
    pub x: Vec<Vec<u64>>,
    pub a: Vec<BTreeSet<u64>>,
    pub config: BinningConfig,
    /// Global index of the first slice held here.
    pub start_slice: usize,
}

impl CountVectorSequence {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.config.m
    }

    /// A sequence without access sets, e.g. from the count generator.
    pub fn from_counts(x: Vec<Vec<u64>>, config: BinningConfig) -> Self {
        let a = vec![BTreeSet::new(); x.len()];
        Self {
            x,
            a,
            config,
            start_slice: 0,
        }
    }

    pub fn total_count(&self) -> u64 {
        self.x.iter().flatten().sum()
    }
}

/// Adds one event to a slice's count vector and access set.
pub(crate) fn accumulate(
    config: &BinningConfig,
    event: &TraceEvent,
    x: &mut [u64],
    a: &mut BTreeSet<u64>,
) {
    let blocks = event.block_ids(config.block_size);
    match config.count_mode {
        CountMode::PerRequest => x[config.bin_of(event.offset)] += 1,
        CountMode::PerBlock => {
            for b in blocks.clone() {
                x[config.bin_of(b * config.block_size)] += 1;
            }
        }
    }
    a.extend(blocks);
}

/// Aggregates time-ordered events into `floor(max_timestamp / nu) + 1` slices.
pub fn aggregate(events: &[TraceEvent], config: &BinningConfig) -> CountVectorSequence {
    let slices = events
        .iter()
        .map(|e| config.slice_of(e.timestamp) + 1)
        .max()
        .unwrap_or(0);
    let mut x = vec![vec![0u64; config.m]; slices];
    let mut a = vec![BTreeSet::new(); slices];
    for e in events.iter().filter(|e| config.accepts(e)) {
        let t = config.slice_of(e.timestamp);
        accumulate(config, e, &mut x[t], &mut a[t]);
    }
    CountVectorSequence {
        x,
        a,
        config: config.clone(),
        start_slice: 0,
    }
}

/// Number of learning slices: `ceil(fraction · T)`, kept inside `[1, T-1]`.
pub fn learning_len(total: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if total < 2 {
        return Err(Error::TooShort(total));
    }
    // 1e-9 guards ceil against products like 0.9 * 100 = 90.00000000000001
    let n = (fraction * total as f64 - 1e-9).ceil() as usize;
    Ok(n.clamp(1, total - 1))
}

/// Splits into a learning prefix and an operating suffix, order preserved.
pub fn split_learn_operate(
    seq: &CountVectorSequence,
    fraction: f64,
) -> Result<(CountVectorSequence, CountVectorSequence)> {
    let n = learning_len(seq.len(), fraction)?;
    let learn = CountVectorSequence {
        x: seq.x[..n].to_vec(),
        a: seq.a[..n].to_vec(),
        config: seq.config.clone(),
        start_slice: seq.start_slice,
    };
    let operate = CountVectorSequence {
        x: seq.x[n..].to_vec(),
        a: seq.a[n..].to_vec(),
        config: seq.config.clone(),
        start_slice: seq.start_slice + n,
    };
    Ok((learn, operate))
}
