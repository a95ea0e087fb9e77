//! Ground-truth generators: sparse-MVP mixture count sequences and block
//! traces with planted repeating access patterns.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::count_models::{sample_smvp, SmvpParams, SymMatrix};
use crate::error::{Error, Result};
use crate::trace_ingest::{BinningConfig, CountVectorSequence, Op, TraceEvent, DEFAULT_BLOCK_SIZE};

/// A hidden Markov chain over sparse-MVP emission parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub t: usize,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub clusters: Vec<SmvpParams>,
}

impl SynthSpec {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn dim(&self) -> usize {
        self.clusters.first().map_or(0, SmvpParams::dim)
    }

    /// Three clusters over ten bins with disjoint active sets, diagonal
    /// rates 5, 20 and 50, within-set covariance of a fifth of the diagonal,
    /// noise rate 0.05 and self-transition probability 0.9.
    pub fn default_recovery() -> Self {
        let m = 10;
        let sets: [&[usize]; 3] = [&[0, 1, 2], &[3, 4, 5], &[6, 7, 8, 9]];
        let diag = [5.0, 20.0, 50.0];
        let clusters = sets
            .iter()
            .zip(diag)
            .map(|(set, d)| {
                let mut lambda = SymMatrix::new(m);
                let mut b = vec![false; m];
                for (i, &j) in set.iter().enumerate() {
                    b[j] = true;
                    lambda.set(j, j, d);
                    for &l in &set[i + 1..] {
                        lambda.set(j, l, d / 5.0);
                    }
                }
                SmvpParams {
                    lambda,
                    lambda_hat: vec![0.05; m],
                    b,
                }
            })
            .collect();
        Self {
            t: 400,
            initial: vec![1.0 / 3.0; 3],
            transition: sticky_transitions(3, 0.9),
            clusters,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_clusters();
        if k == 0 {
            return Err(Error::Config("spec needs at least one cluster".into()));
        }
        let check_row = |row: &[f64], what: &str| -> Result<()> {
            if row.len() != k || row.iter().any(|&p| p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("{what} must be a probability vector over {k} clusters")));
            }
            Ok(())
        };
        check_row(&self.initial, "initial distribution")?;
        if self.transition.len() != k {
            return Err(Error::Config("transition matrix must be K x K".into()));
        }
        for row in &self.transition {
            check_row(row, "transition row")?;
        }
        let m = self.dim();
        if self.clusters.iter().any(|c| c.dim() != m || c.lambda.dim() != m || c.lambda_hat.len() != m) {
            return Err(Error::Config("cluster parameters disagree on dimension".into()));
        }
        Ok(())
    }
}

/// `p` on the diagonal, the rest spread evenly.
pub fn sticky_transitions(k: usize, p: f64) -> Vec<Vec<f64>> {
    if k == 1 {
        return vec![vec![1.0]];
    }
    let off = (1.0 - p) / (k - 1) as f64;
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { p } else { off }).collect())
        .collect()
}

fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn markov_path<R: Rng + ?Sized>(initial: &[f64], transition: &[Vec<f64>], t: usize, rng: &mut R) -> Vec<usize> {
    let mut z: Vec<usize> = Vec::with_capacity(t);
    for i in 0..t {
        let probs = if i == 0 { initial } else { transition[z[i - 1]].as_slice() };
        z.push(draw_index(probs, rng));
    }
    z
}

/// Draws `Z` from the chain and `X_t ~ SMVP(θ_{Z_t})`; access sets are empty.
pub fn gen_count_sequence<R: Rng + ?Sized>(spec: &SynthSpec, rng: &mut R) -> Result<(CountVectorSequence, Vec<usize>)> {
    spec.validate()?;
    let z = markov_path(&spec.initial, &spec.transition, spec.t, rng);
    let x = z.iter().map(|&k| sample_smvp(&spec.clusters[k], rng)).collect();
    let config = BinningConfig {
        m: spec.dim(),
        ..BinningConfig::default()
    };
    Ok((CountVectorSequence::from_counts(x, config), z))
}

/// Block trace with repeating motifs.
///
/// Each slice plays one motif (a fixed set of blocks in two bins of the
/// address space) chosen by a Markov schedule, plus Poisson background
/// reads scattered over the whole space. Motif blocks are occasionally
/// re-read inside the same slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSpec {
    pub motifs: usize,
    pub blocks_per_motif: usize,
    pub bins: usize,
    pub blocks_per_bin: u64,
    pub slices: usize,
    pub nu: f64,
    /// Mean background reads per slice.
    pub noise_rate: f64,
    /// Probability that a motif block is read a second time in its slice.
    pub reread_prob: f64,
    /// Motif schedule; `None` cycles through the motifs in order.
    pub transition: Option<Vec<Vec<f64>>>,
    pub block_size: u64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            motifs: 20,
            blocks_per_motif: 64,
            bins: 10,
            blocks_per_bin: 1 << 16,
            slices: 400,
            nu: 30.0,
            noise_rate: 4.0,
            reread_prob: 0.02,
            transition: None,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

impl TraceSpec {
    pub fn validate(&self) -> Result<()> {
        let pairs = self.bins * self.bins.saturating_sub(1) / 2;
        if self.motifs == 0 || self.motifs > pairs {
            return Err(Error::Config(format!(
                "need 1..={pairs} motifs for {} bins, got {}",
                self.bins, self.motifs
            )));
        }
        if self.blocks_per_motif < 2 || (self.blocks_per_motif as u64) > self.blocks_per_bin {
            return Err(Error::Config("motif size must lie in 2..=blocks_per_bin".into()));
        }
        if !(self.nu > 0.0) || self.noise_rate < 0.0 || !(0.0..=1.0).contains(&self.reread_prob) {
            return Err(Error::Config("invalid slice length, noise rate or re-read probability".into()));
        }
        if let Some(tr) = &self.transition {
            if tr.len() != self.motifs || tr.iter().any(|r| r.len() != self.motifs) {
                return Err(Error::Config("motif transition matrix must be motifs x motifs".into()));
            }
        }
        Ok(())
    }

    /// Block ids of every motif: half of the blocks in each of the motif's
    /// two bins, placed mid-bin.
    pub fn motif_blocks(&self) -> Vec<Vec<u64>> {
        let pairs = (0..self.bins).flat_map(|a| ((a + 1)..self.bins).map(move |b| (a, b)));
        let half = self.blocks_per_motif / 2;
        pairs
            .take(self.motifs)
            .enumerate()
            .map(|(k, (a, b))| {
                // slots inside a bin keep motifs sharing a bin apart
                let slot = (k as u64 + 1) * (half as u64 + 1);
                let base = self.blocks_per_bin / 4 + slot % (self.blocks_per_bin / 2);
                let mut blocks: Vec<u64> = Vec::with_capacity(self.blocks_per_motif);
                for (bin, n) in [(a, half), (b, self.blocks_per_motif - half)] {
                    let start = bin as u64 * self.blocks_per_bin + base;
                    blocks.extend(start..start + n as u64);
                }
                blocks
            })
            .collect()
    }

    /// Binning matching the generator's address layout.
    pub fn binning(&self) -> BinningConfig {
        BinningConfig {
            m: self.bins,
            lba_lo: 0,
            lba_hi: self.bins as u64 * self.blocks_per_bin * self.block_size,
            nu: self.nu,
            block_size: self.block_size,
            ..BinningConfig::default()
        }
    }
}

/// Generates the trace and the motif played in each slice.
pub fn gen_block_trace<R: Rng + ?Sized>(spec: &TraceSpec, rng: &mut R) -> Result<(Vec<TraceEvent>, Vec<usize>)> {
    spec.validate()?;
    let motifs = spec.motif_blocks();
    let k = spec.motifs;
    let schedule = match &spec.transition {
        Some(tr) => {
            let start = rng.random_range(0..k);
            let mut z = vec![start];
            for i in 1..spec.slices {
                z.push(draw_index(&tr[z[i - 1]], rng));
            }
            z.truncate(spec.slices);
            z
        }
        None => (0..spec.slices).map(|i| i % k).collect(),
    };
    let space = spec.bins as u64 * spec.blocks_per_bin;
    let noise = (spec.noise_rate > 0.0).then(|| Poisson::new(spec.noise_rate).expect("positive rate"));
    let mut events = Vec::new();
    for (slice, &m) in schedule.iter().enumerate() {
        let mut blocks: Vec<u64> = motifs[m].clone();
        blocks.shuffle(rng);
        let rereads: Vec<u64> = blocks
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < spec.reread_prob)
            .collect();
        let n_noise = noise.as_ref().map_or(0, |p| p.sample(rng) as usize);
        let noise_blocks: Vec<u64> = (0..n_noise).map(|_| rng.random_range(0..space)).collect();
        let t0 = slice as f64 * spec.nu;
        // motif reads fill the first half of the slice, re-reads the second
        let mut slice_events: Vec<TraceEvent> = Vec::new();
        let n = blocks.len() as f64;
        for (i, &b) in blocks.iter().enumerate() {
            slice_events.push(read_event(t0 + spec.nu * 0.5 * i as f64 / n, b, spec.block_size));
        }
        for &b in &rereads {
            let ts = t0 + spec.nu * (0.5 + 0.49 * rng.random::<f64>());
            slice_events.push(read_event(ts, b, spec.block_size));
        }
        for &b in &noise_blocks {
            let ts = t0 + spec.nu * 0.99 * rng.random::<f64>();
            slice_events.push(read_event(ts, b, spec.block_size));
        }
        slice_events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        events.extend(slice_events);
    }
    Ok((events, schedule))
}

fn read_event(timestamp: f64, block: u64, block_size: u64) -> TraceEvent {
    TraceEvent {
        timestamp,
        op: Op::Read,
        offset: block * block_size,
        size: block_size,
    }
}
