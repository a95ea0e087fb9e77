use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracemix_core::artifact::{self, ArtifactKind};
use tracemix_core::pipeline::{fit_bundle, learning_sequence, split_events};
use tracemix_core::synth::{gen_block_trace, TraceSpec};
use tracemix_core::trace_ingest::write_simple_trace;
use tracemix_core::{
    aggregate as aggregate_events,
    capacity_from_trace, heldout_loglik, parse_trace, simulate_baseline, simulate_preloading,
    split_learn_operate, ModelBundle, TraceEvent,
};

use crate::config::RunConfig;
use crate::CliError;

pub const SEQUENCE_FILE: &str = "sequence.tmix";
pub const MODEL_FILE: &str = "model.tmix";
pub const CHECKPOINT_FILE: &str = "checkpoint.tmix";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn read_events(cfg: &RunConfig, path: &Path) -> Result<Vec<TraceEvent>, CliError> {
    let format = cfg.trace_format()?;
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open trace {}: {e}", path.display())))?;
    parse_trace(BufReader::new(file), &format).map_err(|e| match CliError::from(e) {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_bundle(path: &Path) -> Result<ModelBundle, CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!("model file {} does not exist", path.display())));
    }
    artifact::load(path, ArtifactKind::Model).map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn aggregate(cfg: &RunConfig, trace: &Path, out: &Path) -> Result<(), CliError> {
    let events = read_events(cfg, trace)?;
    let binning = cfg.binning()?.with_range_of(&events);
    let seq = aggregate_events(&events, &binning);
    create_dir(out)?;
    let path = out.join(SEQUENCE_FILE);
    artifact::save(&path, ArtifactKind::Sequence, &seq).map_err(|e| io_err(&path, e))?;
    let cells = (seq.len() * seq.dim()).max(1);
    let zeros = seq.x.iter().flatten().filter(|&&v| v == 0).count();
    println!(
        "slices {} bins {} requests {} zero_fraction {:.4}",
        seq.len(),
        seq.dim(),
        seq.total_count(),
        zeros as f64 / cells as f64
    );
    Ok(())
}

pub fn fit(cfg: &RunConfig, trace: &Path, out: &Path) -> Result<(), CliError> {
    let kind = cfg.model_kind()?;
    let fit_cfg = cfg.fit_config()?;
    let binning = cfg.binning()?;
    let events = read_events(cfg, trace)?;
    let split = split_events(&events, binning.nu, cfg.split)?;
    let seq = learning_sequence(&split.learn, &binning)?;
    let (bundle, output) = fit_bundle(&seq, kind, cfg.hyper, &fit_cfg, cfg.chains)?;
    create_dir(out)?;
    let model_path = out.join(MODEL_FILE);
    artifact::save(&model_path, ArtifactKind::Model, &bundle).map_err(|e| io_err(&model_path, e))?;
    let ckpt_path = out.join(CHECKPOINT_FILE);
    artifact::save(&ckpt_path, ArtifactKind::Checkpoint, output.final_sample())
        .map_err(|e| io_err(&ckpt_path, e))?;
    let diag_path = out.join(DIAGNOSTICS_FILE);
    let file = File::create(&diag_path).map_err(|e| io_err(&diag_path, e))?;
    output.diagnostics.write_csv(BufWriter::new(file))?;
    let d = &output.diagnostics;
    println!(
        "kind {kind} slices {} clusters {} sweeps {} partial {} seconds {:.1}",
        seq.len(),
        bundle.model.num_clusters(),
        d.sweeps(),
        d.partial,
        d.wall_clock.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig, trace: &Path, models: &[std::path::PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let bundles = models.iter().map(|p| load_bundle(p)).collect::<Result<Vec<_>, _>>()?;
    let events = read_events(cfg, trace)?;
    let mut rows = Vec::with_capacity(bundles.len());
    for (path, bundle) in models.iter().zip(&bundles) {
        let full = aggregate_events(&events, &bundle.binning);
        let (_, operate) = split_learn_operate(&full, cfg.split)?;
        let ll = heldout_loglik(&bundle.model, &operate);
        rows.push([
            path.display().to_string(),
            bundle.model.kind.to_string(),
            bundle.model.num_clusters().to_string(),
            operate.len().to_string(),
            format!("{ll:.6}"),
        ]);
    }
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p).map_err(|e| io_err(p, e))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let write = |w: &mut csv::Writer<Box<dyn Write>>, rec: &[String]| {
        w.write_record(rec).map_err(|e| CliError::Runtime(e.to_string()))
    };
    write(&mut w, &["model", "kind", "clusters", "heldout_slices", "heldout_loglik"].map(String::from))?;
    for r in &rows {
        write(&mut w, r)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

/// `preload / baseline`, with 0/0 read as no change.
pub fn ratio(baseline: f64, preload: f64) -> f64 {
    if baseline > 0.0 {
        preload / baseline
    } else if preload > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

pub fn simulate(
    cfg: &RunConfig,
    trace: &Path,
    model: &Path,
    out: Option<&Path>,
    preload_log: Option<&Path>,
) -> Result<(), CliError> {
    let bundle = load_bundle(model)?;
    let events = read_events(cfg, trace)?;
    let split = split_events(&events, bundle.binning.nu, cfg.split)?;
    let block_size = bundle.binning.block_size;
    let capacity = capacity_from_trace(&events, block_size, cfg.cache_frac)?;
    let base = simulate_baseline(&split.operate, block_size, capacity, false);
    let pre = simulate_preloading(&split.operate, &bundle.model, &bundle.access_map, &bundle.binning, capacity, false)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        for (label, report) in [("baseline", &base), ("preload", &pre)] {
            let p = dir.join(format!("{label}.csv"));
            let f = File::create(&p).map_err(|e| io_err(&p, e))?;
            report.write_csv(label, BufWriter::new(f))?;
        }
    }
    if let Some(p) = preload_log {
        let f = File::create(p).map_err(|e| io_err(p, e))?;
        pre.write_preload_log(BufWriter::new(f))?;
    }
    let mut w = csv::Writer::from_writer(io::stdout());
    let rows = [
        ["trace", "capacity", "baseline_hitrate", "preload_hitrate", "ratio"].map(String::from),
        [
            trace.display().to_string(),
            capacity.to_string(),
            format!("{:.6}", base.hitrate()),
            format!("{:.6}", pre.hitrate()),
            format!("{:.4}", ratio(base.hitrate(), pre.hitrate())),
        ],
    ];
    for r in &rows {
        w.write_record(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

pub fn synth(cfg: &RunConfig, spec: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let spec: TraceSpec = match spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => TraceSpec::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (events, _) = gen_block_trace(&spec, &mut rng)?;
    let f = File::create(out).map_err(|e| io_err(out, e))?;
    write_simple_trace(&events, BufWriter::new(f))?;
    println!("events {} slices {}", events.len(), spec.slices);
    Ok(())
}
