//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data, I/O or
//! checkpoint error, 3 numeric failure (including a failed self-test).

pub mod config;
mod selftest;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{split_indices, FallLabel, PoseDataset, PoseRecord};
use crate::error::{Error, Result};
use crate::eval::report::{sweep_svg, write_report_csv, write_sweep_csv};
use crate::eval::sweep::{evaluate_classifier, evaluate_lifter, occlusion_sweep, SweepSystem};
use crate::fallnet::{train_fallnet, FallNet, QSource};
use crate::features::{encode_p, BBoxSource, FeatureConfig, FeatureSet};
use crate::ojr::OjrConfig;
use crate::pose::coco::parse_coco;
use crate::posenet::{train_posenet3d, PoseNet3d};
use crate::synth::{generate_dataset, GenerationSummary};
use crate::training::write_history_csv;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "SSHFD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sshfd", version, about = "Pose-based fall detection: data generation, training, evaluation and prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled pose dataset (JSONL).
    GenData(GenDataArgs),
    /// Train the 3d lifter or the fall classifier.
    Train(TrainArgs),
    /// Evaluate checkpoints on a dataset, optionally with occluded joints.
    Eval(EvalArgs),
    /// Evaluate model variants over a grid of occlusion levels.
    Sweep(SweepArgs),
    /// Classify keypoint records (JSONL or COCO keypoint JSON).
    Predict(PredictArgs),
    /// Run built-in consistency checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Camera elevation range in degrees, e.g. `0,8` for a low-camera stress set.
    #[arg(long, value_parser = parse_range)]
    pub elevation: Option<[f64; 2]>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Posenet3d,
    Fallnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the checkpoint, history and config echo.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub ojr: Option<OnOff>,
    /// Frozen lifter checkpoint (classifier training with predicted 3d input).
    #[arg(long)]
    pub posenet: Option<PathBuf>,
    #[arg(long, value_parser = parse_q_source)]
    pub q_source: Option<QSource>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub posenet: Option<PathBuf>,
    #[arg(long)]
    pub fallnet: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Joints hidden per record.
    #[arg(long, default_value_t = 0)]
    pub occlude_count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Lifter checkpoint as `[NAME=]PATH`; repeat for several variants.
    #[arg(long)]
    pub posenet: Vec<String>,
    /// Classifier checkpoint as `[NAME=]PATH`; paired with the lifter of the
    /// same name.
    #[arg(long)]
    pub fallnet: Vec<String>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8")]
    pub occlude_grid: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Auto,
    Jsonl,
    Coco,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub posenet: Option<PathBuf>,
    #[arg(long)]
    pub fallnet: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    #[arg(long, value_parser = parse_bbox_source)]
    pub bbox_source: Option<BBoxSource>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Also verify that this checkpoint loads.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected LO,HI")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok([p(a)?, p(b)?])
}

fn parse_q_source(s: &str) -> std::result::Result<QSource, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bbox_source(s: &str) -> std::result::Result<BBoxSource, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parameter(_) => EXIT_USAGE,
        Error::Numeric(_) | Error::State(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Selftest(a) => selftest::cmd_selftest(a),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn cmd_gen_data(a: GenDataArgs) -> Result<i32> {
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    if let Some(n) = a.size {
        cfg.generator.size = n;
    }
    if let Some(s) = a.seed {
        cfg.generator.seed = s;
    }
    if let Some(e) = a.elevation {
        cfg.generator.camera.elevation_deg = e;
    }
    let ds = generate_dataset(&cfg.generator)?;
    let mut buf = Vec::new();
    ds.write_jsonl(&mut buf)?;
    write_atomic(&a.out, &buf)?;
    let mut echo = a.out.clone().into_os_string();
    echo.push(".config.toml");
    std::fs::write(PathBuf::from(echo), cfg.to_toml())?;
    let s = GenerationSummary::of(&ds);
    let classes: Vec<String> = s.per_class.iter().map(|(c, n)| format!("{c}={n}")).collect();
    println!(
        "generated {} records ({}) fall={} no_fall={} max_reprojection_px={:.3e}",
        s.total,
        classes.join(" "),
        s.per_label.get("fall").copied().unwrap_or(0),
        s.per_label.get("no_fall").copied().unwrap_or(0),
        s.max_reprojection_px
    );
    Ok(EXIT_OK)
}

fn split(ds: &PoseDataset, cfg: &RunConfig) -> Result<(FeatureSet, FeatureSet)> {
    let fs = FeatureSet::from_dataset(ds, &cfg.features)?;
    let (tr, te) = split_indices(fs.len(), cfg.data.train_frac, cfg.data.split_seed);
    Ok((fs.subset(&tr), fs.subset(&te)))
}

pub fn cmd_train(a: TrainArgs) -> Result<i32> {
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    if let Some(e) = a.epochs {
        cfg.schedule.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.schedule.batch_size = b;
    }
    if let Some(lr) = a.lr0 {
        cfg.schedule.lr0 = lr;
    }
    if let Some(s) = a.seed {
        cfg.schedule.seed = s;
    }
    match a.ojr {
        Some(OnOff::On) => cfg.ojr.enabled = true,
        Some(OnOff::Off) => cfg.ojr.enabled = false,
        None => {}
    }
    if let Some(q) = a.q_source {
        cfg.fallnet.q_source = q;
    }
    cfg.posenet.dropout_p = cfg.schedule.dropout_p;
    cfg.fallnet.dropout_p = cfg.schedule.dropout_p;
    cfg.validate()?;
    let ojr = if cfg.ojr.enabled { cfg.ojr.clone() } else { OjrConfig::disabled() };

    let ds = PoseDataset::load(&a.data)?;
    let (train, val) = split(&ds, &cfg)?;
    let frame = cfg.features.frame;
    std::fs::create_dir_all(&a.out)?;
    let (history, metric, ckpt) = match a.model {
        ModelKind::Posenet3d => {
            train.require_q()?;
            let (m, h) = train_posenet3d(&train, Some(&val), &cfg.posenet, frame, &cfg.schedule, &ojr)?;
            (h, "val_mpjpe", m.to_checkpoint())
        }
        ModelKind::Fallnet => {
            let lifter = match &a.posenet {
                Some(p) => Some(PoseNet3d::load(p)?),
                None => None,
            };
            if cfg.fallnet.q_source == QSource::Predicted && lifter.is_none() {
                return Err(Error::Config("--posenet is required unless --q-source is ground_truth or zeros".into()));
            }
            let (m, h) = train_fallnet(&train, Some(&val), lifter.as_ref(), &cfg.fallnet, frame, &cfg.schedule, &ojr)?;
            (h, "val_weighted_f1", m.to_checkpoint())
        }
    };
    let mut ckpt = ckpt;
    ckpt.set("schedule", serde_json::to_string(&cfg.schedule)?);
    ckpt.set("ojr", serde_json::to_string(&ojr)?);
    ckpt.set("dataset_id", ds.fingerprint());
    ckpt.save(a.out.join("model.ckpt"))?;
    let mut csv = Vec::new();
    write_history_csv(&history, metric, &mut csv)?;
    std::fs::write(a.out.join("history.csv"), csv)?;
    cfg.echo_into(&a.out)?;
    if let Some(last) = history.last() {
        println!(
            "trained {:?} for {} epochs: train_loss={:.6} {metric}={:.4}",
            a.model, last.epoch, last.train_loss, last.val_metric
        );
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    records: usize,
    occlude_count: usize,
    seed: u64,
    dataset_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    mpjpe_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weighted_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weighted_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weighted_recall: Option<f64>,
}

pub fn cmd_eval(a: EvalArgs) -> Result<i32> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    if a.posenet.is_none() && a.fallnet.is_none() {
        return Err(Error::Config("give --posenet and/or --fallnet".into()));
    }
    let seed = a.seed.unwrap_or(cfg.ojr.seed);
    let ds = PoseDataset::load(&a.data)?;
    let data = FeatureSet::from_dataset(&ds, &cfg.features)?;
    let posenet = a.posenet.as_deref().map(PoseNet3d::load).transpose()?;
    let fallnet = a.fallnet.as_deref().map(FallNet::load).transpose()?;
    std::fs::create_dir_all(&a.out)?;
    let mut summary = EvalSummary {
        records: data.len(),
        occlude_count: a.occlude_count,
        seed,
        dataset_id: ds.fingerprint(),
        mpjpe_mm: None,
        weighted_f1: None,
        weighted_precision: None,
        weighted_recall: None,
    };
    if let (Some(p), Some(_)) = (&posenet, &data.q) {
        summary.mpjpe_mm = Some(evaluate_lifter(p, &data, a.occlude_count, seed)?);
    }
    if let Some(f) = &fallnet {
        let report = evaluate_classifier(f, posenet.as_ref(), &data, a.occlude_count, seed)?;
        let mut csv = Vec::new();
        write_report_csv(&report, &[FallLabel::NoFall.as_str(), FallLabel::Fall.as_str()], &mut csv)?;
        std::fs::write(a.out.join("report.csv"), csv)?;
        summary.weighted_f1 = Some(report.weighted_f1);
        summary.weighted_precision = Some(report.weighted_precision);
        summary.weighted_recall = Some(report.weighted_recall);
    }
    let json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(a.out.join("metrics.json"), format!("{json}\n"))?;
    cfg.echo_into(&a.out)?;
    println!("{json}");
    Ok(EXIT_OK)
}

fn named(specs: &[String]) -> Vec<(String, PathBuf)> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| match s.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None if specs.len() == 1 => ("model".to_string(), PathBuf::from(s)),
            None => (format!("v{}", i + 1), PathBuf::from(s)),
        })
        .collect()
}

pub fn cmd_sweep(a: SweepArgs) -> Result<i32> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let seed = a.seed.unwrap_or(cfg.ojr.seed);
    let lifters: Vec<(String, PoseNet3d)> = named(&a.posenet)
        .into_iter()
        .map(|(n, p)| Ok((n, PoseNet3d::load(p)?)))
        .collect::<Result<_>>()?;
    let classifiers: Vec<(String, FallNet)> = named(&a.fallnet)
        .into_iter()
        .map(|(n, p)| Ok((n, FallNet::load(p)?)))
        .collect::<Result<_>>()?;
    let mut names: Vec<&str> = lifters.iter().map(|(n, _)| n.as_str()).collect();
    for (n, _) in &classifiers {
        if !names.contains(&n.as_str()) {
            names.push(n);
        }
    }
    if names.is_empty() {
        return Err(Error::Config("give at least one --posenet or --fallnet".into()));
    }
    let systems: Vec<SweepSystem<'_>> = names
        .iter()
        .map(|&n| SweepSystem {
            name: n,
            posenet: lifters.iter().find(|(k, _)| k == n).map(|(_, m)| m),
            fallnet: classifiers.iter().find(|(k, _)| k == n).map(|(_, m)| m),
        })
        .collect();
    let ds = PoseDataset::load(&a.data)?;
    let data = FeatureSet::from_dataset(&ds, &cfg.features)?;
    let result = occlusion_sweep(&systems, &data, &a.occlude_grid, seed, &ds.fingerprint())?;
    std::fs::create_dir_all(&a.out)?;
    let mut csv = Vec::new();
    write_sweep_csv(&result, &mut csv)?;
    std::fs::write(a.out.join("sweep.csv"), &csv)?;
    for metric in result.metrics() {
        std::fs::write(a.out.join(format!("sweep_{metric}.svg")), sweep_svg(&result, &metric))?;
    }
    cfg.echo_into(&a.out)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    fall_probability: f64,
    label: &'a str,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    low_confidence: bool,
}

fn read_inputs(path: &Path, format: InputFormat) -> Result<(Vec<PoseRecord>, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    let coco = match format {
        InputFormat::Coco => true,
        InputFormat::Jsonl => false,
        InputFormat::Auto => match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Array(_)) => true,
            Ok(serde_json::Value::Object(m)) => m.contains_key("annotations") || m.contains_key("keypoints"),
            _ => false,
        },
    };
    let mut warnings = Vec::new();
    if coco {
        let mut records = Vec::new();
        for (i, p) in parse_coco(&text)?.into_iter().enumerate() {
            match p {
                Ok(p) => records.push(PoseRecord {
                    id: p.id,
                    label: None,
                    class: None,
                    joints2d: p.pose,
                    joints3d: None,
                    camera: None,
                    bbox: p.bbox,
                }),
                Err(e) => warnings.push(format!("annotation {}: {e}", i + 1)),
            }
        }
        Ok((records, warnings))
    } else {
        let read = PoseDataset::read_jsonl_lenient(text.as_bytes())?;
        warnings.extend(read.skipped.iter().map(|(line, e)| format!("line {line}: {e}")));
        Ok((read.records, warnings))
    }
}

pub fn cmd_predict(a: PredictArgs) -> Result<i32> {
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    if let Some(b) = a.bbox_source {
        cfg.features.bbox_source = b;
    }
    let fallnet = FallNet::load(&a.fallnet)?;
    let posenet = a.posenet.as_deref().map(PoseNet3d::load).transpose()?;
    let feats = FeatureConfig {
        frame: fallnet.frame,
        ..cfg.features.clone()
    };
    let (records, warnings) = read_inputs(&a.input, a.format)?;
    for w in &warnings {
        eprintln!("warning: skipped {w}");
    }
    let mut p = Vec::with_capacity(records.len() * crate::features::P_WIDTH);
    let mut kept = Vec::with_capacity(records.len());
    let mut degenerate = 0usize;
    for r in &records {
        match feats.normalized_2d(r) {
            Ok(n) => {
                p.extend(encode_p(&n, &feats.frame));
                kept.push(r);
            }
            Err(e) => {
                eprintln!("warning: skipped record {}: {e}", r.id);
                degenerate += 1;
            }
        }
    }
    let mut out: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
    };
    if !kept.is_empty() {
        let q = fallnet.q_for(&p, posenet.as_ref())?;
        let preds = fallnet.classify_rows(&p, &q)?;
        for (r, pred) in kept.iter().zip(&preds) {
            let label = FallLabel::from_index(pred.label).map_or("unknown", FallLabel::as_str);
            let line = PredictionLine {
                id: &r.id,
                fall_probability: pred.probs.get(FallLabel::Fall.index()).copied().unwrap_or(0.0),
                label,
                low_confidence: r.joints2d.visible_count() == 0,
            };
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
    }
    out.flush()?;
    eprintln!(
        "predicted {} records, skipped {} malformed",
        kept.len(),
        warnings.len() + degenerate
    );
    Ok(EXIT_OK)
}
