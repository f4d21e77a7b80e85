//! The `ttfs` command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::DendriteGradMode;
use crate::data::{build_split_mnist, load_mnist_dir, TaskStream};
use crate::emu::{compare, test_step_samples, CompareReport, EmulatorOptions, Pipeline};
use crate::error::{Error, Result};
use crate::harness::{
    evaluate_all, run_experiment_with, summarize, traces_to_csv, AccuracyTrace, Checkpoint, ExperimentMode,
    ExperimentSpec, Flow, Summary,
};
use crate::quant::{export_memory_image, quantize_model, quantized_accuracy, MemoryImage};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const IMAGE_FILE: &str = "memory.img";
const SPLIT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "ttfs", version, about = "Train, quantize and emulate TTFS spiking networks with active dendrites")]
pub struct Cli {
    /// TOML file with default values; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one experiment mode over a list of seeds.
    Train(TrainArgs),
    /// Report per-task test accuracy of a checkpoint.
    Evaluate(EvaluateArgs),
    /// Quantize a checkpoint and write its memory image.
    Quantize(QuantizeArgs),
    /// Run a memory image on the hardware emulator.
    Emulate(EmulateArgs),
    /// Diff the emulator against the quantized reference inference.
    Compare(CompareArgs),
    /// Run all three experiments, then quantize and compare the dendritic one.
    FullPaper(FullArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Directory holding the four MNIST IDX files (optionally gzipped).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Keep at most this many training images per task.
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Keep at most this many test images per task.
    #[arg(long)]
    pub test_limit: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpecArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ExperimentMode>,
    /// Seed list: `0..4` (inclusive), `0..=4`, `7` or `0,3,5`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub epochs_per_task: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Dendritic delay strength S.
    #[arg(long)]
    pub s_strength: Option<f64>,
    #[arg(long, value_enum)]
    pub dendrite_grad_mode: Option<DendriteGradMode>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from the per-seed checkpoints found under `--out`.
    #[arg(long)]
    pub resume: bool,
    /// Print the planned runs and exit.
    #[arg(long)]
    pub dry_run: bool,
    /// Stop every seed after this many epochs in this invocation.
    #[arg(long, hide = true)]
    pub halt_after_epochs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Write the result as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Memory image path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also report quantized test accuracy on this dataset.
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EmulateArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Results JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the event transcript of test sample `--transcript-sample` here.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub transcript_sample: usize,
    /// Delay inter-layer spikes by one timestep.
    #[arg(long)]
    pub pipeline_latency: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Memory image to emulate; produced from the checkpoint when absent.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Fault injection: flip synapse-memory bit `LAYER:ADDRESS:BIT`.
    #[arg(long)]
    pub flip_bit: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FullArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub dry_run: bool,
}

/// Values accepted in the `--config` TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub mode: Option<ExperimentMode>,
    pub seeds: Option<String>,
    pub epochs_per_task: Option<usize>,
    pub batch_size: Option<usize>,
    pub s_strength: Option<f64>,
    pub dendrite_grad_mode: Option<DendriteGradMode>,
    pub lr: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Parses `0..4` and `0..=4` (both inclusive), single seeds and comma lists.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list {s:?}"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}

fn resolve_spec(args: &SpecArgs, file: &FileConfig, default_mode: ExperimentMode) -> Result<ExperimentSpec> {
    let mode = args.mode.or(file.mode).unwrap_or(default_mode);
    let mut spec = ExperimentSpec::new(mode);
    if let Some(s) = args.seeds.as_ref().or(file.seeds.as_ref()) {
        spec.seeds = parse_seeds(s)?;
    }
    if let Some(e) = args.epochs_per_task.or(file.epochs_per_task) {
        spec.epochs_per_task = e;
    }
    if let Some(b) = args.batch_size.or(file.batch_size) {
        spec.batch_size = b;
    }
    if let Some(s) = args.s_strength.or(file.s_strength) {
        spec.strength = s;
    }
    if let Some(m) = args.dendrite_grad_mode.or(file.dendrite_grad_mode) {
        spec.dendrite_grad_mode = m;
    }
    if let Some(lr) = args.lr.or(file.lr) {
        spec.adam.lr = lr;
    }
    spec.hidden = args.hidden.clone().or_else(|| file.hidden.clone());
    spec.validate()?;
    Ok(spec)
}

fn resolve_data(args: &DataArgs, file: &FileConfig) -> DataArgs {
    DataArgs {
        data_dir: args.data_dir.clone().or_else(|| file.data_dir.clone()),
        train_limit: args.train_limit.or(file.train_limit),
        test_limit: args.test_limit.or(file.test_limit),
    }
}

fn resolve_out(out: &Option<PathBuf>, file: &FileConfig) -> PathBuf {
    out.clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// `--data-dir`, else `$MNIST_DIR`, else `data/mnist`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

pub fn load_data(args: &DataArgs) -> Result<TaskStream> {
    let dir = args.data_dir.clone().unwrap_or_else(default_data_dir);
    let (train, test) = load_mnist_dir(&dir)?;
    let stream = build_split_mnist(train, test, SPLIT_SEED)?;
    Ok(stream.truncated(args.train_limit, args.test_limit))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub spec: ExperimentSpec,
    pub data_dir: PathBuf,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub split_seed: u64,
    pub artifacts: Vec<Artifact>,
}

fn manifest(command: &str, spec: &ExperimentSpec, data: &DataArgs, root: &Path, files: &[PathBuf]) -> Result<Manifest> {
    let artifacts = files
        .iter()
        .map(|p| {
            Ok(Artifact {
                path: p.strip_prefix(root).unwrap_or(p).display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        spec: spec.clone(),
        data_dir: data.data_dir.clone().unwrap_or_else(default_data_dir),
        train_limit: data.train_limit,
        test_limit: data.test_limit,
        split_seed: SPLIT_SEED,
        artifacts,
    })
}

pub fn seed_dir(out: &Path, mode: ExperimentMode, seed: u64) -> PathBuf {
    out.join(mode.as_str()).join(format!("seed-{seed}"))
}

/// Outcome of training one mode over its seeds.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub traces: Vec<AccuracyTrace>,
    pub summary: Option<Summary>,
    pub complete: bool,
}

fn train_seed(
    spec: &ExperimentSpec,
    data: &TaskStream,
    out: &Path,
    seed: u64,
    resume: bool,
    halt_after: Option<usize>,
) -> Result<(AccuracyTrace, bool)> {
    let dir = seed_dir(out, spec.mode, seed);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let state = if resume && ck_path.exists() {
        let ck = Checkpoint::load(&ck_path)?;
        if ck.mode != Some(spec.mode) {
            return Err(Error::Config(format!("{} was written by a different mode", ck_path.display())));
        }
        log::info!("resuming {} seed {seed} after epoch {}", spec.mode, ck.epochs_done);
        Some(ck.into_state()?)
    } else {
        None
    };
    let total = spec.total_epochs(data.len());
    let mut run_now = 0usize;
    let (trace, state) = run_experiment_with(spec, data, seed, state, |state, _| {
        Checkpoint::from_state(state, Some(spec.mode)).save(&ck_path)?;
        run_now += 1;
        Ok(if halt_after.is_some_and(|h| run_now >= h) {
            Flow::Stop
        } else {
            Flow::Continue
        })
    })?;
    if total == 0 {
        Checkpoint::from_state(&state, Some(spec.mode)).save(&ck_path)?;
    }
    Ok((trace, state.epochs_done == total))
}

/// Trains every seed of `spec` under `out/<mode>/` and writes the CSV,
/// summary and manifest once all seeds are complete.
pub fn train_mode(
    spec: &ExperimentSpec,
    data: &TaskStream,
    data_args: &DataArgs,
    out: &Path,
    resume: bool,
    halt_after: Option<usize>,
) -> Result<TrainOutcome> {
    let results: Vec<(AccuracyTrace, bool)> = spec
        .seeds
        .par_iter()
        .map(|&seed| train_seed(spec, data, out, seed, resume, halt_after))
        .collect::<Result<_>>()?;
    let complete = results.iter().all(|(_, done)| *done);
    let traces: Vec<AccuracyTrace> = results.into_iter().map(|(t, _)| t).collect();
    if !complete {
        log::warn!("{} halted before the last epoch; rerun with --resume", spec.mode);
        return Ok(TrainOutcome {
            traces,
            summary: None,
            complete,
        });
    }
    let mode_dir = out.join(spec.mode.as_str());
    let csv = mode_dir.join("accuracy.csv");
    write_file(&csv, traces_to_csv(&traces).as_bytes())?;
    let summary = summarize(&traces)?;
    let summary_path = mode_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    let mut files = vec![csv, summary_path];
    files.extend(spec.seeds.iter().map(|&s| seed_dir(out, spec.mode, s).join(CHECKPOINT_FILE)));
    write_json(&mode_dir.join("manifest.json"), &manifest("train", spec, data_args, out, &files)?)?;
    Ok(TrainOutcome {
        traces,
        summary: Some(summary),
        complete,
    })
}

fn plan_lines(spec: &ExperimentSpec, out: &Path) -> String {
    let mut s = String::new();
    for &seed in &spec.seeds {
        let _ = writeln!(
            s,
            "{} seed {seed}: hidden {:?}, {} epochs/task, batch {}, S {}, lr {}, dendrite grads {:?} -> {}",
            spec.mode,
            spec.hidden_layers(),
            spec.epochs_per_task,
            spec.batch_size,
            spec.strength,
            spec.adam.lr,
            spec.dendrite_grad_mode,
            seed_dir(out, spec.mode, seed).display()
        );
    }
    s
}

fn cmd_train(args: &TrainArgs, file: &FileConfig) -> Result<i32> {
    let spec = resolve_spec(&args.spec, file, ExperimentMode::SequentialWithDendrites)?;
    let data_args = resolve_data(&args.data, file);
    let out = resolve_out(&args.out, file);
    if args.dry_run {
        print!("{}", plan_lines(&spec, &out));
        return Ok(0);
    }
    let data = load_data(&data_args)?;
    let outcome = train_mode(&spec, &data, &data_args, &out, args.resume, args.halt_after_epochs)?;
    match outcome.summary {
        Some(s) => println!("{}", serde_json::to_string_pretty(&s)?),
        None => println!("halted; resume with --resume"),
    }
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct EvaluateReport {
    checkpoint: PathBuf,
    epochs_done: usize,
    per_task: Vec<f64>,
    mean: f64,
}

fn cmd_evaluate(args: &EvaluateArgs, file: &FileConfig) -> Result<i32> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let data = load_data(&resolve_data(&args.data, file))?;
    let per_task = evaluate_all(&ck.network, &data)?;
    let report = EvaluateReport {
        checkpoint: args.checkpoint.clone(),
        epochs_done: ck.epochs_done,
        mean: per_task.iter().sum::<f64>() / per_task.len() as f64,
        per_task,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(0)
}

fn cmd_quantize(args: &QuantizeArgs, file: &FileConfig) -> Result<i32> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let q = quantize_model(&ck.network)?;
    export_memory_image(&q)?.save(&args.out)?;
    for (l, layer) in q.layers.iter().enumerate() {
        println!(
            "layer {l}: {}x{} scale {:.6} threshold {} dendrites {}",
            layer.inputs, layer.neurons, layer.scale, layer.threshold, layer.has_dendrites
        );
    }
    let data_args = resolve_data(&args.data, file);
    if data_args.data_dir.is_some() {
        let acc = quantized_accuracy(&q, &load_data(&data_args)?)?;
        println!("quantized accuracy per task {acc:?} mean {:.4}", acc.iter().sum::<f64>() / acc.len() as f64);
    }
    println!("wrote {}", args.out.display());
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct EmulateReport {
    image: PathBuf,
    samples: usize,
    per_task_accuracy: Vec<f64>,
    mean_accuracy: f64,
    synapse_reads: u64,
    dendrite_reads: u64,
    pipeline_latency: bool,
}

fn cmd_emulate(args: &EmulateArgs, file: &FileConfig) -> Result<i32> {
    let image = MemoryImage::load(&args.image)?;
    let data = load_data(&resolve_data(&args.data, file))?;
    let samples = test_step_samples(&data, image.t_max, None);
    if samples.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let opts = EmulatorOptions {
        pipeline_latency: args.pipeline_latency,
        record_transcript: false,
    };
    let base = Pipeline::from_image(&image, opts)?;
    let results: Vec<(usize, bool, u64, u64)> = samples
        .par_iter()
        .map_init(
            || base.clone(),
            |pipe, s| {
                let r = pipe.run_inference(&s.spikes, s.task)?;
                let syn = r.counters.iter().map(|c| c.synapse_reads).sum();
                let den = r.counters.iter().map(|c| c.dendrite_reads).sum();
                Ok((s.task, r.prediction == s.label, syn, den))
            },
        )
        .collect::<Result<_>>()?;
    let n_tasks = image.n_tasks;
    let mut correct = vec![0usize; n_tasks];
    let mut total = vec![0usize; n_tasks];
    let (mut syn, mut den) = (0, 0);
    for (task, ok, s, d) in &results {
        total[*task] += 1;
        correct[*task] += *ok as usize;
        syn += s;
        den += d;
    }
    let per_task: Vec<f64> = correct
        .iter()
        .zip(&total)
        .map(|(&c, &t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
        .collect();
    let report = EmulateReport {
        image: args.image.clone(),
        samples: samples.len(),
        mean_accuracy: per_task.iter().sum::<f64>() / per_task.len().max(1) as f64,
        per_task_accuracy: per_task,
        synapse_reads: syn,
        dendrite_reads: den,
        pipeline_latency: args.pipeline_latency,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    if let Some(path) = &args.transcript {
        let s = samples
            .get(args.transcript_sample)
            .ok_or_else(|| Error::Config(format!("no test sample {}", args.transcript_sample)))?;
        let mut pipe = Pipeline::from_image(
            &image,
            EmulatorOptions {
                record_transcript: true,
                ..opts
            },
        )?;
        let r = pipe.run_inference(&s.spikes, s.task)?;
        write_file(path, r.transcript.to_text().as_bytes())?;
    }
    Ok(0)
}

fn parse_flip(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("--flip-bit expects LAYER:ADDRESS:BIT, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let p = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
    Ok((p(parts[0])?, p(parts[1])?, p(parts[2])?))
}

fn print_compare(report: &CompareReport) {
    println!(
        "compared {} samples: {} mismatched samples, {} differing spikes",
        report.samples, report.mismatched_samples, report.mismatch_count
    );
    println!(
        "reference accuracy {:.4}, emulated accuracy {:.4}",
        report.reference_accuracy, report.emulated_accuracy
    );
    for m in &report.mismatches {
        println!(
            "mismatch: sample {} task {} layer {} address {}: reference {:?} emulated {:?}",
            m.sample, m.task, m.layer, m.address, m.reference, m.emulated
        );
    }
    if let Some(line) = &report.first_divergence {
        println!("first divergent transcript line: {line}");
    }
}

fn cmd_compare(args: &CompareArgs, file: &FileConfig) -> Result<i32> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let reference = quantize_model(&ck.network)?;
    let mut image = match &args.image {
        Some(p) => MemoryImage::load(p)?,
        None => export_memory_image(&reference)?,
    };
    if let Some(spec) = &args.flip_bit {
        let (layer, addr, bit) = parse_flip(spec)?;
        image
            .layers
            .get_mut(layer)
            .ok_or_else(|| Error::Config(format!("no layer {layer} in memory image")))?
            .synapse
            .flip_bit(addr, bit)?;
    }
    let data = load_data(&resolve_data(&args.data, file))?;
    let samples = test_step_samples(&data, reference.t_max, None);
    let report = compare(&reference, &image, &samples)?;
    print_compare(&report);
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(if report.mismatch_count == 0 { 0 } else { 1 })
}

/// One row of the final report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub reference: Option<f64>,
}

fn render_report(rows: &[ReportRow], compares: &[(u64, CompareReport)]) -> (String, String) {
    let mut md = String::from("# Split MNIST results\n\n| experiment | mean accuracy (%) | std (%) | published (%) |\n|---|---|---|---|\n");
    let mut csv = String::from("experiment,mean_accuracy,std_accuracy,published\n");
    for r in rows {
        let published = r.reference.map_or(String::from("-"), |v| format!("{v:.1}"));
        let _ = writeln!(
            md,
            "| {} | {:.2} | {:.2} | {} |",
            r.experiment,
            100.0 * r.mean_accuracy,
            100.0 * r.std_accuracy,
            published
        );
        let _ = writeln!(
            csv,
            "{},{:.6},{:.6},{}",
            r.experiment,
            r.mean_accuracy,
            r.std_accuracy,
            r.reference.map_or(String::new(), |v| format!("{:.4}", v / 100.0))
        );
    }
    md.push_str("\n## Emulator agreement\n\n| seed | samples | mismatched samples | reference acc (%) | emulated acc (%) |\n|---|---|---|---|---|\n");
    for (seed, c) in compares {
        let _ = writeln!(
            md,
            "| {seed} | {} | {} | {:.2} | {:.2} |",
            c.samples,
            c.mismatched_samples,
            100.0 * c.reference_accuracy,
            100.0 * c.emulated_accuracy
        );
    }
    (md, csv)
}

fn published(mode: ExperimentMode) -> f64 {
    match mode {
        ExperimentMode::InterleavedNoDendrites => 97.0,
        ExperimentMode::SequentialNoDendrites => 69.4,
        ExperimentMode::SequentialWithDendrites => 88.3,
    }
}

fn cmd_full(args: &FullArgs, file: &FileConfig) -> Result<i32> {
    let base = resolve_spec(&args.spec, file, ExperimentMode::SequentialWithDendrites)?;
    let data_args = resolve_data(&args.data, file);
    let out = resolve_out(&args.out, file);
    let specs: Vec<ExperimentSpec> = ExperimentMode::ALL
        .iter()
        .map(|&mode| ExperimentSpec {
            mode,
            ..base.clone()
        })
        .collect();
    if args.dry_run {
        for spec in &specs {
            print!("{}", plan_lines(spec, &out));
        }
        println!("then quantize and compare every {} seed", ExperimentMode::SequentialWithDendrites);
        return Ok(0);
    }
    let data = load_data(&data_args)?;
    let mut rows = Vec::new();
    for spec in &specs {
        let outcome = train_mode(spec, &data, &data_args, &out, args.resume, None)?;
        let s = outcome.summary.expect("full run completes every seed");
        rows.push(ReportRow {
            experiment: spec.mode.to_string(),
            mean_accuracy: s.mean_final_accuracy,
            std_accuracy: s.std_final_accuracy,
            reference: Some(published(spec.mode)),
        });
    }

    let dendritic = specs.last().expect("three modes");
    let mut compares = Vec::new();
    let mut quantized = Vec::new();
    for &seed in &dendritic.seeds {
        let dir = seed_dir(&out, dendritic.mode, seed);
        let ck = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
        let q = quantize_model(&ck.network)?;
        let image = export_memory_image(&q)?;
        image.save(&dir.join(IMAGE_FILE))?;
        let samples = test_step_samples(&data, q.t_max, None);
        let report = compare(&q, &image, &samples)?;
        let per_task = quantized_accuracy(&q, &data)?;
        quantized.push(per_task.iter().sum::<f64>() / per_task.len() as f64);
        write_json(&dir.join("compare.json"), &report)?;
        compares.push((seed, report));
    }
    let (m, s) = crate::harness::mean_std(&quantized);
    rows.push(ReportRow {
        experiment: format!("{} quantized", dendritic.mode),
        mean_accuracy: m,
        std_accuracy: s,
        reference: Some(80.0),
    });
    let (md, csv) = render_report(&rows, &compares);
    write_file(&out.join("report.md"), md.as_bytes())?;
    write_file(&out.join("report.csv"), csv.as_bytes())?;
    print!("{md}");
    let mismatches: usize = compares.iter().map(|(_, c)| c.mismatch_count).sum();
    Ok(if mismatches == 0 { 0 } else { 1 })
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = cli
        .config
        .as_deref()
        .map(FileConfig::load)
        .transpose()
        .map(Option::unwrap_or_default)
        .and_then(|file| match &cli.command {
            Command::Train(a) => cmd_train(a, &file),
            Command::Evaluate(a) => cmd_evaluate(a, &file),
            Command::Quantize(a) => cmd_quantize(a, &file),
            Command::Emulate(a) => cmd_emulate(a, &file),
            Command::Compare(a) => cmd_compare(a, &file),
            Command::FullPaper(a) => cmd_full(a, &file),
        });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..4").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_seeds("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("1, 5,9").unwrap(), vec![1, 5, 9]);
        assert!(parse_seeds("4..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let file = FileConfig {
            batch_size: Some(32),
            epochs_per_task: Some(2),
            seeds: Some("0..1".into()),
            ..FileConfig::default()
        };
        let args = SpecArgs {
            batch_size: Some(8),
            ..SpecArgs::default()
        };
        let spec = resolve_spec(&args, &file, ExperimentMode::SequentialNoDendrites).unwrap();
        assert_eq!(spec.batch_size, 8);
        assert_eq!(spec.epochs_per_task, 2);
        assert_eq!(spec.seeds, vec![0, 1]);
        assert_eq!(spec.mode, ExperimentMode::SequentialNoDendrites);
    }

    #[test]
    fn config_file_parses() {
        let file: FileConfig = toml::from_str(
            "mode = \"interleaved-no-dendrites\"\nbatch-size = 4\nhidden = [8, 8]\ndendrite-grad-mode = \"direct\"\n",
        )
        .unwrap();
        assert_eq!(file.mode, Some(ExperimentMode::InterleavedNoDendrites));
        assert_eq!(file.hidden, Some(vec![8, 8]));
        assert_eq!(file.dendrite_grad_mode, Some(DendriteGradMode::Direct));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }

    #[test]
    fn flip_spec() {
        assert_eq!(parse_flip("1:20:3").unwrap(), (1, 20, 3));
        assert!(parse_flip("1:2").is_err());
    }
}
