//! Command-line front end. [`run_from`] parses arguments, runs one
//! subcommand and returns the process exit code:
//! 0 success, 2 usage or validation, 3 training or convergence, 4 data format.

use std::ffi::OsString;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use indexmap::IndexMap;
use ndarray::Array2;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::cv::{self, CvError, CvSummary, FoldSummary, TrainOutcome};
use crate::dataset::{self, DatasetError, DatasetManifest, Layout, SampleRef, Split};
use crate::features::{self, FeatureError, FeatureVector, DEFAULT_SCALE, DEFAULT_SIDE};
use crate::interchange::{self, InterchangeError, PredictionFile, PredictionHeader, PredictionRecord};
use crate::metrics::{self, ClassReport, MetricsError, ReportFormat};
use crate::svg;
use crate::svm::{self, Gamma, KernelConfig, KernelKind, SolverConfig, SvmError, SvmModel};
use crate::util;

pub const CACHE_DIR_ENV: &str = "FOODBENCH_CACHE_DIR";
pub const PRODUCER: &str = "svm-core";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "foodbench", version, about = "Raw-pixel SVM benchmark toolkit")]
pub struct Cli {
    /// TOML file with defaults; top-level `seed`/`threads` plus one table per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit wall-clock timestamps from outputs.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan an image tree and write a dataset manifest.
    Ingest(IngestArgs),
    /// Re-split a manifest per class by the given fractions.
    Split(SplitArgs),
    /// Train a one-vs-one SVM on raw pixels.
    TrainSvm(TrainArgs),
    /// Predict a manifest split and write a .predjsonl file.
    Predict(PredictArgs),
    /// Build a classification report from a .predjsonl file.
    Evaluate(EvaluateArgs),
    /// Compare two .predjsonl files over the same samples.
    Compare(CompareArgs),
    /// Stratified k-fold cross-validation of the SVM.
    Crossval(CrossvalArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    root: PathBuf,
    /// split-first or class-first.
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Train, validation and test fractions, comma separated.
    #[arg(long)]
    fractions: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SvmFlags {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    /// `scale` or a positive number.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    coef0: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_passes: Option<usize>,
    /// Images are resized to side × side before flattening.
    #[arg(long)]
    side: Option<u32>,
    /// Keep the validation split separate instead of training on it.
    #[arg(long)]
    no_merge_validation: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    svm: SvmFlags,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// train, validation, test or all.
    #[arg(long)]
    split: Option<String>,
    /// Defaults to the side implied by the model's feature dimension.
    #[arg(long)]
    side: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Any of text, json, csv; comma separated.
    #[arg(long)]
    formats: Option<String>,
    /// Also write a confusion-matrix SVG.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct CrossvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    svm: SvmFlags,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn training(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_TRAINING,
            message: message.into(),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Json { .. } | DatasetError::SchemaMismatch { .. } | DatasetError::Io { .. } => {
                CliError::data(e.to_string())
            }
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<SvmError> for CliError {
    fn from(e: SvmError) -> Self {
        match e {
            SvmError::SchemaMismatch { .. } | SvmError::CorruptModel(_) | SvmError::Io { .. } => {
                CliError::data(e.to_string())
            }
            SvmError::DimensionMismatch { .. }
            | SvmError::ConvergenceFailure { .. }
            | SvmError::Pair { .. } => CliError::training(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<InterchangeError> for CliError {
    fn from(e: InterchangeError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<CvError> for CliError {
    fn from(e: CvError) -> Self {
        match e {
            CvError::InvalidK(_) | CvError::TooFewSamples { .. } => CliError::usage(e.to_string()),
            _ => CliError::training(e.to_string()),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::data(format!("{}: {e}", parent.display())))?;
    }
    util::write_atomic(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Values from the optional TOML config file.
struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile {
                table: toml::Table::new(),
            });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Ok(ConfigFile { table })
    }

    fn get<T: DeserializeOwned>(&self, section: Option<&str>, key: &str) -> Result<Option<T>, CliError> {
        let table = match section {
            Some(s) => match self.table.get(s) {
                Some(toml::Value::Table(t)) => t,
                Some(_) => return Err(CliError::usage(format!("config: [{s}] must be a table"))),
                None => return Ok(None),
            },
            None => &self.table,
        };
        match table.get(key) {
            None => Ok(None),
            Some(v) => v.clone().try_into().map(Some).map_err(|e| {
                let at = section.map(|s| format!("{s}.")).unwrap_or_default();
                CliError::usage(format!("config: {at}{key}: {e}"))
            }),
        }
    }
}

/// Flag, else config file, else default; records the winner for the echo.
struct Resolver<'a> {
    config: &'a ConfigFile,
    section: &'a str,
    echo: Map<String, Value>,
}

impl<'a> Resolver<'a> {
    fn pick<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: DeserializeOwned + Serialize,
    {
        let value = match flag {
            Some(v) => v,
            None => self.config.get(Some(self.section), key)?.unwrap_or(default),
        };
        self.echo.insert(
            key.to_string(),
            serde_json::to_value(&value).expect("config values serialize"),
        );
        Ok(value)
    }

    fn record(&mut self, key: &str, value: impl Serialize) {
        self.echo.insert(
            key.to_string(),
            serde_json::to_value(value).expect("config values serialize"),
        );
    }
}

struct Globals {
    seed: u64,
    timestamps: bool,
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Prints the resolved configuration and stores it next to the main output.
fn echo_config(command: &str, echo: Map<String, Value>, sidecar: &Path, g: &Globals) -> Result<(), CliError> {
    let mut doc = Map::new();
    doc.insert("command".into(), json!(command));
    doc.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    doc.insert("resolved".into(), Value::Object(echo));
    if g.timestamps {
        doc.insert("created_at".into(), json!(now_rfc3339()));
    }
    let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("echo serializes") + "\n";
    eprint!("resolved config: {text}");
    write_file(sidecar, text.as_bytes())
}

fn sidecar_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = ConfigFile::load(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(s) => s,
        None => config.get(None, "seed")?.unwrap_or(0),
    };
    let threads: Option<usize> = match cli.threads {
        Some(t) => Some(t),
        None => config.get(None, "threads")?,
    };
    if threads == Some(0) {
        return Err(CliError::usage("--threads must be positive"));
    }
    let globals = Globals {
        seed,
        timestamps: !cli.no_timestamp,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Ingest(a) => cmd_ingest(a, &config, &globals),
        Command::Split(a) => cmd_split(a, &config, &globals),
        Command::TrainSvm(a) => cmd_train_svm(a, &config, &globals),
        Command::Predict(a) => cmd_predict(a, &config, &globals),
        Command::Evaluate(a) => cmd_evaluate(a, &config, &globals),
        Command::Compare(a) => cmd_compare(a, &config, &globals),
        Command::Crossval(a) => cmd_crossval(a, &config, &globals),
    })
}

fn cmd_ingest(a: IngestArgs, config: &ConfigFile, g: &Globals) -> Result<(), CliError> {
    let mut r = Resolver {
        config,
        section: "ingest",
        echo: Map::new(),
    };
    r.record("root", &a.root);
    let layout_name = r.pick("layout", a.layout, "split-first".to_string())?;
    let layout: Layout = layout_name.parse().map_err(CliError::usage)?;
    r.record("out", &a.out);
    echo_config("ingest", r.echo, &sidecar_for(&a.out), g)?;

    let outcome = dataset::scan_dataset(&a.root, layout)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::data(format!("{}: {e}", parent.display())))?;
    }
    dataset::write_manifest(&outcome.manifest, &a.out)?;
    if !outcome.warnings.is_empty() {
        let mut path = a.out.as_os_str().to_owned();
        path.push(".warnings.json");
        dataset::write_warnings(&outcome.warnings, Path::new(&path))?;
        eprintln!("{} unreadable files skipped", outcome.warnings.len());
    }
    print!("{}", outcome.manifest.summary_table());
    Ok(())
}

fn parse_fractions(s: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::usage(format!("--fractions {s:?}: {e}")))?;
    <[f64; 3]>::try_from(parts)
        .map_err(|_| CliError::usage(format!("--fractions {s:?} needs three values")))
}

fn cmd_split(a: SplitArgs, config: &ConfigFile, g: &Globals) -> Result<(), CliError> {
    let mut r = Resolver {
        config,
        section: "split",
        echo: Map::new(),
    };
    r.record("manifest", &a.manifest);
    let fractions = r.pick("fractions", a.fractions, "0.7,0.15,0.15".to_string())?;
    let fractions = parse_fractions(&fractions)?;
    r.record("seed", g.seed);
    r.record("out", &a.out);
    echo_config("split", r.echo, &sidecar_for(&a.out), g)?;

    let m = dataset::read_manifest(&a.manifest)?;
    let resplit = dataset::stratified_split(m.samples(), fractions, g.seed)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::data(format!("{}: {e}", parent.display())))?;
    }
    dataset::write_manifest(&resplit, &a.out)?;
    print!("{}", resplit.summary_table());
    Ok(())
}

struct SvmSettings {
    kernel: KernelConfig,
    solver: SolverConfig,
    side: u32,
    merge_validation: bool,
}

fn resolve_svm(flags: SvmFlags, r: &mut Resolver<'_>, seed: u64) -> Result<SvmSettings, CliError> {
    let defaults = SolverConfig::default();
    let kind: KernelKind = r
        .pick("kernel", flags.kernel, "rbf".to_string())?
        .parse()
        .map_err(CliError::usage)?;
    let gamma: Gamma = r
        .pick("gamma", flags.gamma, "scale".to_string())?
        .parse()
        .map_err(CliError::usage)?;
    let kernel = KernelConfig {
        kind,
        gamma,
        degree: r.pick("degree", flags.degree, 3)?,
        coef0: r.pick("coef0", flags.coef0, 0.0)?,
    };
    let solver = SolverConfig {
        c: r.pick("c", flags.c, defaults.c)?,
        tolerance: r.pick("tolerance", flags.tolerance, defaults.tolerance)?,
        max_passes: r.pick("max-passes", flags.max_passes, defaults.max_passes)?,
        cache_bytes: defaults.cache_bytes,
        seed,
    };
    r.record("seed", seed);
    let side = r.pick("side", flags.side, DEFAULT_SIDE)?;
    let merge_default: bool = r.config.get(Some(r.section), "merge-validation")?.unwrap_or(true);
    let merge_validation = !flags.no_merge_validation && merge_default;
    r.record("merge-validation", merge_validation);
    kernel.validate()?;
    solver.validate()?;
    if side == 0 {
        return Err(CliError::usage("--side must be positive"));
    }
    Ok(SvmSettings {
        kernel,
        solver,
        side,
        merge_validation,
    })
}

fn cache_key(samples: &[&SampleRef], side: u32, scale: f64) -> Result<String, CliError> {
    let digests: Vec<Vec<u8>> = samples
        .par_iter()
        .map(|s| {
            let mut f = std::fs::File::open(&s.path)
                .map_err(|e| CliError::data(format!("{}: {e}", s.path.display())))?;
            let mut h = Sha256::new();
            let mut buf = [0u8; 1 << 16];
            loop {
                let n = f
                    .read(&mut buf)
                    .map_err(|e| CliError::data(format!("{}: {e}", s.path.display())))?;
                if n == 0 {
                    break;
                }
                h.update(&buf[..n]);
            }
            Ok(h.finalize().to_vec())
        })
        .collect::<Result<_, CliError>>()?;
    let mut h = Sha256::new();
    h.update(features::CACHE_SCHEMA_VERSION.to_le_bytes());
    h.update(side.to_le_bytes());
    h.update(scale.to_le_bytes());
    for (s, d) in samples.iter().zip(&digests) {
        h.update((s.sample_id.len() as u64).to_le_bytes());
        h.update(s.sample_id.as_bytes());
        h.update(d);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Feature rows for `samples`, through the on-disk cache when
/// `FOODBENCH_CACHE_DIR` is set.
fn load_features(samples: &[&SampleRef], side: u32) -> Result<Array2<f64>, CliError> {
    let cache_path = match std::env::var_os(CACHE_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            let key = cache_key(samples, side, DEFAULT_SCALE)?;
            Some(PathBuf::from(dir).join(format!("{key}.fbfc")))
        }
        _ => None,
    };
    let cached = match &cache_path {
        Some(p) if p.exists() => match features::load_feature_cache(p) {
            Ok(v) if v.len() == samples.len() => Some(v),
            Ok(_) | Err(_) => {
                eprintln!("ignoring unusable feature cache {}", p.display());
                None
            }
        },
        _ => None,
    };
    let vectors = match cached {
        Some(v) => v,
        None => {
            let v: Vec<FeatureVector> = samples
                .par_iter()
                .map(|s| {
                    features::extract_file_features(&s.path, side, DEFAULT_SCALE)
                        .map(|f| f.with_id(s.sample_id.clone()).with_label(Some(s.label.id)))
                })
                .collect::<Result<_, _>>()?;
            if let Some(p) = &cache_path {
                if let Some(dir) = p.parent() {
                    let _ = std::fs::create_dir_all(dir);
                }
                if let Err(e) = features::save_feature_cache(p, &v) {
                    eprintln!("could not write feature cache: {e}");
                }
            }
            v
        }
    };
    let dim = (side * side * 3) as usize;
    let mut x = Array2::zeros((samples.len(), dim));
    for (mut row, v) in x.rows_mut().into_iter().zip(&vectors) {
        for (dst, &src) in row.iter_mut().zip(&v.values) {
            *dst = src as f64;
        }
    }
    Ok(x)
}

fn training_manifest(path: &Path, merge: bool) -> Result<DatasetManifest, CliError> {
    let m = dataset::read_manifest(path)?;
    Ok(if merge { dataset::merge_train_validation(&m) } else { m })
}

fn train_svm(
    x: ndarray::ArrayView2<'_, f64>,
    labels: &[usize],
    m: &DatasetManifest,
    s: &SvmSettings,
) -> Result<SvmModel, SvmError> {
    svm::train_multiclass(x, labels, m.classes(), &s.kernel, &s.solver)
}

fn accuracy(model: &SvmModel, x: ndarray::ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64, SvmError> {
    let preds = model.predict_batch(x)?;
    let correct = preds.iter().zip(labels).filter(|(p, &l)| p.class == l).count();
    Ok(correct as f64 / labels.len().max(1) as f64)
}

fn cmd_train_svm(a: TrainArgs, config: &ConfigFile, g: &Globals) -> Result<(), CliError> {
    let mut r = Resolver {
        config,
        section: "train-svm",
        echo: Map::new(),
    };
    r.record("manifest", &a.manifest);
    let settings = resolve_svm(a.svm, &mut r, g.seed)?;
    r.record("out", &a.out);
    echo_config("train-svm", r.echo, &sidecar_for(&a.out), g)?;

    let m = training_manifest(&a.manifest, settings.merge_validation)?;
    let train: Vec<&SampleRef> = m.samples_in(Split::Train).collect();
    if train.is_empty() {
        return Err(CliError::usage("no training samples in manifest"));
    }
    let labels: Vec<usize> = train.iter().map(|s| s.label.id).collect();
    let x = load_features(&train, settings.side)?;
    let model = train_svm(x.view(), &labels, &m, &settings)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::data(format!("{}: {e}", parent.display())))?;
    }
    svm::save_model(&model, &a.out)?;

    let train_accuracy = accuracy(&model, x.view(), &labels)?;
    let summary = json!({
        "n_train": train.len(),
        "classes": m.classes().iter().map(|c| &c.name).collect::<Vec<_>>(),
        "feature_dim": model.feature_dim(),
        "gamma_resolved": model.gamma_resolved(),
        "n_support": model.n_support(),
        "converged": model.converged(),
        "train_accuracy": train_accuracy,
        "pairs": model.binaries().iter().map(|b| json!({
            "positive": m.classes()[b.class_pair.0].name,
            "negative": m.classes()[b.class_pair.1].name,
            "n_support": b.n_support(),
            "converged": b.converged(),
            "iterations": b.diagnostics.iterations,
            "max_violation": b.diagnostics.max_violation,
        })).collect::<Vec<_>>(),
    });
    let mut summary_path = a.out.as_os_str().to_owned();
    summary_path.push(".summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_file(Path::new(&summary_path), text.as_bytes())?;

    println!(
        "trained {} machines on {} samples, {} support vectors, gamma {:.6e}, train accuracy {}",
        model.binaries().len(),
        train.len(),
        model.n_support(),
        model.gamma_resolved(),
        util::format_half_up(train_accuracy, 4)
    );
    for b in model.binaries() {
        println!(
            "  {} vs {}: {} SV, {}",
            m.classes()[b.class_pair.0].name,
            m.classes()[b.class_pair.1].name,
            b.n_support(),
            if b.converged() { "converged" } else { "NOT converged" }
        );
    }
    if !model.converged() {
        return Err(CliError::training(
            "at least one pairwise machine did not converge; model saved and flagged",
        ));
    }
    Ok(())
}

fn parse_split_filter(s: &str) -> Result<Option<Split>, CliError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(None);
    }
    Split::from_dir_name(s)
        .map(Some)
        .ok_or_else(|| CliError::usage(format!("unknown split {s:?} (expected train, validation, test or all)")))
}

fn side_from_dim(dim: usize) -> Option<u32> {
    let px = dim / 3;
    let side = (px as f64).sqrt().round() as usize;
    (dim % 3 == 0 && side * side == px).then_some(side as u32)
}

fn cmd_predict(a: PredictArgs, config: &ConfigFile, g: &Globals) -> Result<(), CliError> {
    let mut r = Resolver {
        config,
        section: "predict",
        echo: Map::new(),
    };
    r.record("model", &a.model);
    r.record("manifest", &a.manifest);
    let split_name = r.pick("split", a.split, "test".to_string())?;
    let filter = parse_split_filter(&split_name)?;
    let model = svm::load_model(&a.model)?;
    let side = match a.side.or(config.get(Some("predict"), "side")?) {
        Some(s) => s,
        None => side_from_dim(model.feature_dim()).ok_or_else(|| {
            CliError::usage(format!(
                "model feature dimension {} is not side × side × 3; pass --side",
                model.feature_dim()
            ))
        })?,
    };
    r.record("side", side);
    r.record("out", &a.out);
    echo_config("predict", r.echo, &sidecar_for(&a.out), g)?;

    let m = dataset::read_manifest(&a.manifest)?;
    let model_names: Vec<&str> = model.classes().iter().map(|c| c.name.as_str()).collect();
    let manifest_names: Vec<&str> = m.classes().iter().map(|c| c.name.as_str()).collect();
    if model_names != manifest_names {
        return Err(CliError::data(format!(
            "model classes {model_names:?} differ from manifest classes {manifest_names:?}"
        )));
    }
    let selected: Vec<&SampleRef> = m
        .samples()
        .iter()
        .filter(|s| filter.is_none_or(|f| s.split == f))
        .collect();
    if selected.is_empty() {
        return Err(CliError::usage("no samples selected"));
    }
    let x = load_features(&selected, side)?;
    let preds = model.predict_batch(x.view())?;
    let mut header = PredictionHeader::new(PRODUCER, model_names.iter().map(|s| s.to_string()).collect());
    if g.timestamps {
        header.created_at = Some(now_rfc3339());
    }
    let records = selected
        .iter()
        .zip(&preds)
        .map(|(s, p)| {
            let mut rec = PredictionRecord::new(&s.sample_id, &s.label.name, model_names[p.class]);
            rec.scores = Some(
                model_names
                    .iter()
                    .zip(&p.scores)
                    .map(|(n, &v)| (n.to_string(), v))
                    .collect::<IndexMap<_, _>>(),
            );
            rec
        })
        .collect();
    let file = PredictionFile::new(header, records)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::data(format!("{}: {e}", parent.display())))?;
    }
    interchange::save_predictions(&file, &a.out)?;
    let correct = file.records.iter().filter(|r| r.actual == r.predicted).count();
    println!(
        "{} predictions written, {} correct ({})",
        file.records.len(),
        correct,
        util::format_percent(correct as f64 / file.records.len() as f64)
    );
    Ok(())
}

fn parse_formats(s: &str) -> Result<Vec<ReportFormat>, CliError> {
    s.split(',')
        .map(|f| match f.trim() {
            "text" | "txt" => Ok(ReportFormat::TextTable),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(CliError::usage(format!("unknown report format {other:?}"))),
        })
        .collect()
}

fn write_report(r: &ClassReport, dir: &Path, formats: &[ReportFormat]) -> Result<(), CliError> {
    for &f in formats {
        let name = match f {
            ReportFormat::TextTable => "report.txt",
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
        };
        write_file(&dir.join(name), metrics::render_report(r, f).as_bytes())?;
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, config: &ConfigFile, g: &Globals) -> Result<(), CliError> {
    let mut r = Resolver {
        config,
        section: "evaluate",
        echo: Map::new(),
    };
    r.record("predictions", &a.predictions);
    let formats_s = r.pick("formats", a.formats, "text,json".to_string())?;
    let formats = parse_formats(&formats_s)?;
    let want_svg = a.svg || config.get(Some("evaluate"), "svg")?.unwrap_or(false);
    r.record("svg", want_svg);
    r.record("out-dir", &a.out_dir);
    echo_config("evaluate", r.echo, &a.out_dir.join("run.json"), g)?;

    let file = interchange::load_predictions(&a.predictions)?;
    let report = file.evaluate()?;
    report
        .check_invariants()
        .map_err(|e| CliError::data(format!("report invariant violated: {e}")))?;
    write_report(&report, &a.out_dir, &formats)?;
    if want_svg {
        let title = format!("Confusion matrix: {}", file.header.producer);
        write_file(
            &a.out_dir.join("confusion.svg"),
            svg::confusion_svg(&report.confusion, &title).as_bytes(),
        )?;
    }
    print!("{}", metrics::render_report(&report, ReportFormat::TextTable));
    Ok(())
}

fn cmd_compare(a: CompareArgs, config: &ConfigFile, g: &Globals) -> Result<(), CliError> {
    let mut r = Resolver {
        config,
        section: "compare",
        echo: Map::new(),
    };
    r.record("a", &a.a);
    r.record("b", &a.b);
    r.record("out-dir", &a.out_dir);
    echo_config("compare", r.echo, &a.out_dir.join("run.json"), g)?;

    let fa = interchange::load_predictions(&a.a)?;
    let fb = interchange::load_predictions(&a.b)?;
    let c = interchange::compare(&fa, &fb)?;
    let text = interchange::comparison_text(&c);
    write_file(&a.out_dir.join("comparison.json"), interchange::comparison_json(&c).as_bytes())?;
    write_file(&a.out_dir.join("comparison.txt"), text.as_bytes())?;
    write_file(&a.out_dir.join("comparison.svg"), interchange::comparison_svg(&c).as_bytes())?;
    print!("{text}");
    Ok(())
}

fn cmd_crossval(a: CrossvalArgs, config: &ConfigFile, g: &Globals) -> Result<(), CliError> {
    let mut r = Resolver {
        config,
        section: "crossval",
        echo: Map::new(),
    };
    r.record("manifest", &a.manifest);
    let k = r.pick("k", a.k, 5usize)?;
    let settings = resolve_svm(a.svm, &mut r, g.seed)?;
    r.record("out-dir", &a.out_dir);
    echo_config("crossval", r.echo, &a.out_dir.join("run.json"), g)?;

    let m = training_manifest(&a.manifest, settings.merge_validation)?;
    let pool: Vec<&SampleRef> = m.samples_in(Split::Train).collect();
    let labels: Vec<usize> = pool.iter().map(|s| s.label.id).collect();
    let plan = cv::plan_folds(&labels, k, g.seed)?;
    for w in plan.warnings() {
        eprintln!("warning: {w}");
    }
    let x = load_features(&pool, settings.side)?;

    let trainer = |idx: &[usize]| -> Result<TrainOutcome<SvmModel>, SvmError> {
        let xs = x.select(ndarray::Axis(0), idx);
        let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        train_svm(xs.view(), &ys, &m, &settings).map(TrainOutcome::new)
    };
    let evaluator = |model: &SvmModel, idx: &[usize]| -> Result<ClassReport, SvmError> {
        let xs = x.select(ndarray::Axis(0), idx);
        let preds = model.predict_batch(xs.view())?;
        let pairs: Vec<(usize, usize)> = idx.iter().zip(&preds).map(|(&i, p)| (labels[i], p.class)).collect();
        metrics::evaluate(&pairs, m.classes()).map_err(|e| SvmError::InvalidConfig(e.to_string()))
    };
    let results = cv::run_cv(&plan, trainer, evaluator)?;
    let best = cv::select_best(&results)?;

    let mut folds = Vec::with_capacity(results.len());
    for res in &results {
        let dir = format!("fold-{}", res.fold);
        write_report(&res.val_metrics, &a.out_dir.join(&dir), &[ReportFormat::Json, ReportFormat::TextTable])?;
        let model_ref = format!("{dir}/model.fbsvm");
        svm::save_model(&res.model, &a.out_dir.join(&model_ref))?;
        folds.push(FoldSummary {
            fold: res.fold,
            val_accuracy: res.val_metrics.accuracy,
            report_path: format!("{dir}/report.json"),
            model_ref,
        });
        println!(
            "fold {}: {} validation samples, accuracy {}{}",
            res.fold,
            res.val_metrics.total_support,
            util::format_half_up(res.val_metrics.accuracy, 4),
            if res.model.converged() { "" } else { " (not converged)" }
        );
    }
    svm::save_model(&best.model, &a.out_dir.join("best-model.fbsvm"))?;
    let summary = CvSummary {
        schema_version: cv::CV_SUMMARY_SCHEMA_VERSION,
        k,
        seed: g.seed,
        stratified: true,
        folds,
        best_fold: best.fold,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_file(&a.out_dir.join("cv_summary.json"), text.as_bytes())?;
    println!("best fold: {}", best.fold);
    if results.iter().any(|r| !r.model.converged()) {
        return Err(CliError::training("a fold model did not converge; outputs saved and flagged"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn side_inference() {
        assert_eq!(side_from_dim(100 * 100 * 3), Some(100));
        assert_eq!(side_from_dim(12), Some(2));
        assert_eq!(side_from_dim(10), None);
    }

    #[test]
    fn fractions_parse() {
        assert_eq!(parse_fractions("0.7, 0.15,0.15").unwrap(), [0.7, 0.15, 0.15]);
        assert_eq!(parse_fractions("1,0").unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero_and_bad_flag_two() {
        assert_eq!(run_from(["foodbench", "--help"]), EXIT_OK);
        assert_eq!(run_from(["foodbench", "train-svm", "--bogus"]), EXIT_USAGE);
    }

    #[test]
    fn flag_beats_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("c.toml");
        std::fs::write(&cfg_path, "[train-svm]\nc = 5.0\nkernel = \"linear\"\n").unwrap();
        let cfg = ConfigFile::load(Some(&cfg_path)).unwrap();
        let mut r = Resolver {
            config: &cfg,
            section: "train-svm",
            echo: Map::new(),
        };
        let flags = SvmFlags {
            kernel: None,
            c: Some(2.0),
            gamma: None,
            degree: None,
            coef0: None,
            tolerance: None,
            max_passes: None,
            side: None,
            no_merge_validation: false,
        };
        let s = resolve_svm(flags, &mut r, 0).unwrap();
        assert_eq!(s.solver.c, 2.0);
        assert_eq!(s.kernel.kind, KernelKind::Linear);
        assert_eq!(r.echo["c"], json!(2.0));
        assert_eq!(r.echo["merge-validation"], json!(true));
    }
}
