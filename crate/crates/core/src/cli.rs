//! The `vfp` command line.
//!
//! Every subcommand is a thin wrapper over library operations. Runs that
//! produce files also write a resolved-config snapshot next to them; `vfp
//! replay` re-executes a step from that snapshot alone.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{read_wav, split_manifest, synth_corpus, Manifest, Split, SplitFractions, SynthSettings, ToyChannelSpec};
use crate::error::{Error, Result};
use crate::eval::{self, LabeledSet};
use crate::features::io::{feature_path, write_config_sidecar, write_features, write_spectrogram_csv, write_spectrogram_pgm};
use crate::features::{spectrogram_grid, Extractor, FeatureConfig, FeatureKind};
use crate::nnet::{Checkpoint, Model, ModelConfig, Variant};
use crate::trainer::{self, TrainConfig};

pub const SNAPSHOT_FILE: &str = "resolved_config.json";
pub const BEST_CHECKPOINT: &str = "model.vpck";
pub const LAST_CHECKPOINT: &str = "last.vpck";
pub const TRAIN_LOG: &str = "train.log";

#[derive(Debug, Parser)]
#[command(name = "vfp", version, about = "Vocoder fingerprinting toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Generate a synthetic multi-channel corpus with a manifest.
    SynthCorpus(SynthArgs),
    /// Assign speaker-disjoint train/dev/test splits.
    Split(SplitArgs),
    /// Extract LFCC or MFCC features for every manifest record.
    Extract(ExtractArgs),
    /// Train a classifier and keep the best-dev checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on one split and write a report.
    Eval(EvalArgs),
    /// Export fingerprint vectors for one split.
    Embed(EmbedArgs),
    /// Write a power spectrogram of one WAV file (PGM or CSV).
    Spectrogram(SpectrogramArgs),
    /// List model parameter tensors and the total count.
    Describe(DescribeArgs),
    /// Re-run a step from its resolved-config snapshot.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Comma-separated channel specs, e.g. `identity,griffin_lim:iterations=32`.
    #[arg(long, default_value = "identity,griffin_lim,mulaw,lowpass")]
    pub classes: String,
    /// Utterances per class (one base signal per utterance index).
    #[arg(long, default_value_t = 250)]
    pub per_class: usize,
    #[arg(long, default_value_t = 15)]
    pub speakers: usize,
    #[arg(long, default_value_t = 1.0)]
    pub min_duration: f64,
    #[arg(long, default_value_t = 2.0)]
    pub max_duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "0.6,0.2,0.2")]
    pub fractions: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to `manifest.split.tsv` beside the input manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExtractArgs {
    #[arg(long, default_value = "lfcc")]
    pub feature: String,
    /// JSON feature configuration; replaces the `--feature` defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mean_norm: bool,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, default_value = "resnet_staged")]
    pub model: String,
    #[arg(long, default_value = "lfcc")]
    pub feature: String,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory written by `extract`; when absent features are computed
    /// from the audio.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 300)]
    pub crop_frames: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.98)]
    pub beta2: f64,
    #[arg(long)]
    pub no_batch_norm: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpectrogramArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// `.pgm` for an image, anything else for CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "lfcc")]
    pub feature: String,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DescribeArgs {
    #[arg(long, default_value = "resnet_staged")]
    pub model: String,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value = "lfcc")]
    pub feature: String,
    /// Describe the model stored in a checkpoint instead.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Redirect the step's output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

/// Everything needed to repeat a step: the command with all flags resolved
/// and the effective configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSpec {
    pub command: Command,
    #[serde(default)]
    pub feature_config: Option<FeatureConfig>,
    #[serde(default)]
    pub model_config: Option<ModelConfig>,
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
}

impl RunSpec {
    fn new(command: Command) -> Self {
        RunSpec {
            command,
            feature_config: None,
            model_config: None,
            train_config: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("run spec serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingInput(_) | Error::OutputExists(_) => 2,
        _ => 1,
    }
}

fn error_line(kind: &str, message: &str) -> String {
    let escaped = message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    format!("error kind={kind} message=\"{escaped}\"")
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr as a single line.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("{}", error_line("usage", first));
            return 2;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            exit_code(&e)
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::SynthCorpus(a) => synth(a),
        Command::Split(a) => split(a),
        Command::Extract(a) => with_jobs(a.jobs, || extract(a.clone())),
        Command::Train(a) => train(a),
        Command::Eval(a) => with_jobs(a.jobs, || evaluate(a.clone())),
        Command::Embed(a) => with_jobs(a.jobs, || embed(a.clone())),
        Command::Spectrogram(a) => spectrogram(a),
        Command::Describe(a) => describe(a),
        Command::Replay(a) => replay(a),
    }
}

fn with_jobs(jobs: Option<usize>, f: impl FnOnce() -> Result<()> + Send) -> Result<()> {
    match jobs {
        None => f(),
        Some(0) => Err(Error::Config("--jobs must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Refuses to clobber an existing file or non-empty directory unless forced.
fn claim_output(path: &Path, force: bool) -> Result<()> {
    let occupied = if path.is_dir() {
        fs::read_dir(path).map_err(|e| Error::io(path, e))?.next().is_some()
    } else {
        path.exists()
    };
    if occupied && !force {
        return Err(Error::OutputExists(path.to_path_buf()));
    }
    Ok(())
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn file_snapshot_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".config.json");
    out.with_file_name(name)
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "dev" => Ok(Split::Dev),
        "test" => Ok(Split::Test),
        other => Err(Error::Config(format!("unknown split `{other}` (train, dev or test)"))),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let channels = a
        .classes
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<ToyChannelSpec>>>()?;
    let settings = SynthSettings {
        base_signals: a.per_class,
        min_duration_s: a.min_duration,
        max_duration_s: a.max_duration,
        ..Default::default()
    };
    claim_output(&a.out, a.force)?;
    make_dir(&a.out)?;
    let m = synth_corpus(&settings, &channels, a.speakers, a.seed, &a.out)?;
    RunSpec::new(Command::SynthCorpus(a.clone())).write(&a.out.join(SNAPSHOT_FILE))?;
    println!("wrote {} utterances in {} classes to {}", m.len(), m.n_classes(), a.out.display());
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let fractions: SplitFractions = a.fractions.parse()?;
    let m = Manifest::read(&a.manifest)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| manifest_dir(&a.manifest).join("manifest.split.tsv"));
    claim_output(&out, a.force)?;
    let split = split_manifest(&m, fractions, a.seed)?;
    split.write(&out)?;
    RunSpec::new(Command::Split(a)).write(&file_snapshot_path(&out))?;
    let count = |s| split.split_records(s).count();
    println!(
        "train={} dev={} test={} -> {}",
        count(Split::Train),
        count(Split::Dev),
        count(Split::Test),
        out.display()
    );
    Ok(())
}

fn feature_config(kind: &str, config: Option<&Path>, mean_norm: bool) -> Result<FeatureConfig> {
    let mut cfg = match config {
        Some(path) => {
            if !path.exists() {
                return Err(Error::MissingInput(path.to_path_buf()));
            }
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => FeatureConfig::for_kind(kind.parse::<FeatureKind>()?),
    };
    cfg.mean_norm |= mean_norm;
    cfg.validate()?;
    Ok(cfg)
}

fn extract(a: ExtractArgs) -> Result<()> {
    use rayon::prelude::*;
    let cfg = feature_config(&a.feature, a.config.as_deref(), a.mean_norm)?;
    let m = Manifest::read(&a.manifest)?;
    claim_output(&a.out, a.force)?;
    make_dir(&a.out)?;
    let root = manifest_dir(&a.manifest);
    let extractor = Extractor::new(&cfg)?;
    m.records().par_iter().try_for_each(|r| {
        let w = read_wav(root.join(&r.path))?;
        write_features(&feature_path(&a.out, &r.id), &extractor.extract(&w, &r.id)?)
    })?;
    write_config_sidecar(&a.out, &cfg)?;
    let mut spec = RunSpec::new(Command::Extract(a.clone()));
    spec.feature_config = Some(cfg.clone());
    spec.write(&a.out.join(SNAPSHOT_FILE))?;
    println!("extracted {} x {}-dim {} features to {}", m.len(), cfg.dims(), cfg.feature_kind.as_str(), a.out.display());
    Ok(())
}

fn load_split(manifest: &Manifest, manifest_path: &Path, split: Split, features: Option<&Path>, cfg: &FeatureConfig) -> Result<LabeledSet> {
    let set = match features {
        Some(dir) => LabeledSet::from_features_dir(manifest, split, dir)?,
        None => LabeledSet::extract(manifest, split, &manifest_dir(manifest_path), cfg)?,
    };
    if &set.feature_config != cfg {
        return Err(Error::Config(format!(
            "feature directory holds {} features with a different configuration than required",
            set.feature_config.feature_kind.as_str()
        )));
    }
    if set.is_empty() {
        return Err(Error::Data(format!("split `{}` has no utterances", split.as_str())));
    }
    Ok(set)
}

fn train(a: TrainArgs) -> Result<()> {
    let variant: Variant = a.model.parse()?;
    let kind: FeatureKind = a.feature.parse()?;
    let m = Manifest::read(&a.manifest)?;
    let fcfg = match &a.features {
        Some(dir) => {
            let cfg = crate::features::io::read_config_sidecar(dir)?;
            if cfg.feature_kind != kind {
                return Err(Error::Config(format!(
                    "--feature {} but {} holds {} features",
                    kind.as_str(),
                    dir.display(),
                    cfg.feature_kind.as_str()
                )));
            }
            cfg
        }
        None => FeatureConfig::for_kind(kind),
    };
    let mut mcfg = ModelConfig::new(variant, m.n_classes(), fcfg.dims());
    mcfg.batch_norm = !a.no_batch_norm;
    let tcfg = TrainConfig {
        lr0: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        batch_size: a.batch_size,
        epochs: a.epochs,
        crop_frames: a.crop_frames,
        seed: a.seed,
        ..Default::default()
    };
    tcfg.validate()?;
    mcfg.validate()?;
    claim_output(&a.out, a.force)?;
    let train_set = load_split(&m, &a.manifest, Split::Train, a.features.as_deref(), &fcfg)?;
    let dev_set = load_split(&m, &a.manifest, Split::Dev, a.features.as_deref(), &fcfg)?;
    make_dir(&a.out)?;
    let log_path = a.out.join(TRAIN_LOG);
    let mut log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut io_err = None;
    let result = trainer::train(&train_set, &dev_set, &mcfg, &tcfg, |record| {
        println!("{record}");
        if let Err(e) = writeln!(log, "{record}") {
            io_err.get_or_insert(e);
        }
    });
    if let Some(e) = io_err {
        return Err(Error::io(&log_path, e));
    }
    let outcome = match result {
        Ok(o) => o,
        Err(Error::TrainingAborted { epoch, step, reason, last_good }) => {
            if let Some(ck) = &last_good {
                ck.write(&a.out.join(BEST_CHECKPOINT))?;
            }
            return Err(Error::TrainingAborted { epoch, step, reason, last_good });
        }
        Err(e) => return Err(e),
    };
    outcome.best.write(&a.out.join(BEST_CHECKPOINT))?;
    outcome.last.write(&a.out.join(LAST_CHECKPOINT))?;
    let mut spec = RunSpec::new(Command::Train(a.clone()));
    spec.feature_config = Some(fcfg);
    spec.model_config = Some(mcfg);
    spec.train_config = Some(tcfg);
    spec.write(&a.out.join(SNAPSHOT_FILE))?;
    let best = outcome.best.trainer.as_ref().and_then(|t| t.dev_macro_f1).unwrap_or(0.0);
    println!("best dev macro-F1 {best:.6}; checkpoint {}", a.out.join(BEST_CHECKPOINT).display());
    Ok(())
}

fn load_for_scoring(checkpoint: &Path, manifest: &Path, features: Option<&Path>, split: &str) -> Result<(Checkpoint, Model<f32>, LabeledSet)> {
    let split = parse_split(split)?;
    let ck = Checkpoint::read(checkpoint)?;
    let model = ck.to_model::<f32>()?;
    let m = Manifest::read(manifest)?;
    if m.classes() != ck.class_names {
        return Err(Error::Config(format!(
            "class list mismatch: checkpoint has [{}], manifest has [{}]",
            ck.class_names.join(","),
            m.classes().join(",")
        )));
    }
    let fcfg = ck
        .feature_config
        .clone()
        .ok_or_else(|| Error::Checkpoint("checkpoint records no feature configuration".into()))?;
    let set = load_split(&m, manifest, split, features, &fcfg)?;
    Ok((ck, model, set))
}

fn evaluate(a: EvalArgs) -> Result<()> {
    claim_output(&a.out, a.force)?;
    let (ck, model, set) = load_for_scoring(&a.checkpoint, &a.manifest, a.features.as_deref(), &a.split)?;
    let report = eval::evaluate(&model, &ck.class_names, &set)?;
    report.write(&a.out)?;
    let mut spec = RunSpec::new(Command::Eval(a.clone()));
    spec.feature_config = ck.feature_config.clone();
    spec.model_config = Some(ck.model_config.clone());
    spec.write(&file_snapshot_path(&a.out))?;
    println!(
        "{} utterances: macro_f1={:.6} micro_f1={:.6} -> {}",
        report.n_utterances,
        report.macro_f1,
        report.micro_f1,
        a.out.display()
    );
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<()> {
    claim_output(&a.out, a.force)?;
    let (ck, model, set) = load_for_scoring(&a.checkpoint, &a.manifest, a.features.as_deref(), &a.split)?;
    let rows = eval::export_embeddings(&model, &ck.class_names, &set)?;
    eval::write_embeddings(&a.out, &rows)?;
    let mut spec = RunSpec::new(Command::Embed(a.clone()));
    spec.feature_config = ck.feature_config.clone();
    spec.model_config = Some(ck.model_config.clone());
    spec.write(&file_snapshot_path(&a.out))?;
    let sep = eval::separability(&rows).map(|s| format!("{s:.4}")).unwrap_or_else(|_| "n/a".into());
    println!("{} fingerprints, separability {sep} -> {}", rows.len(), a.out.display());
    Ok(())
}

fn spectrogram(a: SpectrogramArgs) -> Result<()> {
    let cfg = FeatureConfig::for_kind(a.feature.parse()?);
    claim_output(&a.out, a.force)?;
    let w = read_wav(&a.wav)?;
    let grid = spectrogram_grid(&w, &cfg)?;
    if a.out.extension().is_some_and(|e| e == "pgm") {
        write_spectrogram_pgm(&a.out, &grid)?;
    } else {
        write_spectrogram_csv(&a.out, &grid)?;
    }
    RunSpec::new(Command::Spectrogram(a.clone())).write(&file_snapshot_path(&a.out))?;
    println!("{} frames x {} bins -> {}", grid.len(), grid.first().map_or(0, Vec::len), a.out.display());
    Ok(())
}

/// One line per parameter tensor (`name<TAB>shape<TAB>count`) and a total.
pub fn describe_text(model: &Model<f32>) -> String {
    let mut s = String::new();
    for row in model.describe() {
        let shape: Vec<String> = row.shape.iter().map(usize::to_string).collect();
        s.push_str(&format!("{}\t{}\t{}\n", row.name, shape.join("x"), row.count));
    }
    s.push_str(&format!("total\t-\t{}\n", model.param_count()));
    s
}

fn describe(a: DescribeArgs) -> Result<()> {
    let model: Model<f32> = match &a.checkpoint {
        Some(path) => Checkpoint::read(path)?.to_model()?,
        None => {
            let dims = FeatureConfig::for_kind(a.feature.parse()?).dims();
            Model::new(&ModelConfig::new(a.model.parse()?, a.classes, dims), 0)?
        }
    };
    let text = describe_text(&model);
    match &a.out {
        Some(out) => {
            claim_output(out, a.force)?;
            fs::write(out, &text).map_err(|e| Error::io(out, e))?;
            let mut spec = RunSpec::new(Command::Describe(a.clone()));
            spec.model_config = Some(model.config().clone());
            spec.write(&file_snapshot_path(out))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let spec = RunSpec::read(&a.config)?;
    let mut command = spec.command;
    match &mut command {
        Command::SynthCorpus(c) => {
            c.force |= a.force;
            if let Some(o) = &a.out {
                c.out = o.clone();
            }
        }
        Command::Split(c) => {
            c.force |= a.force;
            if let Some(o) = &a.out {
                c.out = Some(o.clone());
            }
        }
        Command::Extract(c) => {
            c.force |= a.force;
            if let Some(o) = &a.out {
                c.out = o.clone();
            }
        }
        Command::Train(c) => {
            c.force |= a.force;
            if let Some(o) = &a.out {
                c.out = o.clone();
            }
        }
        Command::Eval(c) => {
            c.force |= a.force;
            if let Some(o) = &a.out {
                c.out = o.clone();
            }
        }
        Command::Embed(c) => {
            c.force |= a.force;
            if let Some(o) = &a.out {
                c.out = o.clone();
            }
        }
        Command::Spectrogram(c) => {
            c.force |= a.force;
            if let Some(o) = &a.out {
                c.out = o.clone();
            }
        }
        Command::Describe(c) => {
            c.force |= a.force;
            if a.out.is_some() {
                c.out = a.out.clone();
            }
        }
        Command::Replay(_) => return Err(Error::Config("a snapshot cannot hold a replay".into())),
    }
    run(command)
}
