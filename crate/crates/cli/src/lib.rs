//! The `affect` command line.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use affect_core::corpus::{load_manifest, stratified_split, CorpusError, ManifestEntry};
use affect_core::dataset::{build_samples, read_clip, DatasetError, Featurizer};
use affect_core::evalmetrics::{
    confusion, per_emotion_error, render_error_csv, render_error_json, render_error_table, EmotionRates,
};
use affect_core::fixtures::{generate_corpus, write_session, FixtureConfig};
use affect_core::nn::{load_model, save_model, train_with_progress, AdamConfig, Arch, Model, NnError, TrainConfig};
use affect_core::pipeline::transcript::{read_sidecar, sidecar_path, StaticTranscriber, TimedTranscript};
use affect_core::pipeline::{analyze_session, PipelineError, SessionConfig};
use affect_core::{EmotionLabel, NUM_EMOTIONS};
use affect_service::{Engine, ServiceConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Analysis(_) => 4,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Feature(_) | DatasetError::Nn(_) => CliError::Analysis(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Audio(_) | PipelineError::Transcript(_) => CliError::Data(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}

fn model_error(path: &Path) -> impl FnOnce(NnError) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "affect",
    version,
    about = "Speech emotion analysis: train, evaluate, analyze and serve"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier on the training split of a manifest.
    Train(TrainArgs),
    /// Per-emotion error report for one or more models on a split.
    Eval(EvalArgs),
    /// Analyze one recording and print the analysis JSON.
    Analyze(AnalyzeArgs),
    /// Write the synthetic tone corpus, its manifest and a demo session.
    Fixtures(FixturesArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write an untrained model.
    Init(InitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Seed of the stratified split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value = "dnn")]
    pub arch: Arch,
    #[arg(long, default_value_t = 600)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Seed for initialization and shuffling; defaults to the split seed.
    #[arg(long)]
    pub train_seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-epoch loss as `epoch,loss` CSV.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file; repeat to fill both columns (DNN or FUSED, and CNN).
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long = "split", value_enum, default_value_t = SplitArg::Test)]
    pub split_name: SplitArg,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    /// Timed transcript; defaults to the `.words.json` next to the WAV if present.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    pub window: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hop: f64,
    #[arg(long, default_value_t = 20)]
    pub bins_per_second: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 24)]
    pub clips_per_emotion: usize,
    #[arg(long, default_value_t = 1.0)]
    pub clip_seconds: f64,
    #[arg(long, default_value_t = 2019)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Return from uploads immediately and analyze in the background.
    #[arg(long)]
    pub deferred: bool,
    /// First value of the ID counter.
    #[arg(long, default_value_t = 0)]
    pub id_seed: u64,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long, default_value = "dnn")]
    pub arch: Arch,
    /// All-zero parameters: every prediction is uniform and reports neutral.
    #[arg(long)]
    pub zero: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Fixtures(a) => cmd_fixtures(&a),
        Command::Serve(a) => cmd_serve(&a),
        Command::Init(a) => cmd_init(&a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_split(args: &SplitArgs) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>, usize), CliError> {
    if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "--train-fraction must be in (0, 1), got {}",
            args.train_fraction
        )));
    }
    let entries = load_manifest(&args.manifest)?;
    let (train, test) = stratified_split(&entries, args.train_fraction, args.seed)?;
    Ok((train, test, entries.len()))
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let (train, _, total) = load_split(&args.split)?;
    let featurizer = Featurizer::default();
    let spec = featurizer.default_spec(args.arch);
    println!(
        "training {} on {} of {} entries for {} epochs",
        args.arch,
        train.len(),
        total,
        args.epochs
    );
    let samples = build_samples(&train, &featurizer, &spec)?;
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        adam: AdamConfig {
            learning_rate: args.learning_rate,
            ..AdamConfig::default()
        },
        seed: args.train_seed.unwrap_or(args.split.seed),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let outcome = train_with_progress(&samples, spec, &config, &mut |epoch, loss| {
        println!("epoch {epoch} loss {loss:.6}");
    })
    .map_err(|e| CliError::Analysis(e.to_string()))?;
    save_model(&outcome.model, &args.out).map_err(model_error(&args.out))?;
    if let Some(path) = &args.loss_csv {
        emit(Some(path), &affect_core::nn::loss_history_csv(&outcome.loss_history))?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Predictions of `model` on `entries`, in entry order.
pub fn predict_entries(
    model: &Model,
    entries: &[ManifestEntry],
    featurizer: &Featurizer,
) -> Result<Vec<EmotionLabel>, CliError> {
    let samples = build_samples(entries, featurizer, model.spec())?;
    samples
        .iter()
        .map(|s| {
            model
                .predict(&s.input)
                .map(|d| d.top())
                .map_err(|e| CliError::Analysis(e.to_string()))
        })
        .collect()
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let (train, test, total) = load_split(&args.split)?;
    let entries = match args.split_name {
        SplitArg::Train => train,
        SplitArg::Test => test,
    };
    eprintln!(
        "split {}: {} of {} entries (train fraction {}, seed {})",
        match args.split_name {
            SplitArg::Train => "train",
            SplitArg::Test => "test",
        },
        entries.len(),
        total,
        args.split.train_fraction,
        args.split.seed
    );
    let featurizer = Featurizer::default();
    let truths: Vec<EmotionLabel> = entries.iter().map(|e| e.emotion).collect();
    let mut dnn: Option<EmotionRates> = None;
    let mut cnn: Option<EmotionRates> = None;
    for path in &args.models {
        let model = load_model(path).map_err(model_error(path))?;
        let arch = model.spec().arch;
        let column = if arch == Arch::Cnn { &mut cnn } else { &mut dnn };
        if column.is_some() {
            return Err(CliError::Usage(format!(
                "{}: a model for the {} column was already given",
                path.display(),
                if arch == Arch::Cnn { "CNN" } else { "DNN" }
            )));
        }
        let predictions = predict_entries(&model, &entries, &featurizer)?;
        let matrix = confusion(&predictions, &truths).map_err(|e| CliError::Analysis(e.to_string()))?;
        if let Some(acc) = matrix.overall_accuracy() {
            eprintln!(
                "{} ({arch}): accuracy {acc:.4} ({}/{})",
                path.display(),
                matrix.correct(),
                matrix.total()
            );
        }
        *column = Some(per_emotion_error(&matrix));
    }
    let dnn = dnn.unwrap_or([None; NUM_EMOTIONS]);
    let cnn = cnn.unwrap_or([None; NUM_EMOTIONS]);
    let report = match args.format {
        ReportFormat::Table => render_error_table(&dnn, &cnn),
        ReportFormat::Csv => render_error_csv(&dnn, &cnn),
        ReportFormat::Json => render_error_json(&dnn, &cnn) + "\n",
    };
    emit(args.out.as_deref(), &report)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let model = load_model(&args.model).map_err(model_error(&args.model))?;
    let clip = read_clip(&args.wav)?;
    let transcript = match &args.transcript {
        Some(path) => Some(read_sidecar(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?),
        None => {
            let sidecar = sidecar_path(&args.wav);
            if sidecar.exists() {
                Some(read_sidecar(&sidecar).map_err(|e| CliError::Data(format!("{}: {e}", sidecar.display())))?)
            } else {
                None
            }
        }
    };
    let config = SessionConfig {
        window_s: args.window,
        hop_s: args.hop,
        bins_per_second: args.bins_per_second,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let asr = StaticTranscriber(transcript.unwrap_or_else(TimedTranscript::default));
    let analysis = analyze_session(&clip, &model, &Featurizer::default(), &asr, &config)?;
    let json = serde_json::to_string_pretty(&analysis).expect("analysis serializes");
    emit(args.out.as_deref(), &(json + "\n"))
}

pub fn cmd_fixtures(args: &FixturesArgs) -> Result<(), CliError> {
    if args.clips_per_emotion == 0 || args.clip_seconds.is_nan() || args.clip_seconds <= 0.0 {
        return Err(CliError::Usage(
            "--clips-per-emotion and --clip-seconds must be positive".into(),
        ));
    }
    let config = FixtureConfig {
        clips_per_emotion: args.clips_per_emotion,
        clip_seconds: args.clip_seconds,
        seed: args.seed,
        ..FixtureConfig::default()
    };
    let entries = generate_corpus(&args.out, &config).map_err(|e| CliError::Data(e.to_string()))?;
    let session = write_session(&args.out, args.seed).map_err(|e| CliError::Data(e.to_string()))?;
    println!(
        "wrote {} clips and {}",
        entries.len(),
        args.out.join("manifest.csv").display()
    );
    println!("wrote {} and {}", session.display(), sidecar_path(&session).display());
    Ok(())
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let model = load_model(&args.model).map_err(model_error(&args.model))?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
    let config = ServiceConfig {
        deferred: args.deferred,
        id_seed: args.id_seed,
        ..ServiceConfig::new(&args.store)
    };
    let engine = Engine::new(model, Featurizer::default(), SessionConfig::default());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    eprintln!("listening on http://{addr}, store {}", args.store.display());
    runtime
        .block_on(affect_service::serve(&config, engine, addr))
        .map_err(|e| CliError::Data(e.to_string()))
}

pub fn cmd_init(args: &InitArgs) -> Result<(), CliError> {
    let spec = Featurizer::default().default_spec(args.arch);
    let model = if args.zero {
        Model::zeros(spec)
    } else {
        Model::init(spec, &mut rand_chacha::ChaCha8Rng::seed_from_u64(args.seed))
    }
    .map_err(|e| CliError::Analysis(e.to_string()))?;
    save_model(&model, &args.out).map_err(model_error(&args.out))?;
    println!("wrote {}", args.out.display());
    Ok(())
}
