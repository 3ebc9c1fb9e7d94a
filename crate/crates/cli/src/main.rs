//! Single command-line entry point for every workflow: synthetic data
//! generation, feature extraction, training, evaluation, pipeline runs,
//! latency benchmarks, and model inspection.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Every
//! subcommand is deterministic per seed, so rerunning with identical
//! flags rewrites identical output files.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emopipe::data::{
    build_tensors, load_legend, stratified_split, synth_generate, write_dataset_csvs, DropCounts,
    LabeledDataset, LoadConfig, Representation, SynthConfig, TensorSet,
};
use emopipe::eval::{bench_latency, evaluate};
use emopipe::features::FeatureKind;
use emopipe::nn::{
    load_model_file, save_model_file, AnyModel, CnnModel, MlpModel, TrainConfig, TrainHistory,
};
use emopipe::pipeline::{
    orchestrate, orchestrate_captured, Endpoints, FrameSource, PipelineConfig, DEFAULT_PORT_BASE,
};

/// Environment override for the pipeline port base; a `--port-base` flag
/// still wins over it.
const ENDPOINT_BASE_ENV: &str = "EMOPIPE_ENDPOINT_BASE";

fn main() -> ExitCode {
    match dispatch(&Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(reason)) => {
            eprintln!("error: {reason}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(reason)) => {
            eprintln!("error: {reason}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Features(args) => cmd_features(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
        Command::InspectModel(args) => cmd_inspect(args),
    }
}

/// Usage errors exit 2, everything that fails after parsing exits 1.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "emopipe", version, about = "Facial-landmark emotion recognition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a jittered synthetic landmark and legend CSV pair
    Synth(SynthArgs),
    /// Convert a landmark dataset into a feature CSV
    Features(FeaturesArgs),
    /// Train a classifier; writes a model file and an epoch history CSV
    Train(TrainArgs),
    /// Score a model; prints per-class certainty and accuracy
    Eval(EvalArgs),
    /// Run the four-worker pipeline; view lines stream to stdout
    Run(PipelineArgs),
    /// Run the pipeline and report classification latency statistics
    Bench(PipelineArgs),
    /// Print a model file's architecture, labels, and parameter count
    InspectModel(InspectArgs),
}

/// Where a labeled dataset comes from and how it is filtered.
#[derive(Args)]
struct DatasetArgs {
    /// Legend CSV with header and submitter,image_id,label rows
    #[arg(long, value_name = "CSV")]
    legend: PathBuf,
    /// Landmark CSV with header and image_id,label,x0,y0,..,x67,y67 rows
    #[arg(long, value_name = "CSV")]
    landmarks: PathBuf,
    /// Submitters dropped outright, comma separated
    #[arg(long, value_delimiter = ',', default_value = "jhamski,628")]
    exclude_submitters: Vec<String>,
    /// Emotion labels kept after filtering, comma separated
    #[arg(long, value_delimiter = ',', default_value = "happiness,neutral")]
    keep_labels: Vec<String>,
}

impl DatasetArgs {
    fn load(&self) -> Result<(LabeledDataset<f32>, DropCounts), CliError> {
        let config = LoadConfig {
            excluded_submitters: self.exclude_submitters.clone(),
            kept_labels: self.keep_labels.clone(),
        };
        Ok(load_legend(&self.legend, &self.landmarks, &config)?)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RepArg {
    /// All 68 coordinates scaled to the unit square (136 inputs)
    Absolute,
    /// Part geometry relative to anchor centroids (114 inputs)
    Modified,
    /// Binary occupancy grid for the convolutional model
    Raster,
}

/// Representation choice plus the raster-only knobs.
#[derive(Args)]
struct RepArgs {
    /// Input representation
    #[arg(long, value_enum, default_value_t = RepArg::Modified)]
    rep: RepArg,
    /// Grid edge length for --rep raster
    #[arg(long, value_name = "N", default_value_t = 350,
          value_parser = clap::value_parser!(u16).range(1..))]
    grid_size: u16,
    /// Append horizontally flipped grids after the originals (raster only)
    #[arg(long)]
    augment_flip: bool,
}

impl RepArgs {
    fn representation(&self) -> Representation {
        match self.rep {
            RepArg::Absolute => Representation::Absolute,
            RepArg::Modified => Representation::Modified,
            RepArg::Raster => Representation::Raster {
                grid_size: self.grid_size as usize,
                augment_flip: self.augment_flip,
            },
        }
    }
}

/// Vector representations only; the pipeline controller serves dense models.
#[derive(Copy, Clone, ValueEnum)]
enum VectorRepArg {
    Absolute,
    Modified,
}

impl VectorRepArg {
    fn kind(self) -> FeatureKind {
        match self {
            VectorRepArg::Absolute => FeatureKind::Absolute,
            VectorRepArg::Modified => FeatureKind::Modified,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Records to generate per class
    #[arg(long, value_name = "PER_CLASS")]
    n: u32,
    /// Jitter seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-coordinate Gaussian jitter, in pixels
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Landmark CSV output path
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    /// Legend CSV output path [default: --out with a .legend.csv suffix]
    #[arg(long, value_name = "CSV")]
    legend_out: Option<PathBuf>,
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let config = SynthConfig {
        per_class: args.n as usize,
        seed: args.seed,
        jitter_sigma: args.sigma,
    };
    let ds = synth_generate::<f32>(&config);
    let legend_path = args
        .legend_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("legend.csv"));
    write_dataset_csvs(&ds, &legend_path, &args.out)?;
    println!(
        "wrote {} landmark rows to {} and the legend to {}",
        ds.len(),
        args.out.display(),
        legend_path.display()
    );
    Ok(())
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    rep: RepArgs,
    /// Feature CSV output path
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

fn cmd_features(args: &FeaturesArgs) -> Result<(), CliError> {
    let (ds, _) = args.data.load()?;
    let tensors = build_tensors(&ds, args.rep.representation())?;
    let width = match &tensors {
        TensorSet::Vectors(items) => items.first().map_or(0, |(v, _)| v.len()),
        TensorSet::Grids(items) => items.first().map_or(0, |(g, _)| g.cells().len()),
    };
    let mut out = String::from("label");
    for i in 0..width {
        let _ = write!(out, ",f{i}");
    }
    out.push('\n');
    let rows = match &tensors {
        TensorSet::Vectors(items) => {
            for (values, class) in items {
                out.push_str(&ds.class_labels()[*class]);
                for v in values {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
            items.len()
        }
        TensorSet::Grids(items) => {
            for (grid, class) in items {
                out.push_str(&ds.class_labels()[*class]);
                for cell in grid.cells() {
                    let _ = write!(out, ",{cell}");
                }
                out.push('\n');
            }
            items.len()
        }
    };
    std::fs::write(&args.out, out)?;
    println!(
        "wrote {rows} feature rows of width {width} to {}",
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    rep: RepArgs,
    /// Hidden layer widths for the dense model, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1024,512,256")]
    hidden: Vec<usize>,
    /// Dropout rate [default: 0.5 dense, 0.25 raster]
    #[arg(long)]
    dropout: Option<f64>,
    /// Convolution filter count (raster only)
    #[arg(long, default_value_t = 32)]
    filters: usize,
    /// Convolution kernel edge (raster only)
    #[arg(long, default_value_t = 3)]
    kernel: usize,
    /// Training epochs
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Minibatch size
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = 1e-6)]
    lr: f64,
    /// Seed for the split, the initial weights, and batch shuffling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Validation records held out per class
    #[arg(long, default_value_t = 40)]
    val_per_class: usize,
    /// Model file output path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// History CSV output path [default: --out with a .history.csv suffix]
    #[arg(long, value_name = "CSV")]
    history_out: Option<PathBuf>,
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    if let Some(rate) = args.dropout {
        if !(0.0..1.0).contains(&rate) {
            return Err(CliError::Usage(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
    }
    let (ds, drops) = args.data.load()?;
    let (train_ds, val_ds) = stratified_split(&ds, args.val_per_class, args.seed)?;
    let representation = args.rep.representation();
    let train_tensors = build_tensors(&train_ds, representation)?;
    let val_tensors = if val_ds.is_empty() {
        None
    } else {
        Some(build_tensors(&val_ds, representation)?)
    };
    let labels = ds.class_labels().to_vec();
    let cfg = TrainConfig::new(args.epochs, args.batch_size, args.seed, args.lr);
    let (model, history) = match train_tensors {
        TensorSet::Vectors(train_rows) => {
            if args.hidden.contains(&0) {
                return Err(CliError::Usage(
                    "hidden layer widths must be positive".into(),
                ));
            }
            let val_rows = match val_tensors {
                Some(TensorSet::Vectors(rows)) => rows,
                None => Vec::new(),
                Some(TensorSet::Grids(_)) => unreachable!("same representation"),
            };
            let mut dims = Vec::with_capacity(args.hidden.len() + 2);
            dims.push(train_rows[0].0.len());
            dims.extend_from_slice(&args.hidden);
            dims.push(labels.len());
            let rates = vec![args.dropout.unwrap_or(0.5); args.hidden.len()];
            let mut model = MlpModel::<f32>::glorot(&dims, &rates, labels, args.seed)?;
            let history = emopipe::nn::train(&mut model, &train_rows, &val_rows, &cfg)?;
            (AnyModel::Mlp(model), history)
        }
        TensorSet::Grids(train_rows) => {
            let val_rows = match val_tensors {
                Some(TensorSet::Grids(rows)) => rows,
                None => Vec::new(),
                Some(TensorSet::Vectors(_)) => unreachable!("same representation"),
            };
            let mut model = CnnModel::<f32>::glorot(
                args.rep.grid_size as usize,
                args.filters,
                args.kernel,
                args.dropout.unwrap_or(0.25),
                labels,
                args.seed,
            )?;
            let history = emopipe::nn::train(&mut model, &train_rows, &val_rows, &cfg)?;
            (AnyModel::Cnn(model), history)
        }
    };
    save_model_file(&args.out, &model)?;
    let history_path = args
        .history_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("history.csv"));
    std::fs::write(&history_path, history_csv(&history))?;
    let dropped = drops.submitter + drops.label + drops.missing_landmarks;
    println!(
        "loaded {} records ({dropped} dropped), trained on {}, validated on {}",
        ds.len(),
        train_ds.len(),
        val_ds.len()
    );
    if let Some(last) = history.epochs.last() {
        println!(
            "epoch {}: loss {:.6}, train acc {:.2}%, val acc {:.2}%",
            history.epochs.len(),
            last.training_loss,
            last.training_accuracy * 100.0,
            last.validation_accuracy * 100.0,
        );
    }
    println!(
        "wrote {} and {}",
        args.out.display(),
        history_path.display()
    );
    Ok(())
}

/// Per-epoch history rows under the stable header
/// `epoch,train_loss,train_acc,val_acc`; accuracies are fractions.
fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
    for (i, epoch) in history.epochs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            epoch.training_loss,
            epoch.training_accuracy,
            epoch.validation_accuracy
        );
    }
    out
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    rep: RepArgs,
    /// Trained model file
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Score only the seeded validation split of this size per class
    #[arg(long, value_name = "N")]
    val_per_class: Option<usize>,
    /// Seed for --val-per-class splitting
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as CSV
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let model = load_model_file::<f32>(&args.model)?;
    let (ds, _) = args.data.load()?;
    let target = match args.val_per_class {
        Some(n) => stratified_split(&ds, n, args.seed)?.1,
        None => ds,
    };
    let report = evaluate(&model, &target, args.rep.representation())?;
    print!("{}", report.table());
    if let Some(path) = &args.out {
        std::fs::write(path, report.csv())?;
    }
    Ok(())
}

/// Exactly one frame source per run.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// Replay a landmark CSV as the frame stream
    #[arg(long, value_name = "CSV")]
    replay: Option<PathBuf>,
    /// Serve this many synthetic frames, classes alternating
    #[arg(long, value_name = "COUNT")]
    synth: Option<u32>,
    /// Serve raw image bytes from a directory in name order
    #[arg(long, value_name = "DIR")]
    images: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Frames per second for --replay (full speed if omitted)
    #[arg(long, value_name = "FPS", requires = "replay",
          conflicts_with_all = ["synth", "images"])]
    rate: Option<f64>,
    /// Seed for the --synth stream
    #[arg(long, default_value_t = 0, requires = "synth",
          conflicts_with_all = ["replay", "images"])]
    seed: u64,
    /// Trained dense model file
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Feature representation the model expects
    #[arg(long, value_enum, default_value_t = VectorRepArg::Modified)]
    rep: VectorRepArg,
    /// Loopback port base, 0 for OS-assigned ports [default: 7701, or
    /// EMOPIPE_ENDPOINT_BASE when set]
    #[arg(long, value_name = "PORT")]
    port_base: Option<u16>,
}

impl PipelineArgs {
    fn pipeline_config(&self) -> Result<PipelineConfig, CliError> {
        let source = if let Some(path) = &self.source.replay {
            FrameSource::LandmarkReplay {
                path: path.clone(),
                rate: self.rate,
            }
        } else if let Some(count) = self.source.synth {
            FrameSource::SyntheticStream {
                seed: self.seed,
                count,
            }
        } else if let Some(path) = &self.source.images {
            FrameSource::ImageDirectory { path: path.clone() }
        } else {
            unreachable!("clap enforces one source");
        };
        Ok(PipelineConfig {
            source,
            model_path: self.model.clone(),
            feature_kind: self.rep.kind(),
            endpoints: resolve_endpoints(self.port_base)?,
        })
    }
}

/// Port base precedence: the flag, then the environment, then 7701.
/// Base 0 requests OS-assigned ports for all three serving workers.
fn resolve_endpoints(flag: Option<u16>) -> Result<Endpoints, CliError> {
    let base = match flag {
        Some(base) => base,
        None => match std::env::var(ENDPOINT_BASE_ENV) {
            Ok(raw) => raw.trim().parse::<u16>().map_err(|_| {
                CliError::Usage(format!(
                    "{ENDPOINT_BASE_ENV} must be a port number, got {raw:?}"
                ))
            })?,
            Err(std::env::VarError::NotPresent) => DEFAULT_PORT_BASE,
            Err(e) => return Err(CliError::Usage(format!("{ENDPOINT_BASE_ENV}: {e}"))),
        },
    };
    if base == 0 {
        Ok(Endpoints::ephemeral())
    } else if base > u16::MAX - 2 {
        Err(CliError::Usage(format!(
            "port base {base} leaves no room for three consecutive ports"
        )))
    } else {
        Ok(Endpoints::from_base(base))
    }
}

fn cmd_run(args: &PipelineArgs) -> Result<(), CliError> {
    let config = args.pipeline_config()?;
    let report = orchestrate(&config, Box::new(std::io::stdout()))?;
    eprintln!(
        "{} frames served, {} forwarded, {} classified, {} view lines \
         ({} no-face skips, {} hook skips)",
        report.frames_served,
        report.frames_forwarded,
        report.frames_classified,
        report.view_lines,
        report.noface_skips,
        report.hook_skips,
    );
    Ok(())
}

fn cmd_bench(args: &PipelineArgs) -> Result<(), CliError> {
    let config = args.pipeline_config()?;
    let (report, _) = orchestrate_captured(&config)?;
    let stats = bench_latency(&report.latencies_ms)?;
    println!("{stats}");
    Ok(())
}

#[derive(Args)]
struct InspectArgs {
    /// Model file to describe
    #[arg(value_name = "FILE")]
    model: PathBuf,
}

fn cmd_inspect(args: &InspectArgs) -> Result<(), CliError> {
    let model = load_model_file::<f32>(&args.model)?;
    println!("{}", model.summary());
    Ok(())
}
