use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sketchsel::countsketch::SketchGeometry;
use sketchsel::data::{DataFormat, ExampleSource, FileSource, MemorySource};
use sketchsel::harness::{run_experiment, ExperimentKind};
use sketchsel::loss::{LossKind, LossSpec};
use sketchsel::metrics::{evaluate, MetricKind};
use sketchsel::model::{
    read_model, train, write_model, Algorithm, BatchIhtModel, FeatureHashModel, IhtModel,
    Learner, MissionConfig, MissionModel, ModelHeader, StoppingRule,
};
use sketchsel::{Error, Result};

#[derive(Parser)]
#[command(name = "sketchsel", version, about = "Sparse feature selection with Count-Sketch gradient accumulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to a model file.
    Train(TrainArgs),
    /// Score a saved model on labelled data.
    Eval(EvalArgs),
    /// Run a synthetic study and write CSV tables plus a manifest.
    Experiment {
        kind: KindArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Mission,
    Iht,
    BatchIht,
    Fh,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Squared,
    Logistic,
    Hinge,
    Xent,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Libsvm,
    Tokens,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Auc,
    Ap,
    Acc,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    PhaseTransition,
    Attenuation,
    MemoryScaling,
    Tradeoff,
    Convergence,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Token id space is 2^bits.
    #[arg(long, default_value_t = 24)]
    hash_bits: u32,
    #[arg(long, default_value_t = 0)]
    hash_seed: u64,
}

impl InputArgs {
    fn data_format(&self, fallback: Option<DataFormat>) -> DataFormat {
        match (self.format, fallback) {
            (Some(FormatArg::Libsvm), _) => DataFormat::Libsvm,
            (Some(FormatArg::Tokens), _) => DataFormat::Tokens {
                bits: self.hash_bits,
                seed: self.hash_seed,
            },
            (None, Some(f)) => f,
            (None, None) => DataFormat::Libsvm,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long, value_enum)]
    loss: LossArg,
    #[arg(long)]
    top_k: usize,
    #[arg(long, default_value_t = 3)]
    sketch_depth: usize,
    #[arg(long)]
    sketch_width: Option<usize>,
    /// Use the single-row identity sketch of the given width.
    #[arg(long)]
    identity: bool,
    #[arg(long)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    /// Stop when the relative drop in epoch loss is below this.
    #[arg(long)]
    plateau: Option<f64>,
    #[arg(long, default_value_t = 1)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lazy heap threshold.
    #[arg(long, default_value_t = 0.0)]
    lazy_threshold: f64,
    /// Buffer slots for batch-iht.
    #[arg(long)]
    budget: Option<usize>,
    /// Bucket count for fh; defaults to the sketch cell count.
    #[arg(long)]
    buckets: Option<usize>,
    /// Load the data into memory and shuffle it every epoch.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
}

fn loss_kind(arg: LossArg) -> LossKind {
    match arg {
        LossArg::Squared => LossKind::Squared,
        LossArg::Logistic => LossKind::Logistic,
        LossArg::Hinge => LossKind::Hinge,
        LossArg::Xent => LossKind::CrossEntropy,
    }
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let format = args.input.data_format(None);
    let file = FileSource::new(&args.input.data, format)?;
    let memory;
    let source: &dyn ExampleSource = match args.shuffle_seed {
        Some(seed) => {
            memory = MemorySource::new(file.load()?).shuffled(seed);
            &memory
        }
        None => &file,
    };
    let kind = loss_kind(args.loss);
    let loss = LossSpec::new(kind, args.lr, args.classes)?;
    let mut stop = StoppingRule::epochs(args.epochs);
    if let Some(tol) = args.plateau {
        stop = stop.with_plateau(tol);
    }
    let width = args.sketch_width;
    let geometry = if args.identity {
        SketchGeometry::identity(width.ok_or_else(|| Error::Config("--identity needs --sketch-width".into()))?)
    } else {
        SketchGeometry::standard(args.sketch_depth, width.unwrap_or(1 << 16))
    };
    let algo = match args.algo {
        AlgoArg::Mission => Algorithm::Mission,
        AlgoArg::Iht => Algorithm::Iht,
        AlgoArg::BatchIht => Algorithm::BatchIht,
        AlgoArg::Fh => Algorithm::Fh,
    };
    let mut header = ModelHeader::new(algo, kind, args.lr, args.top_k, args.classes, args.seed);
    header.input = Some(format);
    let mut model: Box<dyn Learner> = match algo {
        Algorithm::Mission => {
            header.sketch = Some(geometry);
            let mut config = MissionConfig::new(args.classes, args.top_k, geometry, args.seed);
            config.lazy_threshold = args.lazy_threshold;
            Box::new(MissionModel::new(config)?)
        }
        Algorithm::Iht => Box::new(IhtModel::new(args.classes, args.top_k)?),
        Algorithm::BatchIht => {
            let budget = args.budget.unwrap_or(geometry.cells());
            Box::new(BatchIhtModel::new(args.classes, args.top_k, budget)?)
        }
        Algorithm::Fh => {
            let buckets = args.buckets.unwrap_or(geometry.cells());
            header.buckets = Some(buckets);
            Box::new(FeatureHashModel::new(buckets, args.classes, args.seed)?)
        }
    };
    let report = train(model.as_mut(), &loss, source, &stop)?;
    for e in &report.epochs {
        println!(
            "epoch={} loss={:.6} steps={} seconds={:.3}",
            e.epoch, e.mean_loss, e.steps, e.seconds
        );
    }
    let out = BufWriter::new(File::create(&args.model_out)?);
    write_model(out, &header, model.as_ref())?;
    let active: usize = (0..model.num_classes()).map(|c| model.active(c).len()).sum();
    println!("steps={}", report.steps);
    println!("active={active}");
    Ok(())
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let model = read_model(BufReader::new(File::open(&args.model)?))?;
    let format = args.input.data_format(model.header.input);
    let examples = FileSource::new(&args.input.data, format)?.load()?;
    let metric = match args.metric {
        MetricArg::Auc => MetricKind::Auc,
        MetricArg::Ap => MetricKind::Ap,
        MetricArg::Acc => MetricKind::Acc,
    };
    let report = evaluate(&model, &examples, metric)?;
    println!("{report}");
    if let Some(path) = &args.csv {
        sketchsel::harness::write_csv(path, &[report])?;
    }
    Ok(())
}

fn run_experiment_cmd(kind: KindArg, config: Option<&Path>, out: &Path) -> Result<()> {
    let kind = match kind {
        KindArg::PhaseTransition => ExperimentKind::PhaseTransition,
        KindArg::Attenuation => ExperimentKind::Attenuation,
        KindArg::MemoryScaling => ExperimentKind::MemoryScaling,
        KindArg::Tradeoff => ExperimentKind::Tradeoff,
        KindArg::Convergence => ExperimentKind::Convergence,
    };
    let value = match config {
        Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
        None => serde_json::json!({}),
    };
    let manifest = run_experiment(kind, &value, out)?;
    for file in &manifest.outputs {
        println!("wrote {}", out.join(file).display());
    }
    println!("wrote {}", out.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Experiment { kind, config, out } => run_experiment_cmd(*kind, config.as_deref(), out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
