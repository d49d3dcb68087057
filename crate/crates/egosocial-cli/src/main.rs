//! `egosocial` — end-to-end pipeline for detecting social interactions in
//! egocentric photo streams.
//!
//! Calibrate a face-height → distance model, turn detection tracks into
//! distance/orientation series, train the gated recurrent classifier,
//! search hyperparameters, sweep the frame-threshold baseline, and compare
//! the results.
//!
//! Exit codes: 0 on success, 2 on validation errors (bad files, bad
//! arguments, infeasible requests), 3 when training diverges or no searched
//! configuration is viable.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use egosocial_cli::config::RunConfig;
use egosocial_cli::formats;
use egosocial_cli::parallel;
use egosocial_core::baseline::sweep_threshold;
use egosocial_core::dataset::{augment_all, build_series, generate_series, split_dataset};
use egosocial_core::evaluation::{
    compare_report, compute_metrics, reference_report_rows, ReportRow,
};
use egosocial_core::geometry::{fit_distance_model, impute_poses};
use egosocial_core::lstm::LstmModel;
use egosocial_core::training::{gradient_check, train, LabeledSeries};
use egosocial_core::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

// ---------------------------------------------------------------------------
// Command line surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "egosocial",
    about = "Detect social interactions in egocentric photo streams",
    version
)]
struct Cli {
    /// Master seed; overrides every seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output artifacts (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the face-height → distance model from measured samples.
    Calibrate(CalibrateArgs),
    /// Produce feature series: synthetically, from tracks, or by augmentation.
    #[command(subcommand)]
    Generate(GenerateCommand),
    /// Train the recurrent classifier on labeled series.
    Train(TrainArgs),
    /// Random hyperparameter search over parallel workers.
    Search(SearchArgs),
    /// Sweep the frame-fraction threshold baseline.
    Baseline(BaselineArgs),
    /// Evaluate a trained model on labeled series.
    Evaluate(EvaluateArgs),
    /// Compare the analytic gradient against finite differences.
    Gradcheck(GradcheckArgs),
    /// Render a method-comparison table from evaluation reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// CSV of measured (face_height_px, distance_cm) pairs.
    #[arg(long)]
    samples: PathBuf,
}

#[derive(Subcommand)]
enum GenerateCommand {
    /// Sample a labeled synthetic corpus.
    Synthetic(SyntheticArgs),
    /// Convert detection tracks to distance/orientation series.
    Tracks(TracksArgs),
    /// Expand labeled series with resampled, feature-injected copies.
    Augment(AugmentArgs),
    /// Partition labeled series into train/val/test files.
    Split(SplitArgs),
}

#[derive(Args)]
struct SplitArgs {
    /// Labeled series CSV to partition.
    #[arg(long)]
    input: PathBuf,
    /// Fraction of each class that goes to training.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Args)]
struct SyntheticArgs {
    /// Number of interacting series.
    #[arg(long)]
    num_positive: Option<usize>,
    /// Number of non-interacting series.
    #[arg(long)]
    num_negative: Option<usize>,
}

#[derive(Args)]
struct TracksArgs {
    /// Detection tracks, one JSON record per line.
    #[arg(long)]
    tracks: PathBuf,
    /// Fitted distance model file.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// Labeled series CSV to expand.
    #[arg(long)]
    input: PathBuf,
    /// Augmented copies per source series.
    #[arg(long)]
    copies: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training series CSV.
    #[arg(long)]
    train: PathBuf,
    /// Labeled validation series CSV.
    #[arg(long)]
    val: PathBuf,
    /// Optimizer: sgd or lbfgs.
    #[arg(long)]
    optimizer: Option<String>,
    /// Memory blocks in the recurrent layer.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Continue from an existing checkpoint instead of fresh weights.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Labeled training series CSV.
    #[arg(long)]
    train: PathBuf,
    /// Labeled validation series CSV.
    #[arg(long)]
    val: PathBuf,
    /// Independent trials to run.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads; results are identical for any count.
    #[arg(long)]
    workers: Option<usize>,
    /// Epoch budget for every trial.
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Labeled series CSV to sweep over.
    #[arg(long)]
    data: PathBuf,
    /// Explicit thresholds, e.g. --thresholds 0.1,0.25,0.5
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Even grid over [0, 1] with this many steps.
    #[arg(long)]
    grid_steps: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model checkpoint file.
    #[arg(long)]
    model: PathBuf,
    /// Labeled series CSV.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Memory blocks of the probed model.
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    /// Frames per probed series.
    #[arg(long, default_value_t = 6)]
    frames: usize,
    /// Series in the probed batch.
    #[arg(long, default_value_t = 4)]
    series: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Fail (exit 2) when the max relative error exceeds this.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Rows as NAME=EVAL_FILE, e.g. LSTM=out/eval.txt
    rows: Vec<String>,
    /// Append the published reference results for the original
    /// (non-public) evaluation dataset.
    #[arg(long)]
    reference: bool,
}

// ---------------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// 3 for divergence-class failures, 2 for everything the user can fix.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Diverged { .. }) | CliError::Core(Error::NoViableConfig) => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    println!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared context: config file + seed override + output directory
// ---------------------------------------------------------------------------

struct Ctx {
    config: RunConfig,
    seed: Option<u64>,
    out: PathBuf,
}

impl Ctx {
    fn new(cli: &Cli) -> CliResult<Ctx> {
        let config = match &cli.config {
            Some(path) => RunConfig::parse(&read_file(path)?)?,
            None => RunConfig::default(),
        };
        std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Io(cli.out.clone(), e))?;
        Ok(Ctx {
            config,
            seed: cli.seed,
            out: cli.out.clone(),
        })
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn lstm_config(&self) -> egosocial_core::lstm::LstmConfig {
        let mut cfg = self.config.lstm_config();
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg
    }

    fn train_config(&self) -> CliResult<egosocial_core::training::TrainConfig> {
        let mut cfg = self.config.train_config()?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn split_spec(&self) -> egosocial_core::dataset::SplitSpec {
        let mut spec = self.config.split_spec();
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        spec
    }

    fn synthetic_spec(&self) -> egosocial_core::dataset::SyntheticSpec {
        let mut spec = self.config.synthetic_spec();
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        spec
    }

    fn augment_spec(&self) -> egosocial_core::dataset::AugmentSpec {
        let mut spec = self.config.augment_spec();
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        spec
    }

    fn search_seed(&self) -> u64 {
        self.seed.or(self.config.search.seed).unwrap_or(0)
    }
}

/// Parses a labeled-series CSV and prepares it for the classifier.
fn load_labeled(path: &Path) -> CliResult<Vec<LabeledSeries>> {
    let series = formats::parse_series_csv(&read_file(path)?)?;
    Ok(LabeledSeries::from_corpus(&series)?)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn run(cli: Cli) -> CliResult<()> {
    let ctx = Ctx::new(&cli)?;
    match &cli.command {
        Command::Calibrate(args) => cmd_calibrate(&ctx, args),
        Command::Generate(GenerateCommand::Synthetic(args)) => cmd_synthetic(&ctx, args),
        Command::Generate(GenerateCommand::Tracks(args)) => cmd_tracks(&ctx, args),
        Command::Generate(GenerateCommand::Augment(args)) => cmd_augment(&ctx, args),
        Command::Generate(GenerateCommand::Split(args)) => cmd_split(&ctx, args),
        Command::Train(args) => cmd_train(&ctx, args),
        Command::Search(args) => cmd_search(&ctx, args),
        Command::Baseline(args) => cmd_baseline(&ctx, args),
        Command::Evaluate(args) => cmd_evaluate(&ctx, args),
        Command::Gradcheck(args) => cmd_gradcheck(&ctx, args),
        Command::Report(args) => cmd_report(&ctx, args),
    }
}

fn cmd_calibrate(ctx: &Ctx, args: &CalibrateArgs) -> CliResult<()> {
    let samples = formats::parse_calibration_csv(&read_file(&args.samples)?)?;
    let model = fit_distance_model(&samples)?;
    println!(
        "fitted distance model over {} samples: d = {} + {}*h + {}*h^2, valid heights {}..{} px",
        samples.len(),
        model.c0,
        model.c1,
        model.c2,
        model.valid_range.0,
        model.valid_range.1
    );
    write_file(
        &ctx.out_path("distance-model.txt"),
        &formats::write_distance_model(&model),
    )
}

fn cmd_synthetic(ctx: &Ctx, args: &SyntheticArgs) -> CliResult<()> {
    let mut spec = ctx.synthetic_spec();
    if let Some(n) = args.num_positive {
        spec.num_positive = n;
    }
    if let Some(n) = args.num_negative {
        spec.num_negative = n;
    }
    let series = generate_series(&spec);
    println!(
        "generated {} series ({} interacting, {} not)",
        series.len(),
        spec.num_positive,
        spec.num_negative
    );
    write_file(
        &ctx.out_path("series.csv"),
        &formats::write_series_csv(&series)?,
    )
}

fn cmd_tracks(ctx: &Ctx, args: &TracksArgs) -> CliResult<()> {
    let tracks = formats::parse_tracks_jsonl(&read_file(&args.tracks)?)?;
    let model = formats::parse_distance_model(&read_file(&args.model)?)?;
    let mut series = Vec::with_capacity(tracks.len());
    for track in &tracks {
        let imputed = impute_poses(track)?;
        series.push(build_series(&imputed, &model)?);
    }
    println!("converted {} tracks to feature series", series.len());
    write_file(
        &ctx.out_path("series.csv"),
        &formats::write_series_csv(&series)?,
    )
}

fn cmd_augment(ctx: &Ctx, args: &AugmentArgs) -> CliResult<()> {
    let originals = formats::parse_series_csv(&read_file(&args.input)?)?;
    let mut spec = ctx.augment_spec();
    if let Some(copies) = args.copies {
        spec.copies_per_series = copies;
    }
    let copies = augment_all(&originals, &spec)?;
    let mut combined = originals;
    combined.extend(copies);
    println!(
        "augmented to {} series ({} per source)",
        combined.len(),
        spec.copies_per_series + 1
    );
    write_file(
        &ctx.out_path("augmented.csv"),
        &formats::write_series_csv(&combined)?,
    )
}

fn cmd_split(ctx: &Ctx, args: &SplitArgs) -> CliResult<()> {
    let all = formats::parse_series_csv(&read_file(&args.input)?)?;
    let mut spec = ctx.split_spec();
    if let Some(v) = args.train_fraction {
        spec.train_fraction = v;
    }
    if let Some(v) = args.val_fraction {
        spec.val_fraction = v;
    }
    if let Some(v) = args.test_fraction {
        spec.test_fraction = v;
    }
    let (train, val, test) = split_dataset(&all, &spec)?;
    println!(
        "split {} series into {} train / {} val / {} test",
        all.len(),
        train.len(),
        val.len(),
        test.len()
    );
    write_file(
        &ctx.out_path("train.csv"),
        &formats::write_series_csv(&train)?,
    )?;
    write_file(&ctx.out_path("val.csv"), &formats::write_series_csv(&val)?)?;
    write_file(
        &ctx.out_path("test.csv"),
        &formats::write_series_csv(&test)?,
    )
}

fn cmd_train(ctx: &Ctx, args: &TrainArgs) -> CliResult<()> {
    let train_set = load_labeled(&args.train)?;
    let val_set = load_labeled(&args.val)?;

    let mut train_config = ctx.train_config()?;
    if let Some(name) = &args.optimizer {
        train_config.optimizer = formats::parse_optimizer(name)?;
    }
    if let Some(v) = args.learning_rate {
        train_config.learning_rate = v;
    }
    if let Some(v) = args.momentum {
        train_config.momentum = v;
    }
    if let Some(v) = args.batch_size {
        train_config.batch_size = v;
    }
    if let Some(v) = args.max_epochs {
        train_config.max_epochs = v;
    }
    if let Some(v) = args.patience {
        train_config.patience = v;
    }

    let model = match &args.resume {
        Some(path) => formats::parse_checkpoint(&read_file(path)?)?,
        None => {
            let mut lstm_config = ctx.lstm_config();
            if let Some(b) = args.blocks {
                lstm_config.num_blocks = b;
            }
            LstmModel::init(lstm_config)?
        }
    };

    println!(
        "training {} blocks on {} series (validating on {})",
        model.config().num_blocks,
        train_set.len(),
        val_set.len()
    );
    let run = train(&model, &train_set, &val_set, &train_config)?;
    let at = run.best_epoch - 1;
    println!(
        "best epoch {}: val loss {}, val acc {}, train loss {}",
        run.best_epoch, run.val_loss[at], run.val_acc[at], run.train_loss[at]
    );
    write_file(
        &ctx.out_path("metrics.csv"),
        &formats::write_metrics_csv(&run),
    )?;
    write_file(
        &ctx.out_path("checkpoint.txt"),
        &formats::write_checkpoint(&run.model),
    )
}

fn cmd_search(ctx: &Ctx, args: &SearchArgs) -> CliResult<()> {
    let train_set = load_labeled(&args.train)?;
    let val_set = load_labeled(&args.val)?;
    let space = ctx.config.search_space();
    let mut base = ctx.config.train_config()?;
    if let Some(v) = args.max_epochs {
        base.max_epochs = v;
    }
    if let Some(v) = args.patience {
        base.patience = v;
    }
    let trials = args.trials.or(ctx.config.search.trials).unwrap_or(10);
    let workers = args.workers.or(ctx.config.search.workers).unwrap_or(1);
    let master_seed = ctx.search_seed();

    println!("searching {trials} trials on {workers} workers (master seed {master_seed})");
    let ranked = parallel::run_search(
        &space,
        &train_set,
        &val_set,
        trials,
        master_seed,
        &base,
        workers,
    )?;

    let mut by_trial = ranked.clone();
    by_trial.sort_by_key(|r| r.trial_index);
    write_file(
        &ctx.out_path("trials.jsonl"),
        &formats::write_trials_jsonl(&by_trial),
    )?;
    write_file(
        &ctx.out_path("search-summary.csv"),
        &formats::write_search_summary(&ranked),
    )?;
    let best = &ranked[0];
    println!(
        "best trial {}: {} blocks, lr {}, momentum {}, batch {}, val loss {}, val acc {}",
        best.trial_index,
        best.lstm_config.num_blocks,
        best.train_config.learning_rate,
        best.train_config.momentum,
        best.train_config.batch_size,
        best.val_loss,
        best.val_acc
    );
    Ok(())
}

fn cmd_baseline(ctx: &Ctx, args: &BaselineArgs) -> CliResult<()> {
    let series = formats::parse_series_csv(&read_file(&args.data)?)?;
    let grid = match (&args.thresholds, args.grid_steps) {
        (Some(explicit), _) => explicit.clone(),
        (None, Some(steps)) if steps > 0 => (0..=steps).map(|i| i as f64 / steps as f64).collect(),
        (None, Some(_)) => {
            return Err(
                Error::InvalidArgument(String::from("--grid-steps must be positive")).into(),
            )
        }
        (None, None) => ctx.config.baseline_grid()?,
    };
    let sweep = sweep_threshold(&series, &grid)?;
    println!(
        "best threshold {} with F-measure {} over {} grid points",
        sweep.best_threshold,
        sweep.best_f_measure,
        sweep.rows.len()
    );
    write_file(
        &ctx.out_path("sweep.csv"),
        &formats::write_sweep_csv(&sweep.rows),
    )
}

fn cmd_evaluate(ctx: &Ctx, args: &EvaluateArgs) -> CliResult<()> {
    let model = formats::parse_checkpoint(&read_file(&args.model)?)?;
    let data = load_labeled(&args.data)?;
    let predictions: Vec<bool> = data
        .iter()
        .map(|s| model.forward(&s.inputs) > 0.5)
        .collect();
    let labels: Vec<bool> = data.iter().map(|s| s.label).collect();
    let metrics = compute_metrics(&predictions, &labels)?;
    print!("{}", formats::write_eval_report(&metrics));
    write_file(
        &ctx.out_path("eval.txt"),
        &formats::write_eval_report(&metrics),
    )
}

fn cmd_gradcheck(ctx: &Ctx, args: &GradcheckArgs) -> CliResult<()> {
    if args.series == 0 || args.frames == 0 {
        return Err(Error::InvalidArgument(String::from(
            "gradcheck needs at least one series and one frame",
        ))
        .into());
    }
    let mut lstm_config = ctx.lstm_config();
    lstm_config.num_blocks = args.blocks;
    let model = LstmModel::init(lstm_config)?;
    let spec = egosocial_core::dataset::SyntheticSpec {
        num_positive: args.series.div_ceil(2),
        num_negative: args.series / 2,
        length_range: (args.frames, args.frames),
        ..ctx.synthetic_spec()
    };
    let batch = LabeledSeries::from_corpus(&generate_series(&spec))?;
    let report = gradient_check(&model, &batch, args.step)?;
    println!(
        "gradient check over {} parameters: max relative error {}, mean {}",
        model.num_params(),
        report.max_rel_err,
        report.mean_rel_err
    );
    if let Some(tolerance) = args.tolerance {
        if report.max_rel_err.is_nan() || report.max_rel_err > tolerance {
            return Err(Error::InvalidArgument(format!(
                "max relative error {} exceeds tolerance {tolerance}",
                report.max_rel_err
            ))
            .into());
        }
        println!("within tolerance {tolerance}");
    }
    Ok(())
}

fn cmd_report(ctx: &Ctx, args: &ReportArgs) -> CliResult<()> {
    let mut rows: Vec<ReportRow> = Vec::new();
    for entry in &args.rows {
        let Some((name, path)) = entry.split_once('=') else {
            return Err(Error::InvalidArgument(format!(
                "report rows look like NAME=EVAL_FILE, found {entry:?}"
            ))
            .into());
        };
        let (precision, recall, f_measure) =
            formats::parse_eval_rates(&read_file(Path::new(path))?)?;
        rows.push(ReportRow {
            method: name.to_string(),
            precision,
            recall,
            f_measure,
        });
    }
    if args.reference {
        rows.extend(reference_report_rows());
    }
    let table = compare_report(&rows)?;
    print!("{table}");
    write_file(&ctx.out_path("report.txt"), &table)
}
