use std::fs::File;
use std::io::BufWriter;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sparsegp::gp::{read_predictions, write_predictions, Checkpoint, Dataset, VarianceKind};
use sparsegp::harness::{
    artifacts, load_csv, prepare_data, run_repeats, save_csv, train_model, ChainSummary,
    ExperimentConfig,
};
use sparsegp::kernel::Point;
use sparsegp::metrics::{brier, crps_gaussian, rmse};
use sparsegp::Error;

#[derive(Parser)]
#[command(
    name = "sparsegp",
    version,
    about = "Exact sparse Gaussian-process regression"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Seed for both data generation and the chain. Prediction, evaluation
    /// and inspection are deterministic and ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (JSON). Defaults to the 1-D synthetic benchmark.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `data.n_train=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    F,
    Y,
}

#[derive(Subcommand)]
enum Command {
    /// Train hyperparameters by block MCMC and write a checkpoint.
    Train(RunArgs),
    /// Predict at test inputs from a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV with columns x0..x{d-1} and an optional y.
        #[arg(long)]
        test: PathBuf,
        /// Training data; defaults to the path recorded in the checkpoint.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "f")]
        variance: Kind,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score a prediction CSV against a truth CSV.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// CSV with columns x0..x{d-1},y, row-aligned with the predictions.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Full experiment with repeats and an optional timing sweep.
    Benchmark {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        repeats: Option<usize>,
        /// Training sizes for the timing sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
    },
    /// Print a checkpoint summary.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::StaleCheckpoint(_) => 4,
        Error::Training(_)
        | Error::Evaluation(_)
        | Error::Definiteness(_)
        | Error::Convergence(_)
        | Error::Assembly(_) => 3,
        _ => 2,
    }
}

fn load_config(args: &RunArgs, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let base = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::f1_benchmark(),
    };
    let mut c = base.with_overrides(args.overrides.iter().map(String::as_str))?;
    if let Some(s) = seed {
        c.seeds.data = s;
        c.seeds.chain = s;
    }
    if let Some(w) = args.workers {
        c.assembly.workers = w;
    }
    c.output_dir = Some(args.out.display().to_string());
    c.validate()?;
    Ok(c)
}

fn train(args: &RunArgs, seed: Option<u64>) -> Result<(), Error> {
    let config = load_config(args, seed)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("config.json"), config.to_json())?;
    let split = prepare_data(&config)?;
    let train_path = args.out.join(artifacts::TRAIN_CSV);
    save_csv(&split.train, &train_path)?;
    let data = Arc::new(split.train);

    let mut sink = BufWriter::new(File::create(args.out.join(artifacts::TRACE))?);
    let trained = train_model(
        &config.model,
        config.assembly,
        config.seeds.chain,
        &data,
        false,
        Some(&mut sink),
    )?;
    sink.flush()?;
    let summary = ChainSummary::new(&trained, &config.model.mcmc);
    std::fs::write(
        args.out.join("chain.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    trained.chain.ensure_trained()?;

    let fitted = trained.model.fit(&trained.chain.theta_map, data)?;
    let mut ckpt = Checkpoint::from_trained(&fitted, Some(train_path.display().to_string()))?;
    ckpt.seeds.insert("data".into(), config.seeds.data);
    ckpt.seeds.insert("chain".into(), config.seeds.chain);
    let path = args.out.join(artifacts::CHECKPOINT);
    ckpt.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

/// Test inputs: header `x0..x{d-1}` optionally followed by `y`.
fn read_inputs(path: &Path, dim: usize) -> Result<Vec<Point>, Error> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let xs: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    if headers.len() < dim || headers[..dim] != xs[..] || headers.len() > dim + 1 {
        return Err(Error::Schema(format!(
            "test file header must be x0..x{},[y]",
            dim - 1
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(format!("line {}: {e}", i + 2)))?;
        let coords = (0..dim)
            .map(|k| {
                rec.get(k)
                    .and_then(|f| f.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::Schema(format!("line {}: bad value in column x{k}", i + 2))
                    })
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        out.push(Point::indexed(coords, i));
    }
    if out.is_empty() {
        return Err(Error::Input(format!("{} has no rows", path.display())));
    }
    Ok(out)
}

fn predict(
    checkpoint: &Path,
    test: &Path,
    train: Option<&Path>,
    kind: Kind,
    workers: Option<usize>,
    out: &Path,
) -> Result<(), Error> {
    let mut ckpt = Checkpoint::load(checkpoint)?;
    if let Some(w) = workers {
        ckpt.workers = w;
    }
    let train_path = match (train, &ckpt.dataset.path) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Err(Error::Input(
                "no training data path given or recorded".into(),
            ))
        }
    };
    let data: Dataset = load_csv(&train_path, Some(ckpt.dataset.dim))?;
    let model = ckpt.restore(Arc::new(data))?;
    let x = read_inputs(test, ckpt.dataset.dim)?;
    let kind = match kind {
        Kind::F => VarianceKind::F,
        Kind::Y => VarianceKind::Y,
    };
    let post = model.predict(&x, kind)?;
    std::fs::create_dir_all(out)?;
    let path = out.join(artifacts::PREDICTIONS);
    write_predictions(&post, File::create(&path)?)?;
    if post.health_warnings > 0 {
        log::warn!(
            "{} predictive variances were clamped beyond tolerance",
            post.health_warnings
        );
    }
    println!("{}", path.display());
    Ok(())
}

fn evaluate(predictions: &Path, truth: &Path, out: &Path) -> Result<(), Error> {
    let preds = read_predictions(File::open(predictions)?)?;
    let truth = load_csv(truth, None)?;
    if preds.len() != truth.len() || preds.iter().enumerate().any(|(i, p)| p.index != i) {
        return Err(Error::Input(format!(
            "{} predictions do not align with {} truth rows by index",
            preds.len(),
            truth.len()
        )));
    }
    let means: Vec<f64> = preds.iter().map(|p| p.mean).collect();
    let stds: Vec<f64> = preds.iter().map(|p| p.variance.sqrt()).collect();
    let y = truth.y();
    let mut report = json!({
        "rmse": rmse(&means, y)?,
        "crps": crps_gaussian(&means, &stds, y)?,
        "n_test": y.len(),
        "variance_kind": preds[0].variance_kind,
    });
    let binary =
        y.iter().all(|v| *v == 0.0 || *v == 1.0) && means.iter().all(|p| (0.0..=1.0).contains(p));
    if binary {
        let labels: Vec<bool> = y.iter().map(|v| *v == 1.0).collect();
        report["brier"] = json!(brier(&means, &labels)?);
    }
    std::fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(out.join("metrics.json"), &text)?;
    println!("{text}");
    Ok(())
}

fn benchmark(
    args: &RunArgs,
    seed: Option<u64>,
    repeats: Option<usize>,
    sizes: &[usize],
) -> Result<(), Error> {
    let mut config = load_config(args, seed)?;
    if let Some(r) = repeats {
        config.repeats = r;
    }
    if !sizes.is_empty() {
        config.timing_sizes = sizes.to_vec();
    }
    config.validate()?;
    let summary = run_repeats(&config, &args.out)?;
    let rows: Vec<_> = summary
        .runs
        .iter()
        .flat_map(|r| r.timing_sweep.clone())
        .collect();
    let out = json!({
        "repeats": summary.repeats,
        "rmse": summary.rmse,
        "crps": summary.crps,
        "base_rmse": summary.base_rmse,
        "base_crps": summary.base_crps,
        "timing": summary.runs.iter().map(|r| r.timing.clone()).collect::<Vec<_>>(),
        "timing_sweep": rows,
        "seeds": summary.runs.iter().map(|r| r.config.seeds).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn inspect(checkpoint: &Path) -> Result<(), Error> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let table = ckpt.kernel.validate()?;
    println!("engine version: {}", ckpt.engine_version);
    println!("kernel:\n{}", ckpt.kernel.describe());
    println!("hyperparameters:");
    for (slot, v) in table.slots().iter().zip(ckpt.theta_vec()?) {
        println!(
            "  {:<16} {:>14.6e}  in [{:.6e}, {:.6e}]",
            slot.name, v, slot.lower, slot.upper
        );
    }
    println!("noise: {}", serde_json::to_string(&ckpt.noise)?);
    println!("mean: {}", serde_json::to_string(&ckpt.mean)?);
    println!(
        "dataset: n = {}, dim = {}, fingerprint {}",
        ckpt.dataset.n, ckpt.dataset.dim, ckpt.dataset.fingerprint
    );
    println!("density: {}", ckpt.assembly.density);
    println!("nnz: {}", ckpt.assembly.nnz);
    println!("log marginal likelihood: {}", ckpt.lml);
    for (k, v) in &ckpt.seeds {
        println!("seed {k}: {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let res = match &cli.command {
        Command::Train(a) => train(a, cli.seed),
        Command::Predict {
            checkpoint,
            test,
            train,
            variance,
            workers,
            out,
        } => predict(checkpoint, test, train.as_deref(), *variance, *workers, out),
        Command::Evaluate {
            predictions,
            truth,
            out,
        } => evaluate(predictions, truth, out),
        Command::Benchmark {
            run,
            repeats,
            sizes,
        } => benchmark(run, cli.seed, *repeats, sizes),
        Command::Inspect { checkpoint } => inspect(checkpoint),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
