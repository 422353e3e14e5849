use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, ModelConfig};
use super::csvio::{load_csv, save_csv};
use super::synthetic::make_synthetic_dataset;
use crate::assembly::{AssemblyPlan, AssemblyReport};
use crate::error::{Error, Result};
use crate::gp::{
    dense_reference_fit_predict, write_predictions, Checkpoint, Dataset, GpModel,
    PosteriorGaussian, VarianceKind, ENGINE_VERSION,
};
use crate::kernel::{ParameterTable, Point};
use crate::mcmc::{
    initial_theta, run_chain, ChainResult, DenseGpTarget, GpTarget, LogTarget, McmcConfig,
    TraceRecord,
};
use crate::metrics::Scores;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Train/test split plus an optional plotting grid with known truth.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub grid_x: Vec<f64>,
    pub grid_truth: Vec<Option<f64>>,
    pub noise_std: Option<f64>,
}

/// Disjoint, sorted train and test index sets covering `0..n`.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::input("need at least two rows to split"));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn prepare_data(config: &ExperimentConfig) -> Result<Split> {
    match &config.data {
        DataSource::SyntheticF1 {
            n_train,
            n_test,
            noise_std,
            grid_size,
        } => {
            let s = make_synthetic_dataset(
                n_train + n_test,
                *noise_std,
                config.seeds.data,
                *grid_size,
            )?;
            let train: Vec<usize> = (0..*n_train).collect();
            let test: Vec<usize> = (*n_train..n_train + n_test).collect();
            Ok(Split {
                train: s.data.subset(&train)?,
                test: s.data.subset(&test)?,
                grid_x: s.grid_x,
                grid_truth: s.grid_truth.into_iter().map(Some).collect(),
                noise_std: Some(*noise_std),
            })
        }
        DataSource::Csv {
            path,
            test_path,
            test_fraction,
            dim,
        } => {
            let all = load_csv(path, *dim)?;
            let (train, test) = match test_path {
                Some(tp) => (all.clone(), load_csv(tp, Some(all.dim()))?),
                None => {
                    let (tr, te) = split_indices(all.len(), *test_fraction, config.seeds.data)?;
                    (all.subset(&tr)?, all.subset(&te)?)
                }
            };
            let (grid_x, grid_truth) = if train.dim() == 1 {
                let xs: Vec<f64> = train.points().iter().map(|p| p.coords[0]).collect();
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let g = 500;
                let grid = (0..g)
                    .map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64)
                    .collect();
                (grid, vec![None; g])
            } else {
                (Vec::new(), Vec::new())
            };
            Ok(Split {
                train,
                test,
                grid_x,
                grid_truth,
                noise_std: None,
            })
        }
    }
}

/// Per-evaluation timing split, as in a sparse pipeline timing table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub density: f64,
    pub covariance_s: f64,
    pub solve_s: f64,
    pub logdet_s: f64,
    pub total_s: f64,
}

/// One log marginal likelihood evaluation at `theta`, timed.
pub fn timing_row(model: &GpModel, theta: &[f64], data: &Dataset) -> Result<TimingRow> {
    let e = model.log_marginal_likelihood(theta, data)?;
    Ok(TimingRow {
        n: data.len(),
        density: e.assembly.density,
        covariance_s: e.timings.covariance_s,
        solve_s: e.timings.solve_s,
        logdet_s: e.timings.logdet_s,
        total_s: e.timings.total_s,
    })
}

fn mean_timing(trace: &[TraceRecord], n: usize, density: f64) -> Option<TimingRow> {
    let t: Vec<_> = trace.iter().filter_map(|r| r.timings).collect();
    if t.is_empty() {
        return None;
    }
    let k = t.len() as f64;
    Some(TimingRow {
        n,
        density,
        covariance_s: t.iter().map(|x| x.covariance_s).sum::<f64>() / k,
        solve_s: t.iter().map(|x| x.solve_s).sum::<f64>() / k,
        logdet_s: t.iter().map(|x| x.logdet_s).sum::<f64>() / k,
        total_s: t.iter().map(|x| x.total_s).sum::<f64>() / k,
    })
}

/// A trained chain with its model.
pub struct Trained {
    pub model: GpModel,
    pub table: ParameterTable,
    pub trace: Vec<TraceRecord>,
    pub chain: ChainResult,
}

/// Builds the model for `cfg` and runs its chain on `data`. With `dense`
/// the target is the dense-Cholesky likelihood.
pub fn train_model(
    cfg: &ModelConfig,
    plan: AssemblyPlan,
    seed: u64,
    data: &Dataset,
    dense: bool,
    sink: Option<&mut dyn Write>,
) -> Result<Trained> {
    let spec = cfg.kernel.load(None)?;
    let mut model = GpModel::new(spec, cfg.noise.clone())
        .with_mean(cfg.mean.clone())
        .with_plan(plan);
    model.plan = plan;
    let table = model.table()?;
    let theta0 = initial_theta(
        &table,
        model.spec.amplitude_slots().iter().map(String::as_str),
    )?;
    let mcmc = McmcConfig {
        seed,
        ..cfg.mcmc.clone()
    };
    let sparse_target = GpTarget {
        model: &model,
        data,
    };
    let dense_target = DenseGpTarget {
        model: &model,
        data,
    };
    let target: &dyn LogTarget = if dense { &dense_target } else { &sparse_target };
    let (trace, chain) = run_chain(&mcmc, &table, target, theta0, sink)?;
    Ok(Trained {
        model,
        table,
        trace,
        chain,
    })
}

fn named(table: &ParameterTable, theta: &[f64]) -> BTreeMap<String, f64> {
    table
        .names()
        .map(str::to_string)
        .zip(theta.iter().copied())
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub theta_selected: BTreeMap<String, f64>,
    #[serde(with = "crate::mcmc::log_density")]
    pub log_posterior_map: f64,
    #[serde(with = "crate::mcmc::log_density")]
    pub initial_log_posterior: f64,
    /// Post-burn-in acceptance rate per block.
    pub acceptance: BTreeMap<String, f64>,
    pub final_scales: BTreeMap<String, f64>,
    pub evaluations: usize,
    pub training_failure: Option<String>,
}

impl ChainSummary {
    pub fn new(t: &Trained, cfg: &McmcConfig) -> Self {
        let names = cfg.blocks.iter().map(|b| b.name.clone());
        ChainSummary {
            theta_selected: named(&t.table, &t.chain.theta_map),
            log_posterior_map: t.chain.log_posterior_map,
            initial_log_posterior: t.chain.initial_log_posterior,
            acceptance: names
                .clone()
                .zip(t.chain.acceptance_after_burn_in())
                .collect(),
            final_scales: names.zip(t.chain.state.scales.iter().copied()).collect(),
            evaluations: t.chain.state.evaluations,
            training_failure: t.chain.failure.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseGpReport {
    pub chain: ChainSummary,
    pub scores: Option<Scores>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub engine_version: String,
    pub config: ExperimentConfig,
    pub n_train: usize,
    pub n_test: usize,
    /// Observation noise std of synthetic data (absent for CSV data).
    pub noise_std: Option<f64>,
    pub chain: Option<ChainSummary>,
    pub scores: Option<Scores>,
    pub score_variance: VarianceKind,
    pub clamped_variances: usize,
    pub variance_health_warnings: usize,
    /// Mean timing over the chain's likelihood evaluations.
    pub timing: Option<TimingRow>,
    pub assembly: Option<AssemblyReport>,
    pub base_gp: Option<BaseGpReport>,
    pub timing_sweep: Vec<TimingRow>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
}

impl RunReport {
    fn new(config: &ExperimentConfig) -> Self {
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            engine_version: ENGINE_VERSION.into(),
            config: config.clone(),
            n_train: 0,
            n_test: 0,
            noise_std: None,
            chain: None,
            scores: None,
            score_variance: config.score_variance,
            clamped_variances: 0,
            variance_health_warnings: 0,
            timing: None,
            assembly: None,
            base_gp: None,
            timing_sweep: Vec::new(),
            failed_stage: None,
            error: None,
        }
    }

    /// JSON with every wall-clock field removed, for replay comparisons.
    pub fn without_timings(&self) -> serde_json::Value {
        fn strip(v: &mut serde_json::Value) {
            match v {
                serde_json::Value::Object(m) => {
                    m.retain(|k, _| !(k.ends_with("_s") || k == "timing" || k == "timing_sweep"));
                    m.values_mut().for_each(strip);
                }
                serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
                _ => {}
            }
        }
        let mut v = serde_json::to_value(self).expect("report serializes");
        strip(&mut v);
        v
    }
}

/// File names written by [`run_experiment`] inside the output directory.
pub mod artifacts {
    pub const REPORT: &str = "report.json";
    pub const PREDICTIONS: &str = "predictions.csv";
    pub const PLOT: &str = "plot.csv";
    pub const TRACE: &str = "trace.ndjson";
    pub const CHECKPOINT: &str = "checkpoint.json";
    pub const TRAIN_CSV: &str = "train.csv";
    pub const TEST_CSV: &str = "test.csv";
}

#[derive(Serialize)]
struct PlotRow {
    x: f64,
    mean: f64,
    std: f64,
    truth: Option<f64>,
}

fn write_plot(
    path: &Path,
    grid: &[f64],
    truth: &[Option<f64>],
    post: &PosteriorGaussian,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for i in 0..grid.len() {
        w.serialize(PlotRow {
            x: grid[i],
            mean: post.mean[i],
            std: post.variance[i].sqrt(),
            truth: truth[i],
        })?;
    }
    w.flush()?;
    Ok(())
}

fn test_truths(test: &Dataset) -> &[f64] {
    test.y()
}

fn score(post: &PosteriorGaussian, test: &Dataset) -> Result<Scores> {
    Scores::regression(&post.mean, &post.std(), test_truths(test))
}

fn run_stages(config: &ExperimentConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    report.failed_stage = Some("data".into());
    let split = prepare_data(config)?;
    report.n_train = split.train.len();
    report.n_test = split.test.len();
    report.noise_std = split.noise_std;
    save_csv(&split.train, out.join(artifacts::TRAIN_CSV))?;
    save_csv(&split.test, out.join(artifacts::TEST_CSV))?;
    let train = Arc::new(split.train);

    report.failed_stage = Some("train".into());
    let mut sink = BufWriter::new(File::create(out.join(artifacts::TRACE))?);
    let trained = train_model(
        &config.model,
        config.assembly,
        config.seeds.chain,
        &train,
        false,
        Some(&mut sink),
    )?;
    sink.flush()?;
    report.chain = Some(ChainSummary::new(&trained, &config.model.mcmc));
    trained.chain.ensure_trained()?;

    report.failed_stage = Some("fit".into());
    let theta = trained.chain.theta_map.clone();
    let fitted = trained.model.fit(&theta, train.clone())?;
    report.assembly = Some(fitted.assembly.clone());
    report.timing = mean_timing(&trained.trace, train.len(), fitted.assembly.density);
    let mut ckpt = Checkpoint::from_trained(
        &fitted,
        Some(out.join(artifacts::TRAIN_CSV).display().to_string()),
    )?;
    ckpt.seeds.insert("data".into(), config.seeds.data);
    ckpt.seeds.insert("chain".into(), config.seeds.chain);
    ckpt.save(out.join(artifacts::CHECKPOINT))?;

    report.failed_stage = Some("predict".into());
    let post = fitted.predict(split.test.points(), config.score_variance)?;
    write_predictions(&post, File::create(out.join(artifacts::PREDICTIONS))?)?;
    report.clamped_variances = post.clamped;
    report.variance_health_warnings = post.health_warnings;
    let grid: Vec<Point> = split.grid_x.iter().map(|&x| Point::new(vec![x])).collect();
    if !grid.is_empty() {
        let gp = fitted.predict(&grid, VarianceKind::F)?;
        write_plot(
            &out.join(artifacts::PLOT),
            &split.grid_x,
            &split.grid_truth,
            &gp,
        )?;
    }

    report.failed_stage = Some("score".into());
    report.scores = Some(score(&post, &split.test)?);

    if let Some(base) = &config.base_gp {
        report.failed_stage = Some("base_gp".into());
        let b = train_model(
            base,
            config.assembly,
            config.seeds.chain,
            &train,
            true,
            None,
        )?;
        let summary = ChainSummary::new(&b, &base.mcmc);
        let scores = if b.chain.failure.is_none() {
            let (_, bp) = dense_reference_fit_predict(
                &b.model,
                &b.chain.theta_map,
                &train,
                split.test.points(),
                config.score_variance,
            )?;
            Some(score(&bp, &split.test)?)
        } else {
            None
        };
        report.base_gp = Some(BaseGpReport {
            chain: summary,
            scores,
        });
    }

    report.failed_stage = Some("timing".into());
    for &n in &config.timing_sizes {
        let s = make_synthetic_dataset(
            n,
            split.noise_std.unwrap_or(0.1),
            config.seeds.data.wrapping_add(n as u64),
            0,
        )?;
        report
            .timing_sweep
            .push(timing_row(&trained.model, &theta, &s.data)?);
    }
    report.failed_stage = None;
    Ok(())
}

/// Split, train, fit, predict and score; writes the report, predictions,
/// plot data, trace and checkpoint into `out`. On failure a partial report
/// naming the failed stage is still written.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let mut report = RunReport::new(config);
    let res = run_stages(config, out, &mut report);
    if let Err(e) = &res {
        report.error = Some(e.to_string());
    }
    std::fs::write(
        out.join(artifacts::REPORT),
        serde_json::to_string_pretty(&report)?,
    )?;
    res.map(|_| report)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(MeanStd {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeats: usize,
    pub rmse: Option<MeanStd>,
    pub crps: Option<MeanStd>,
    pub base_rmse: Option<MeanStd>,
    pub base_crps: Option<MeanStd>,
    pub runs: Vec<RunReport>,
}

/// Runs `config.repeats` experiments with seeds offset by the repeat
/// index, each in `out/repeat_<k>`, and aggregates the scores.
pub fn run_repeats(config: &ExperimentConfig, out: &Path) -> Result<RepeatSummary> {
    config.validate()?;
    let mut runs = Vec::new();
    for k in 0..config.repeats {
        let mut c = config.clone();
        c.seeds.data = config.seeds.data.wrapping_add(k as u64);
        c.seeds.chain = config.seeds.chain.wrapping_add(k as u64);
        c.repeats = 1;
        let dir = if config.repeats == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("repeat_{k}"))
        };
        runs.push(run_experiment(&c, &dir)?);
    }
    let collect = |f: &dyn Fn(&RunReport) -> Option<f64>| {
        MeanStd::of(&runs.iter().filter_map(f).collect::<Vec<_>>())
    };
    let summary = RepeatSummary {
        repeats: config.repeats,
        rmse: collect(&|r| r.scores.as_ref().map(|s| s.rmse)),
        crps: collect(&|r| r.scores.as_ref().map(|s| s.crps)),
        base_rmse: collect(&|r| r.base_gp.as_ref()?.scores.as_ref().map(|s| s.rmse)),
        base_crps: collect(&|r| r.base_gp.as_ref()?.scores.as_ref().map(|s| s.crps)),
        runs: runs.clone(),
    };
    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}
