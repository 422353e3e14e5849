use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::assembly::{assemble, AssemblyPlan, AssemblyReport};
use crate::error::{Error, Result};
use crate::kernel::{BoundKernel, KernelSpec, Param, ParameterTable, ParametricField, Point};
use crate::sparse::{
    minres, CsrMatrix, FactorReport, MinresOptions, Ordering, SolveReport, SparseCholesky,
};

/// Diagonal observation noise `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Same variance for every observation.
    Constant { variance: Param },
    /// One fixed variance per training point; has no value at new inputs.
    PerPoint { variances: Vec<f64> },
    /// Variance given by a positive field of the input.
    Parametric { variance: ParametricField },
}

/// Read access to hyperparameters by name, handed to plug-in means.
pub struct NamedParams<'a> {
    table: &'a ParameterTable,
    theta: &'a [f64],
}

impl NamedParams<'_> {
    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.theta[self.table.index_of(name)?])
    }
}

pub type MeanFn = dyn Fn(&[f64], &NamedParams<'_>) -> Result<f64> + Send + Sync;

/// A user-supplied mean `m(x; theta)`. Only the name is serialized.
#[derive(Clone)]
pub struct PluginMean {
    pub name: String,
    pub f: Arc<MeanFn>,
}

impl fmt::Debug for PluginMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PluginMean({})", self.name)
    }
}

impl PartialEq for PluginMean {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.f, &other.f)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanFunction {
    #[default]
    Zero,
    Constant {
        value: Param,
    },
    #[serde(skip)]
    Plugin(PluginMean),
}

impl MeanFunction {
    pub fn plugin(
        name: impl Into<String>,
        f: impl Fn(&[f64], &NamedParams<'_>) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        MeanFunction::Plugin(PluginMean {
            name: name.into(),
            f: Arc::new(f),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    /// Latent function variance.
    #[default]
    F,
    /// Latent variance plus observation noise.
    Y,
}

impl VarianceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VarianceKind::F => "f",
            VarianceKind::Y => "y",
        }
    }
}

/// Kernel, noise and mean with a shared parameter table (the kernel
/// spec's), plus the assembly plan used for every evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct GpModel {
    pub spec: KernelSpec,
    pub noise: NoiseModel,
    pub mean: MeanFunction,
    pub plan: AssemblyPlan,
    pub minres: MinresOptions,
    pub ordering: Ordering,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalTimings {
    pub covariance_s: f64,
    pub solve_s: f64,
    pub logdet_s: f64,
    pub total_s: f64,
}

/// One log marginal likelihood evaluation with its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmlEvaluation {
    pub lml: f64,
    pub quad: f64,
    pub logdet: f64,
    pub solve: SolveReport,
    pub factor: FactorReport,
    pub assembly: AssemblyReport,
    pub timings: EvalTimings,
}

/// Intermediate products shared by evaluation and fitting.
struct Assembled {
    kernel: BoundKernel,
    prepared: crate::kernel::PreparedPoints,
    matrix: CsrMatrix,
    residual: Vec<f64>,
    report: AssemblyReport,
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

impl GpModel {
    pub fn new(spec: KernelSpec, noise: NoiseModel) -> Self {
        GpModel {
            spec,
            noise,
            mean: MeanFunction::Zero,
            plan: AssemblyPlan::default(),
            minres: MinresOptions::default(),
            ordering: Ordering::default(),
        }
    }

    pub fn with_mean(mut self, mean: MeanFunction) -> Self {
        self.mean = mean;
        self
    }

    pub fn with_plan(mut self, plan: AssemblyPlan) -> Self {
        self.plan = plan;
        self
    }

    /// Validates the kernel and checks that noise and mean only reference
    /// declared slots.
    pub fn table(&self) -> Result<ParameterTable> {
        let table = self.spec.validate()?;
        let mut refs: Vec<&Param> = Vec::new();
        match &self.noise {
            NoiseModel::Constant { variance } => refs.push(variance),
            NoiseModel::PerPoint { variances } => {
                if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::input(format!(
                        "per-point noise variance {v} is invalid"
                    )));
                }
            }
            NoiseModel::Parametric { variance } => refs.extend(variance.params()),
        }
        if let MeanFunction::Constant { value } = &self.mean {
            refs.push(value);
        }
        for p in refs {
            if let Some(name) = p.slot_name() {
                table.index_of(name)?;
            }
        }
        Ok(table)
    }

    fn noise_at(
        &self,
        table: &ParameterTable,
        theta: &[f64],
        points: &[Point],
        training: bool,
    ) -> Result<Vec<f64>> {
        let out = match &self.noise {
            NoiseModel::Constant { variance } => {
                vec![variance.resolve(table, theta)?; points.len()]
            }
            NoiseModel::PerPoint { variances } => {
                if !training {
                    return Err(Error::input("per-point noise has no value at new inputs"));
                }
                if variances.len() != points.len() {
                    return Err(Error::input(format!(
                        "{} per-point noise variances for {} points",
                        variances.len(),
                        points.len()
                    )));
                }
                variances.clone()
            }
            NoiseModel::Parametric { variance } => {
                let f = variance.resolve(table, theta, points.first().map_or(1, Point::dim))?;
                points
                    .iter()
                    .map(|p| f.eval(&p.coords))
                    .collect::<Result<_>>()?
            }
        };
        if let Some(v) = out.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Hyperparameter(format!(
                "noise variance {v} is invalid"
            )));
        }
        Ok(out)
    }

    /// Noise variances for the training points.
    pub fn noise_variances(&self, theta: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        self.noise_at(&self.table()?, theta, points, true)
    }

    /// Noise variances at new inputs.
    pub fn test_noise_variances(&self, theta: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        self.noise_at(&self.table()?, theta, points, false)
    }

    fn mean_at(&self, table: &ParameterTable, theta: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        let out: Vec<f64> = match &self.mean {
            MeanFunction::Zero => vec![0.0; points.len()],
            MeanFunction::Constant { value } => vec![value.resolve(table, theta)?; points.len()],
            MeanFunction::Plugin(p) => {
                let named = NamedParams { table, theta };
                points
                    .iter()
                    .map(|x| (p.f)(&x.coords, &named))
                    .collect::<Result<_>>()?
            }
        };
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("mean function returned {v}")));
        }
        Ok(out)
    }

    pub fn mean_values(&self, theta: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        self.mean_at(&self.table()?, theta, points)
    }

    fn assemble(&self, theta: &[f64], data: &Dataset) -> Result<Assembled> {
        let table = self.table()?;
        table.check_bounds(theta)?;
        let kernel = BoundKernel::bind(&self.spec, theta, data.dim(), Some(data.points()))?;
        let prepared = kernel.prepare(data.points())?;
        let noise = self.noise_at(&table, theta, data.points(), true)?;
        let (matrix, report) = assemble(&kernel, &prepared, &noise, &self.plan)?;
        let m = self.mean_at(&table, theta, data.points())?;
        let residual = data.y().iter().zip(&m).map(|(y, m)| y - m).collect();
        Ok(Assembled {
            kernel,
            prepared,
            matrix,
            residual,
            report,
        })
    }

    /// `-½ rᵀ(K+V)⁻¹r − ½ ln|K+V| − (n/2) ln 2π` with `r = y − m`. The solve
    /// uses MINRES and the log-determinant a sparse Cholesky factor.
    pub fn log_marginal_likelihood(&self, theta: &[f64], data: &Dataset) -> Result<LmlEvaluation> {
        let t0 = Instant::now();
        let asm = self.assemble(theta, data)?;
        let covariance_s = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let (a, solve) = minres(&asm.matrix, &asm.residual, &self.minres, None)?;
        let solve_s = t1.elapsed().as_secs_f64();
        if !solve.converged {
            return Err(Error::Convergence(format!(
                "MINRES stopped after {} iterations at relative residual {:e}",
                solve.iterations, solve.relative_residual
            )));
        }

        let t2 = Instant::now();
        let factor = SparseCholesky::factor(&asm.matrix, self.ordering)?;
        let logdet = factor.logdet();
        let logdet_s = t2.elapsed().as_secs_f64();

        let quad: f64 = asm.residual.iter().zip(&a).map(|(r, a)| r * a).sum();
        let n = data.len() as f64;
        let lml = -0.5 * quad - 0.5 * logdet - 0.5 * n * LN_2PI;
        if !lml.is_finite() {
            return Err(Error::Evaluation(format!(
                "log marginal likelihood is {lml}"
            )));
        }
        Ok(LmlEvaluation {
            lml,
            quad,
            logdet,
            solve,
            factor: factor.report().clone(),
            assembly: asm.report,
            timings: EvalTimings {
                covariance_s,
                solve_s,
                logdet_s,
                total_s: t0.elapsed().as_secs_f64(),
            },
        })
    }

    /// Assembles, factors and caches `a = (K+V)⁻¹(y − m)` for prediction.
    pub fn fit(&self, theta: &[f64], data: Arc<Dataset>) -> Result<TrainedModel> {
        let asm = self.assemble(theta, &data)?;
        let factor = SparseCholesky::factor(&asm.matrix, self.ordering)?;
        let mut a = factor.solve(&asm.residual)?;
        // One refinement step against the unjittered matrix.
        let ka = asm.matrix.spmv(&a)?;
        let resid: Vec<f64> = asm.residual.iter().zip(&ka).map(|(r, k)| r - k).collect();
        let corr = factor.solve(&resid)?;
        for (ai, ci) in a.iter_mut().zip(&corr) {
            *ai += ci;
        }
        let quad: f64 = asm.residual.iter().zip(&a).map(|(r, a)| r * a).sum();
        let n = data.len() as f64;
        let lml = -0.5 * quad - 0.5 * factor.logdet() - 0.5 * n * LN_2PI;
        Ok(TrainedModel {
            model: self.clone(),
            theta: theta.to_vec(),
            data,
            kernel: asm.kernel,
            prepared: asm.prepared,
            matrix: asm.matrix,
            factor,
            a,
            lml,
            assembly: asm.report,
        })
    }
}

/// Gaussian predictive marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGaussian {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub kind: VarianceKind,
    /// Negative variances set to zero.
    pub clamped: usize,
    /// Clamps beyond the silent threshold.
    pub health_warnings: usize,
}

impl PosteriorGaussian {
    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }
}

/// Relative threshold below which negative variances clamp silently.
pub const CLAMP_TOLERANCE: f64 = 1e-8;

pub(crate) fn clamp_variance(v: f64, prior: f64, clamped: &mut usize, warnings: &mut usize) -> f64 {
    if v >= 0.0 {
        return v;
    }
    *clamped += 1;
    if v < -CLAMP_TOLERANCE * prior.abs() {
        *warnings += 1;
        log::warn!("posterior variance {v:e} clamped to 0 (prior variance {prior:e})");
    }
    0.0
}

/// A fitted model: hyperparameters, the assembled matrix, its factor and
/// the cached solution vector.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: GpModel,
    pub theta: Vec<f64>,
    pub data: Arc<Dataset>,
    kernel: BoundKernel,
    prepared: crate::kernel::PreparedPoints,
    matrix: CsrMatrix,
    factor: SparseCholesky,
    a: Vec<f64>,
    pub lml: f64,
    pub assembly: AssemblyReport,
}

impl TrainedModel {
    pub fn solution(&self) -> &[f64] {
        &self.a
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn factor(&self) -> &SparseCholesky {
        &self.factor
    }

    /// Posterior mean and variance at `x_star`; the variance uses one
    /// triangular solve with the cached factor per test point.
    pub fn predict(&self, x_star: &[Point], kind: VarianceKind) -> Result<PosteriorGaussian> {
        let table = self.model.table()?;
        let test = self.kernel.prepare(x_star)?;
        let prior = self.kernel.diag(&test);
        let mean0 = self.model.mean_at(&table, &self.theta, x_star)?;
        let noise = match kind {
            VarianceKind::F => vec![0.0; x_star.len()],
            VarianceKind::Y => self.model.noise_at(&table, &self.theta, x_star, false)?,
        };
        let n = self.data.len();
        let mut mean = Vec::with_capacity(x_star.len());
        let mut variance = Vec::with_capacity(x_star.len());
        let (mut clamped, mut warnings) = (0, 0);
        let mut k = vec![0.0; n];
        for s in 0..x_star.len() {
            let mut any = false;
            let mut mu = mean0[s];
            for i in 0..n {
                let v = self.kernel.pair(&self.prepared, i, &test, s);
                if !v.is_finite() {
                    return Err(Error::Evaluation(format!(
                        "cross-covariance {v} at test point {s}"
                    )));
                }
                k[i] = v;
                if v != 0.0 {
                    any = true;
                    mu += v * self.a[i];
                }
            }
            let reduction = if any {
                self.factor.inv_quad_form(&k)?
            } else {
                0.0
            };
            let var = clamp_variance(prior[s] - reduction, prior[s], &mut clamped, &mut warnings);
            mean.push(mu);
            variance.push(var + noise[s]);
        }
        Ok(PosteriorGaussian {
            mean,
            variance,
            kind,
            clamped,
            health_warnings: warnings,
        })
    }
}
