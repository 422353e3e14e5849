use nalgebra::DMatrix;

use super::data::Dataset;
use super::model::{clamp_variance, GpModel, PosteriorGaussian, VarianceKind};
use crate::error::Result;
use crate::kernel::{BoundKernel, Point};
use crate::sparse::{dense_cholesky, DenseCholesky};

/// Dense GP used as the oracle for the sparse pipeline and as the base GP.
#[derive(Clone, Debug)]
pub struct DenseFit {
    pub lml: f64,
    pub chol: DenseCholesky,
    pub solution: Vec<f64>,
}

fn dense_covariance(
    model: &GpModel,
    theta: &[f64],
    data: &Dataset,
) -> Result<(DMatrix<f64>, Vec<f64>, BoundKernel)> {
    let kernel = BoundKernel::bind(&model.spec, theta, data.dim(), Some(data.points()))?;
    let p = kernel.prepare(data.points())?;
    let mut k = kernel.gram(&p, &p)?;
    for (i, v) in model
        .noise_variances(theta, data.points())?
        .into_iter()
        .enumerate()
    {
        k[(i, i)] += v;
    }
    let m = model.mean_values(theta, data.points())?;
    let r = data.y().iter().zip(&m).map(|(y, m)| y - m).collect();
    Ok((k, r, kernel))
}

pub fn dense_fit(model: &GpModel, theta: &[f64], data: &Dataset) -> Result<DenseFit> {
    model.table()?.check_bounds(theta)?;
    let (k, r, _) = dense_covariance(model, theta, data)?;
    let chol = dense_cholesky(&k)?;
    let solution = chol.solve(&r)?;
    let quad: f64 = r.iter().zip(&solution).map(|(a, b)| a * b).sum();
    let n = data.len() as f64;
    let lml = -0.5 * quad - 0.5 * chol.logdet() - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    Ok(DenseFit {
        lml,
        chol,
        solution,
    })
}

pub fn dense_log_marginal_likelihood(
    model: &GpModel,
    theta: &[f64],
    data: &Dataset,
) -> Result<f64> {
    Ok(dense_fit(model, theta, data)?.lml)
}

/// Dense Cholesky fit followed by prediction at `x_star`.
pub fn dense_reference_fit_predict(
    model: &GpModel,
    theta: &[f64],
    data: &Dataset,
    x_star: &[Point],
    kind: VarianceKind,
) -> Result<(DenseFit, PosteriorGaussian)> {
    let fit = dense_fit(model, theta, data)?;
    let kernel = BoundKernel::bind(&model.spec, theta, data.dim(), Some(data.points()))?;
    let train = kernel.prepare(data.points())?;
    let test = kernel.prepare(x_star)?;
    let cross = kernel.gram(&train, &test)?;
    let prior = kernel.diag(&test);
    let mean0 = model.mean_values(theta, x_star)?;
    let noise = match kind {
        VarianceKind::F => vec![0.0; x_star.len()],
        VarianceKind::Y => model.test_noise_variances(theta, x_star)?,
    };
    let (mut clamped, mut warnings) = (0, 0);
    let mut mean = Vec::with_capacity(x_star.len());
    let mut variance = Vec::with_capacity(x_star.len());
    for s in 0..x_star.len() {
        let k: Vec<f64> = cross.column(s).iter().copied().collect();
        mean.push(mean0[s] + k.iter().zip(&fit.solution).map(|(a, b)| a * b).sum::<f64>());
        let v = prior[s] - fit.chol.inv_quad_form(&k)?;
        variance.push(clamp_variance(v, prior[s], &mut clamped, &mut warnings) + noise[s]);
    }
    Ok((
        fit,
        PosteriorGaussian {
            mean,
            variance,
            kind,
            clamped,
            health_warnings: warnings,
        },
    ))
}
