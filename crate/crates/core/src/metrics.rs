//! Scoring rules for predictive means and Gaussian predictive distributions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::input("cannot score an empty prediction set"));
    }
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "{} predictions for {} targets",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn rmse(means: &[f64], truths: &[f64]) -> Result<f64> {
    check_pair(means, truths)?;
    let sse: f64 = means.iter().zip(truths).map(|(m, y)| (m - y).powi(2)).sum();
    Ok((sse / means.len() as f64).sqrt())
}

/// CRPS of `Normal(mu, sigma^2)` against `y`; `|mu - y|` when `sigma = 0`.
pub fn crps_gaussian_single(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::input(format!(
            "predictive std must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok((mu - y).abs());
    }
    let std = Normal::standard();
    let z = (y - mu) / sigma;
    Ok(sigma
        * (z * (2.0 * std.cdf(z) - 1.0) + 2.0 * std.pdf(z) - 1.0 / std::f64::consts::PI.sqrt()))
}

/// Mean Gaussian CRPS over a prediction set.
pub fn crps_gaussian(means: &[f64], stds: &[f64], truths: &[f64]) -> Result<f64> {
    check_pair(means, truths)?;
    check_pair(stds, truths)?;
    let mut total = 0.0;
    for ((m, s), y) in means.iter().zip(stds).zip(truths) {
        total += crps_gaussian_single(*m, *s, *y)?;
    }
    Ok(total / means.len() as f64)
}

pub fn brier(probabilities: &[f64], labels: &[bool]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::input("cannot score an empty prediction set"));
    }
    if probabilities.len() != labels.len() {
        return Err(Error::input("probabilities and labels differ in length"));
    }
    let mut total = 0.0;
    for (&p, &o) in probabilities.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::input(format!("probability {p} outside [0, 1]")));
        }
        total += (p - if o { 1.0 } else { 0.0 }).powi(2);
    }
    Ok(total / probabilities.len() as f64)
}

/// Scores as written to run reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub rmse: f64,
    pub crps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brier: Option<f64>,
    pub n_test: usize,
}

impl Scores {
    pub fn regression(means: &[f64], stds: &[f64], truths: &[f64]) -> Result<Self> {
        Ok(Scores {
            rmse: rmse(means, truths)?,
            crps: crps_gaussian(means, stds, truths)?,
            brier: None,
            n_test: truths.len(),
        })
    }
}
