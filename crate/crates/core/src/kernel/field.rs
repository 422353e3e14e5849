//! Positive-valued functions of the input location, used for signal
//! standard deviations, length scales and parametric noise.
//!
//! Every field is `exp(eta(x))` where `eta` is linear in its raw
//! parameters, so any raw value yields a strictly positive output.

use serde::{Deserialize, Serialize};

use super::param::{Param, ParameterTable};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParametricField {
    /// `exp(c)`
    Constant { log_value: Param },
    /// `exp(c + sum_k w_k x_k)`
    AxisLinear {
        intercept: Param,
        slopes: Vec<Param>,
    },
    /// `exp(c + sum_m w_m exp(-|x - z_m|^2 / (2 h^2)))` with fixed centers `z_m`.
    RadialExpansion {
        intercept: Param,
        centers: Vec<Vec<f64>>,
        width: f64,
        weights: Vec<Param>,
    },
}

impl ParametricField {
    pub fn constant(log_value: impl Into<Param>) -> Self {
        ParametricField::Constant {
            log_value: log_value.into(),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            ParametricField::Constant { log_value } => vec![log_value],
            ParametricField::AxisLinear { intercept, slopes } => {
                std::iter::once(intercept).chain(slopes).collect()
            }
            ParametricField::RadialExpansion {
                intercept, weights, ..
            } => std::iter::once(intercept).chain(weights).collect(),
        }
    }

    pub fn resolve(
        &self,
        table: &ParameterTable,
        theta: &[f64],
        dim: usize,
    ) -> Result<ResolvedField> {
        match self {
            ParametricField::Constant { log_value } => Ok(ResolvedField::Constant {
                value: log_value.resolve(table, theta)?.exp(),
            }),
            ParametricField::AxisLinear { intercept, slopes } => {
                if slopes.len() != dim {
                    return Err(Error::Schema(format!(
                        "axis-linear field has {} slopes for dimension {dim}",
                        slopes.len()
                    )));
                }
                Ok(ResolvedField::AxisLinear {
                    intercept: intercept.resolve(table, theta)?,
                    slopes: slopes
                        .iter()
                        .map(|p| p.resolve(table, theta))
                        .collect::<Result<_>>()?,
                })
            }
            ParametricField::RadialExpansion {
                intercept,
                centers,
                width,
                weights,
            } => {
                if centers.len() != weights.len() {
                    return Err(Error::Schema(
                        "radial field needs one weight per center".into(),
                    ));
                }
                if centers.iter().any(|c| c.len() != dim) {
                    return Err(Error::Schema(
                        "radial field center dimension mismatch".into(),
                    ));
                }
                if !(*width > 0.0) {
                    return Err(Error::Schema("radial field width must be > 0".into()));
                }
                Ok(ResolvedField::Radial {
                    intercept: intercept.resolve(table, theta)?,
                    centers: centers.clone(),
                    inv_two_h2: 1.0 / (2.0 * width * width),
                    weights: weights
                        .iter()
                        .map(|p| p.resolve(table, theta))
                        .collect::<Result<_>>()?,
                })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum ResolvedField {
    Constant {
        value: f64,
    },
    AxisLinear {
        intercept: f64,
        slopes: Vec<f64>,
    },
    Radial {
        intercept: f64,
        centers: Vec<Vec<f64>>,
        inv_two_h2: f64,
        weights: Vec<f64>,
    },
}

impl ResolvedField {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            ResolvedField::Constant { value } => *value,
            ResolvedField::AxisLinear { intercept, slopes } => {
                (intercept + slopes.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()).exp()
            }
            ResolvedField::Radial {
                intercept,
                centers,
                inv_two_h2,
                weights,
            } => {
                let mut eta = *intercept;
                for (c, w) in centers.iter().zip(weights) {
                    let sq: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    eta += w * (-sq * inv_two_h2).exp();
                }
                eta.exp()
            }
        };
        if !v.is_finite() || !(v > 0.0) {
            return Err(Error::Evaluation(format!("field evaluated to {v}")));
        }
        Ok(v)
    }
}

/// Evenly spaced radial-expansion centers over `[lo, hi]` in one dimension,
/// with weights bound to slots `{prefix}0..`.
pub fn radial_field_1d(
    intercept: Param,
    lo: f64,
    hi: f64,
    count: usize,
    prefix: &str,
) -> ParametricField {
    let step = if count > 1 {
        (hi - lo) / (count - 1) as f64
    } else {
        0.0
    };
    let centers = (0..count).map(|m| vec![lo + step * m as f64]).collect();
    let width = if count > 1 { step } else { hi - lo };
    ParametricField::RadialExpansion {
        intercept,
        centers,
        width,
        weights: (0..count)
            .map(|m| Param::slot(format!("{prefix}{m}")))
            .collect(),
    }
}
