use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location in the input space. `index` ties the point to a row of the
/// training set; delta kernels match on it instead of on coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point {
            coords,
            index: None,
        }
    }

    pub fn indexed(coords: Vec<f64>, index: usize) -> Self {
        Point {
            coords,
            index: Some(index),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::input("point has zero dimensions"));
        }
        if self.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("point has a non-finite coordinate"));
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point::new(coords)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Euclidean,
    L1,
}

/// Norm used by the stationary leaves, with optional per-dimension
/// length scales applied by dividing coordinate differences.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DistanceMetric {
    pub kind: MetricKind,
    pub ard_scales: Option<Vec<f64>>,
}

impl DistanceMetric {
    pub fn euclidean() -> Self {
        DistanceMetric::default()
    }

    pub fn l1() -> Self {
        DistanceMetric {
            kind: MetricKind::L1,
            ard_scales: None,
        }
    }

    pub fn with_ard(mut self, scales: Vec<f64>) -> Self {
        self.ard_scales = Some(scales);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(s) = &self.ard_scales {
            if s.len() != dim {
                return Err(Error::input(format!(
                    "ARD scales have length {} but points have dimension {dim}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::hyper("ARD scales must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Distance on raw coordinate slices. Callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_slices(&self, p: &[f64], q: &[f64]) -> f64 {
        match (&self.ard_scales, self.kind) {
            (None, MetricKind::Euclidean) => {
                let mut s = 0.0;
                for (a, b) in p.iter().zip(q) {
                    let d = a - b;
                    s += d * d;
                }
                s.sqrt()
            }
            (None, MetricKind::L1) => p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum(),
            (Some(scales), MetricKind::Euclidean) => {
                let mut s = 0.0;
                for ((a, b), w) in p.iter().zip(q).zip(scales) {
                    let d = (a - b) / w;
                    s += d * d;
                }
                s.sqrt()
            }
            (Some(scales), MetricKind::L1) => p
                .iter()
                .zip(q)
                .zip(scales)
                .map(|((a, b), w)| (a - b).abs() / w)
                .sum(),
        }
    }
}

pub fn distance(p: &Point, q: &Point, m: &DistanceMetric) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    m.validate(p.dim())?;
    Ok(m.eval_slices(&p.coords, &q.coords))
}
