use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::Point;

/// Training inputs and targets. Points carry indices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Vec<Point>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(coords: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::input("a dataset needs at least one point"));
        }
        if coords.len() != y.len() {
            return Err(Error::input(format!(
                "{} inputs but {} targets",
                coords.len(),
                y.len()
            )));
        }
        let dim = coords[0].len();
        if dim == 0 {
            return Err(Error::input("points must have dimension >= 1"));
        }
        let points: Vec<Point> = coords
            .into_iter()
            .enumerate()
            .map(|(i, c)| Point::indexed(c, i))
            .collect();
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::input(format!(
                    "point {i} has dimension {} instead of {dim}",
                    p.dim()
                )));
            }
            p.validate()?;
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("target {i} is not finite")));
        }
        Ok(Dataset { points, y })
    }

    pub fn from_1d(x: &[f64], y: Vec<f64>) -> Result<Self> {
        Dataset::new(x.iter().map(|&v| vec![v]).collect(), y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn coords(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.coords.clone()).collect()
    }

    /// Rows `idx` in the given order, re-indexed from 0.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let coords = idx.iter().map(|&i| self.points[i].coords.clone()).collect();
        Dataset::new(coords, idx.iter().map(|&i| self.y[i]).collect())
    }

    /// SHA-256 over the dimension, coordinates and targets (bitwise).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for (p, y) in self.points.iter().zip(&self.y) {
            for c in &p.coords {
                h.update(c.to_bits().to_le_bytes());
            }
            h.update(y.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
