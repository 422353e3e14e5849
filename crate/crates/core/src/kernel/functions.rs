//! Scalar kernel profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Lower clamp on `1 - |x - c|^2 / r^2` before it is inverted.
pub const BUMP_GUARD: f64 = 1e-14;

/// Cubic coefficient of the Wendland polynomial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WendlandVariant {
    /// `(1-r)^8 (35 r^3 + 25 r^2 + 8 r + 1)`
    #[default]
    Printed,
    /// The classical C6 form, `(1-r)^8 (32 r^3 + 25 r^2 + 8 r + 1)`.
    Classical,
}

impl WendlandVariant {
    #[inline]
    fn cubic(self) -> f64 {
        match self {
            WendlandVariant::Printed => 35.0,
            WendlandVariant::Classical => 32.0,
        }
    }
}

/// Wendland profile at distance `d` with support radius `r0`. Outside the
/// support the result is exactly `0.0`.
#[inline]
pub fn wendland_profile(d: f64, r0: f64, variant: WendlandVariant) -> f64 {
    if d >= r0 {
        return 0.0;
    }
    let r = d / r0;
    let one_minus = 1.0 - r;
    let om2 = one_minus * one_minus;
    let om4 = om2 * om2;
    let om8 = om4 * om4;
    om8 * (((variant.cubic() * r + 25.0) * r + 8.0) * r + 1.0)
}

pub fn wendland(d: f64, r0: f64) -> Result<f64> {
    wendland_with(d, r0, WendlandVariant::Printed)
}

pub fn wendland_with(d: f64, r0: f64, variant: WendlandVariant) -> Result<f64> {
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::hyper(format!(
            "wendland radius must be > 0, got {r0}"
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::input(format!("distance must be >= 0, got {d}")));
    }
    Ok(wendland_profile(d, r0, variant))
}

#[inline]
pub fn matern32_profile(d: f64, length_scale: f64, sigma: f64) -> f64 {
    let s = SQRT3 * d / length_scale;
    sigma * sigma * (1.0 + s) * (-s).exp()
}

pub fn matern32(d: f64, length_scale: f64, sigma: f64) -> Result<f64> {
    if !(length_scale > 0.0) || !(sigma > 0.0) {
        return Err(Error::hyper(format!(
            "matern length scale and sigma must be > 0, got {length_scale}, {sigma}"
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::input(format!("distance must be >= 0, got {d}")));
    }
    Ok(matern32_profile(d, length_scale, sigma))
}

/// A smooth, compactly supported bump. Evaluates to `amplitude` at the
/// center and to exactly zero at and beyond `radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpFunction {
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub shape: f64,
    pub radius: f64,
}

impl BumpFunction {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(Error::hyper("bump amplitude must be >= 0"));
        }
        if !(self.shape > 0.0) || !(self.radius > 0.0) {
            return Err(Error::hyper("bump shape and radius must be > 0"));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_slice(&self, x: &[f64]) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let mut sq = 0.0;
        for (a, c) in x.iter().zip(&self.center) {
            let d = a - c;
            sq += d * d;
        }
        let s = sq / (self.radius * self.radius);
        if s >= 1.0 {
            return 0.0;
        }
        let inner = (1.0 - s).max(BUMP_GUARD);
        self.amplitude * (self.shape * (1.0 - 1.0 / inner)).exp()
    }
}

pub fn bump_eval(b: &BumpFunction, x: &[f64]) -> Result<f64> {
    if b.center.len() != x.len() {
        return Err(Error::input("bump center and point differ in dimension"));
    }
    b.validate()?;
    Ok(b.eval_slice(x))
}
