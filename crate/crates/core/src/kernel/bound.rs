//! Kernels with hyperparameters resolved, ready for pairwise evaluation.
//!
//! Binding turns a [`KernelSpec`] and a hyperparameter vector into a
//! [`BoundKernel`]. Per-point quantities (field values, bump sums) are
//! computed once by [`BoundKernel::prepare`]; pair evaluation then only
//! touches the two prepared rows.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::farfield::{BumpGroup, DeltaGroupsSpec, DeltaMembership};
use super::field::{ParametricField, ResolvedField};
use super::functions::{matern32_profile, wendland_profile, WendlandVariant};
use super::metric::{DistanceMetric, Point};
use super::param::ParameterTable;
use super::spec::{FarFieldSpec, KernelNode, KernelSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct LengthFields {
    fields: Vec<ResolvedField>,
}

impl LengthFields {
    fn resolve(
        fs: &[ParametricField],
        table: &ParameterTable,
        theta: &[f64],
        dim: usize,
    ) -> Result<Self> {
        if fs.len() != 1 && fs.len() != dim {
            return Err(Error::Schema(format!(
                "expected 1 or {dim} length-scale fields, got {}",
                fs.len()
            )));
        }
        Ok(LengthFields {
            fields: fs
                .iter()
                .map(|f| f.resolve(table, theta, dim))
                .collect::<Result<_>>()?,
        })
    }

    /// Writes the diagonal of `Sigma(x)` followed by `|Sigma(x)|^(1/4)`.
    fn write(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = x.len();
        let mut det = 1.0;
        for k in 0..d {
            let f = if self.fields.len() == 1 {
                &self.fields[0]
            } else {
                &self.fields[k]
            };
            let l = f.eval(x)?;
            let s = l * l;
            out[k] = s;
            det *= s;
        }
        out[d] = det.sqrt().sqrt();
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum BoundFar {
    Bumps { off: usize, groups: Vec<BumpGroup> },
    Deltas(Arc<DeltaMembership>),
}

#[derive(Clone, Debug)]
enum BoundNode {
    Wendland {
        r0: f64,
        variant: WendlandVariant,
    },
    Matern32 {
        ell: f64,
        sigma: f64,
    },
    Nonstat {
        off: usize,
        signal: ResolvedField,
        length: LengthFields,
        r0: f64,
        variant: WendlandVariant,
    },
    Bumps {
        off: usize,
        groups: Vec<BumpGroup>,
    },
    Deltas(Arc<DeltaMembership>),
    Split {
        off: usize,
        signal: ResolvedField,
        local: LengthFields,
        far_len: LengthFields,
        r0: f64,
        variant: WendlandVariant,
        far: BoundFar,
    },
    Product(Vec<BoundNode>),
    Sum(Vec<BoundNode>),
    Scale(f64, Box<BoundNode>),
}

/// Everything needed to evaluate a point's side of a kernel pair.
#[derive(Clone, Copy)]
pub(crate) struct PointView<'a> {
    x: &'a [f64],
    f: &'a [f64],
    index: Option<usize>,
}

/// Points with their per-point kernel features precomputed.
#[derive(Clone, Debug)]
pub struct PreparedPoints {
    dim: usize,
    coords: Vec<f64>,
    index: Vec<Option<usize>>,
    features: Vec<f64>,
    feature_len: usize,
}

impl PreparedPoints {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub(crate) fn view(&self, i: usize) -> PointView<'_> {
        PointView {
            x: &self.coords[i * self.dim..(i + 1) * self.dim],
            f: &self.features[i * self.feature_len..(i + 1) * self.feature_len],
            index: self.index[i],
        }
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

struct Binder<'a> {
    table: &'a ParameterTable,
    theta: &'a [f64],
    dim: usize,
    metric: &'a DistanceMetric,
    training: Option<&'a [Point]>,
    feature_len: usize,
}

impl Binder<'_> {
    fn alloc(&mut self, n: usize) -> usize {
        let off = self.feature_len;
        self.feature_len += n;
        off
    }

    fn positive(&self, p: &super::param::Param, what: &str) -> Result<f64> {
        let v = p.resolve(self.table, self.theta)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::hyper(format!(
                "{what} must be finite and > 0, got {v}"
            )));
        }
        Ok(v)
    }

    fn deltas(&self, spec: &DeltaGroupsSpec) -> Result<Arc<DeltaMembership>> {
        let m = match spec {
            DeltaGroupsSpec::Explicit { groups } => {
                let n = match self.training {
                    Some(t) => t.len(),
                    None => groups
                        .iter()
                        .flat_map(|g| g.members.iter())
                        .max()
                        .map_or(0, |m| m + 1),
                };
                DeltaMembership::from_groups(groups, n)?
            }
            DeltaGroupsSpec::Radius { radius } => {
                let training = self.training.ok_or_else(|| {
                    Error::Schema("the delta radius rule needs a bound training set".into())
                })?;
                let r = radius.resolve(self.table, self.theta)?;
                DeltaMembership::radius_rule(training, self.metric, r)?
            }
        };
        Ok(Arc::new(m))
    }

    fn bumps(&self, groups: &[super::farfield::BumpGroupSpec]) -> Result<Vec<BumpGroup>> {
        groups
            .iter()
            .map(|g| g.resolve(self.table, self.theta, self.dim))
            .collect()
    }

    fn bind(&mut self, node: &KernelNode) -> Result<BoundNode> {
        Ok(match node {
            KernelNode::Wendland { r0, variant } => BoundNode::Wendland {
                r0: self.positive(r0, "wendland r0")?,
                variant: *variant,
            },
            KernelNode::Matern32 {
                length_scale,
                sigma,
            } => BoundNode::Matern32 {
                ell: self.positive(length_scale, "matern length scale")?,
                sigma: self.positive(sigma, "matern sigma")?,
            },
            KernelNode::NonstatWendland {
                signal,
                length_scale,
                r0,
                variant,
            } => {
                let signal = signal.resolve(self.table, self.theta, self.dim)?;
                let length = LengthFields::resolve(length_scale, self.table, self.theta, self.dim)?;
                let r0 = self.positive(r0, "nonstat wendland r0")?;
                let off = self.alloc(self.dim + 2);
                BoundNode::Nonstat {
                    off,
                    signal,
                    length,
                    r0,
                    variant: *variant,
                }
            }
            KernelNode::BumpFarfield { groups } => {
                let groups = self.bumps(groups)?;
                let off = self.alloc(groups.len());
                BoundNode::Bumps { off, groups }
            }
            KernelNode::DeltaFarfield { groups } => BoundNode::Deltas(self.deltas(groups)?),
            KernelNode::SplitFarfield {
                signal,
                local_length,
                far_length,
                r0,
                far,
                variant,
            } => {
                let signal = signal.resolve(self.table, self.theta, self.dim)?;
                let local = LengthFields::resolve(local_length, self.table, self.theta, self.dim)?;
                let far_len = LengthFields::resolve(far_length, self.table, self.theta, self.dim)?;
                let r0 = self.positive(r0, "split r0")?;
                let off = self.alloc(1 + 2 * (self.dim + 1));
                let far = match far {
                    FarFieldSpec::Bumps { groups } => {
                        let groups = self.bumps(groups)?;
                        let off = self.alloc(groups.len());
                        BoundFar::Bumps { off, groups }
                    }
                    FarFieldSpec::Deltas { groups } => BoundFar::Deltas(self.deltas(groups)?),
                };
                BoundNode::Split {
                    off,
                    signal,
                    local,
                    far_len,
                    r0,
                    variant: *variant,
                    far,
                }
            }
            KernelNode::Product { children } => BoundNode::Product(
                children
                    .iter()
                    .map(|c| self.bind(c))
                    .collect::<Result<_>>()?,
            ),
            KernelNode::Sum { children } => BoundNode::Sum(
                children
                    .iter()
                    .map(|c| self.bind(c))
                    .collect::<Result<_>>()?,
            ),
            KernelNode::Scale { factor, child } => {
                let c = self.positive(factor, "scale factor")?;
                BoundNode::Scale(c, Box::new(self.bind(child)?))
            }
        })
    }
}

impl BoundNode {
    fn write_features(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            BoundNode::Nonstat {
                off,
                signal,
                length,
                ..
            } => {
                out[*off] = signal.eval(x)?;
                length.write(x, &mut out[off + 1..off + 2 + x.len()])?;
            }
            BoundNode::Bumps { off, groups } => {
                for (u, g) in groups.iter().enumerate() {
                    out[off + u] = g.eval_slice(x);
                }
            }
            BoundNode::Split {
                off,
                signal,
                local,
                far_len,
                far,
                ..
            } => {
                let d = x.len();
                out[*off] = signal.eval(x)?;
                local.write(x, &mut out[off + 1..off + 2 + d])?;
                far_len.write(x, &mut out[off + 2 + d..off + 3 + 2 * d])?;
                if let BoundFar::Bumps { off, groups } = far {
                    for (u, g) in groups.iter().enumerate() {
                        out[off + u] = g.eval_slice(x);
                    }
                }
            }
            BoundNode::Product(cs) | BoundNode::Sum(cs) => {
                for c in cs {
                    c.write_features(x, out)?;
                }
            }
            BoundNode::Scale(_, c) => c.write_features(x, out)?,
            BoundNode::Wendland { .. } | BoundNode::Matern32 { .. } | BoundNode::Deltas(_) => {}
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, metric: &DistanceMetric, a: PointView<'_>, b: PointView<'_>) -> f64 {
        match self {
            BoundNode::Wendland { r0, variant } => {
                wendland_profile(metric.eval_slices(a.x, b.x), *r0, *variant)
            }
            BoundNode::Matern32 { ell, sigma } => {
                matern32_profile(metric.eval_slices(a.x, b.x), *ell, *sigma)
            }
            BoundNode::Nonstat {
                off, r0, variant, ..
            } => {
                let d = a.x.len();
                let (q, det_avg) = quad_form(
                    a.x,
                    b.x,
                    &a.f[off + 1..off + 1 + d],
                    &b.f[off + 1..off + 1 + d],
                );
                let rho = q.sqrt();
                if rho >= *r0 {
                    return 0.0;
                }
                let pre = (a.f[off + 1 + d] * b.f[off + 1 + d]) / det_avg.sqrt();
                (a.f[*off] * b.f[*off]) * pre * wendland_profile(rho, *r0, *variant)
            }
            BoundNode::Bumps { off, groups } => {
                let mut s = 0.0;
                for u in 0..groups.len() {
                    s += a.f[off + u] * b.f[off + u];
                }
                s
            }
            BoundNode::Deltas(m) => m.pair(a.index, b.index),
            BoundNode::Split {
                off,
                r0,
                variant,
                far,
                ..
            } => {
                let d = a.x.len();
                let far_val = match far {
                    BoundFar::Bumps { off, groups } => {
                        let mut s = 0.0;
                        for u in 0..groups.len() {
                            s += a.f[off + u] * b.f[off + u];
                        }
                        s
                    }
                    BoundFar::Deltas(m) => m.pair(a.index, b.index),
                };
                let ls = off + 1;
                let (q, det_q) = quad_form(a.x, b.x, &a.f[ls..ls + d], &b.f[ls..ls + d]);
                let rho = q.sqrt();
                let local = if rho >= *r0 {
                    0.0
                } else {
                    (a.f[ls + d] * b.f[ls + d]) / det_q.sqrt()
                        * wendland_profile(rho, *r0, *variant)
                };
                let far_term = if far_val == 0.0 {
                    0.0
                } else {
                    let fs = ls + d + 1;
                    let (p, det_p) = quad_form(a.x, b.x, &a.f[fs..fs + d], &b.f[fs..fs + d]);
                    (a.f[fs + d] * b.f[fs + d]) / det_p.sqrt()
                        * matern32_profile(p.sqrt(), 1.0, 1.0)
                        * far_val
                };
                if local == 0.0 && far_term == 0.0 {
                    return 0.0;
                }
                0.5 * (a.f[*off] * b.f[*off]) * (local + far_term)
            }
            BoundNode::Product(cs) => {
                let mut v = 1.0;
                for c in cs {
                    let x = c.eval(metric, a, b);
                    if x == 0.0 {
                        return 0.0;
                    }
                    v *= x;
                }
                v
            }
            BoundNode::Sum(cs) => cs.iter().map(|c| c.eval(metric, a, b)).sum(),
            BoundNode::Scale(c, child) => c * child.eval(metric, a, b),
        }
    }
}

/// `(x_i - x_j)^T ((S_i + S_j)/2)^{-1} (x_i - x_j)` for diagonal `S`, plus
/// the determinant of the averaged matrix. Symmetric in its arguments bit
/// for bit.
#[inline]
fn quad_form(xa: &[f64], xb: &[f64], sa: &[f64], sb: &[f64]) -> (f64, f64) {
    let mut q = 0.0;
    let mut det = 1.0;
    for k in 0..xa.len() {
        let avg = 0.5 * (sa[k] + sb[k]);
        let dk = xa[k] - xb[k];
        q += dk * dk / avg;
        det *= avg;
    }
    (q, det)
}

#[derive(Clone, Debug)]
pub struct BoundKernel {
    root: BoundNode,
    metric: DistanceMetric,
    dim: usize,
    feature_len: usize,
}

impl BoundKernel {
    /// Resolves `spec` at `theta` for points of dimension `dim`. `training`
    /// is required by delta far-fields that derive their groups from data.
    pub fn bind(
        spec: &KernelSpec,
        theta: &[f64],
        dim: usize,
        training: Option<&[Point]>,
    ) -> Result<Self> {
        let table = spec.validate()?;
        table.check_bounds(theta)?;
        if dim == 0 {
            return Err(Error::input("dimension must be >= 1"));
        }
        let metric = DistanceMetric {
            kind: spec.metric.kind,
            ard_scales: spec
                .metric
                .ard_scales
                .as_ref()
                .map(|s| {
                    s.iter()
                        .map(|p| p.resolve(&table, theta))
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()?,
        };
        metric.validate(dim)?;
        let mut binder = Binder {
            table: &table,
            theta,
            dim,
            metric: &metric,
            training,
            feature_len: 0,
        };
        let root = binder.bind(&spec.root)?;
        let feature_len = binder.feature_len;
        Ok(BoundKernel {
            root,
            metric,
            dim,
            feature_len,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> &DistanceMetric {
        &self.metric
    }

    pub fn prepare(&self, points: &[Point]) -> Result<PreparedPoints> {
        let n = points.len();
        let mut coords = Vec::with_capacity(n * self.dim);
        let mut index = Vec::with_capacity(n);
        let mut features = vec![0.0; n * self.feature_len];
        for (i, p) in points.iter().enumerate() {
            p.validate()?;
            if p.dim() != self.dim {
                return Err(Error::input(format!(
                    "point {i} has dimension {} but the kernel is bound for {}",
                    p.dim(),
                    self.dim
                )));
            }
            coords.extend_from_slice(&p.coords);
            index.push(p.index);
            let row = &mut features[i * self.feature_len..(i + 1) * self.feature_len];
            self.root.write_features(&p.coords, row)?;
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Evaluation(format!(
                    "point {i} has non-finite kernel feature {bad}"
                )));
            }
        }
        Ok(PreparedPoints {
            dim: self.dim,
            coords,
            index,
            features,
            feature_len: self.feature_len,
        })
    }

    #[inline]
    pub fn pair(&self, a: &PreparedPoints, i: usize, b: &PreparedPoints, j: usize) -> f64 {
        self.root.eval(&self.metric, a.view(i), b.view(j))
    }

    /// Dense `|a| x |b|` Gram matrix.
    pub fn gram(&self, a: &PreparedPoints, b: &PreparedPoints) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(a.len(), b.len());
        for j in 0..b.len() {
            for i in 0..a.len() {
                let v = self.pair(a, i, b, j);
                if !v.is_finite() {
                    return Err(Error::Evaluation(format!("kernel value {v} at ({i}, {j})")));
                }
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn diag(&self, a: &PreparedPoints) -> Vec<f64> {
        (0..a.len()).map(|i| self.pair(a, i, a, i)).collect()
    }
}

/// Kernel value for one pair of points.
pub fn eval_kernel(spec: &KernelSpec, theta: &[f64], xi: &Point, xj: &Point) -> Result<f64> {
    if xi.dim() != xj.dim() {
        return Err(Error::input("points differ in dimension"));
    }
    let k = BoundKernel::bind(spec, theta, xi.dim(), None)?;
    let p = k.prepare(&[xi.clone(), xj.clone()])?;
    let v = k.pair(&p, 0, &p, 1);
    if !v.is_finite() {
        return Err(Error::Evaluation(format!("kernel value {v}")));
    }
    Ok(v)
}

/// Dense Gram block between two point sequences.
pub fn gram_block(
    spec: &KernelSpec,
    theta: &[f64],
    a: &[Point],
    b: &[Point],
) -> Result<DMatrix<f64>> {
    let dim = a.first().or(b.first()).map_or(1, Point::dim);
    let k = BoundKernel::bind(spec, theta, dim, None)?;
    k.gram(&k.prepare(a)?, &k.prepare(b)?)
}
