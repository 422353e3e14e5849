//! Far-field terms built from bump functions and index deltas.

use serde::{Deserialize, Serialize};

use super::functions::BumpFunction;
use super::metric::{DistanceMetric, Point};
use super::param::{Param, ParameterTable};
use crate::error::{Error, Result};

/// One `g_u`: the sum of its bumps.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpGroup {
    pub bumps: Vec<BumpFunction>,
}

impl BumpGroup {
    #[inline]
    pub(crate) fn eval_slice(&self, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.eval_slice(x)).sum()
    }
}

/// `sum_u g_u(x_i) g_u(x_j)`.
pub fn bump_farfield(xi: &[f64], xj: &[f64], groups: &[BumpGroup]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::input("bump far-field needs at least one group"));
    }
    for g in groups {
        if g.bumps.is_empty() {
            return Err(Error::input("bump group has no bumps"));
        }
        for b in &g.bumps {
            b.validate()?;
            if b.center.len() != xi.len() || xj.len() != xi.len() {
                return Err(Error::input("bump dimension mismatch"));
            }
        }
    }
    Ok(groups
        .iter()
        .map(|g| g.eval_slice(xi) * g.eval_slice(xj))
        .sum())
}

/// The dataset indices whose deltas make up one `g_p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaGroup {
    pub members: Vec<usize>,
}

/// `sum_p g_p(x_i) g_p(x_j)` where `g_p(x)` counts members of group `p`
/// equal to `x`'s dataset index. Unindexed points contribute zero.
pub fn delta_farfield(xi: &Point, xj: &Point, groups: &[DeltaGroup]) -> f64 {
    let (Some(i), Some(j)) = (xi.index, xj.index) else {
        return 0.0;
    };
    groups
        .iter()
        .map(|g| {
            let ci = g.members.iter().filter(|&&m| m == i).count();
            let cj = g.members.iter().filter(|&&m| m == j).count();
            (ci * cj) as f64
        })
        .sum()
}

/// Per-point inverted index of delta groups: for each dataset index the
/// sorted `(group, multiplicity)` pairs it belongs to.
#[derive(Clone, Debug, Default)]
pub struct DeltaMembership {
    per_point: Vec<Vec<(u32, u32)>>,
}

impl DeltaMembership {
    pub fn from_groups(groups: &[DeltaGroup], n: usize) -> Result<Self> {
        let mut per_point: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for (p, g) in groups.iter().enumerate() {
            for &m in &g.members {
                if m >= n {
                    return Err(Error::input(format!(
                        "delta group {p} references index {m} but the dataset has {n} points"
                    )));
                }
                let list = &mut per_point[m];
                match list.last_mut() {
                    Some((last, c)) if *last == p as u32 => *c += 1,
                    _ => list.push((p as u32, 1)),
                }
            }
        }
        Ok(DeltaMembership { per_point })
    }

    /// Radius rule: group `p` holds every point within `radius` of point `p`.
    pub fn radius_rule(points: &[Point], metric: &DistanceMetric, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::hyper("delta radius must be >= 0"));
        }
        let n = points.len();
        let mut per_point: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for q in 0..n {
            per_point[q].push((q as u32, 1));
            for p in (q + 1)..n {
                if metric.eval_slices(&points[q].coords, &points[p].coords) < radius {
                    per_point[q].push((p as u32, 1));
                    per_point[p].push((q as u32, 1));
                }
            }
        }
        for l in per_point.iter_mut() {
            l.sort_unstable();
        }
        Ok(DeltaMembership { per_point })
    }

    pub fn len(&self) -> usize {
        self.per_point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_point.is_empty()
    }

    #[inline]
    pub(crate) fn pair(&self, i: Option<usize>, j: Option<usize>) -> f64 {
        let (Some(i), Some(j)) = (i, j) else {
            return 0.0;
        };
        let (Some(a), Some(b)) = (self.per_point.get(i), self.per_point.get(j)) else {
            return 0.0;
        };
        let (mut x, mut y) = (0usize, 0usize);
        let mut acc = 0u64;
        while x < a.len() && y < b.len() {
            match a[x].0.cmp(&b[y].0) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[x].1 as u64 * b[y].1 as u64;
                    x += 1;
                    y += 1;
                }
            }
        }
        acc as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub amplitude: Param,
    pub shape: Param,
    pub radius: Param,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpGroupSpec {
    pub bumps: Vec<BumpSpec>,
}

impl BumpGroupSpec {
    pub fn resolve(&self, table: &ParameterTable, theta: &[f64], dim: usize) -> Result<BumpGroup> {
        if self.bumps.is_empty() {
            return Err(Error::Schema("bump group has no bumps".into()));
        }
        let bumps = self
            .bumps
            .iter()
            .map(|b| {
                if b.center.len() != dim {
                    return Err(Error::Schema("bump center dimension mismatch".into()));
                }
                let f = BumpFunction {
                    center: b.center.clone(),
                    amplitude: b.amplitude.resolve(table, theta)?,
                    shape: b.shape.resolve(table, theta)?,
                    radius: b.radius.resolve(table, theta)?,
                };
                f.validate()?;
                Ok(f)
            })
            .collect::<Result<_>>()?;
        Ok(BumpGroup { bumps })
    }
}

/// `groups` bump groups of `per_group` bumps each, centered on a uniform
/// grid over `[lo, hi]` (filled group by group). Group `u` uses amplitude
/// slot `{prefix}{u}`; shape and radius are shared.
pub fn bump_grid_1d(
    groups: usize,
    per_group: usize,
    lo: f64,
    hi: f64,
    prefix: &str,
    shape: Param,
    radius: Param,
) -> Vec<BumpGroupSpec> {
    let total = groups * per_group;
    let step = (hi - lo) / total as f64;
    (0..groups)
        .map(|u| BumpGroupSpec {
            bumps: (0..per_group)
                .map(|p| BumpSpec {
                    center: vec![lo + step * ((u * per_group + p) as f64 + 0.5)],
                    amplitude: Param::slot(format!("{prefix}{u}")),
                    shape: shape.clone(),
                    radius: radius.clone(),
                })
                .collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DeltaGroupsSpec {
    Explicit {
        groups: Vec<DeltaGroup>,
    },
    /// One group per training point holding its neighbors within `radius`.
    Radius {
        radius: Param,
    },
}
