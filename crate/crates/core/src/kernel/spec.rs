//! Serializable kernel description.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::farfield::{BumpGroupSpec, DeltaGroupsSpec};
use super::field::ParametricField;
use super::functions::WendlandVariant;
use super::metric::MetricKind;
use super::param::{Param, ParameterTable, SlotDef};
use crate::error::{Error, Result};

pub const KERNEL_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    #[serde(default)]
    pub kind: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ard_scales: Option<Vec<Param>>,
}

/// Far-field part of a split kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FarFieldSpec {
    Bumps { groups: Vec<BumpGroupSpec> },
    Deltas { groups: DeltaGroupsSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelNode {
    Wendland {
        r0: Param,
        #[serde(default)]
        variant: WendlandVariant,
    },
    Matern32 {
        length_scale: Param,
        sigma: Param,
    },
    /// Convolution-style non-stationary Wendland kernel. `length_scale`
    /// holds one field (isotropic) or one per dimension; the diagonal of
    /// `Sigma(x)` is the squared field values.
    NonstatWendland {
        signal: ParametricField,
        length_scale: Vec<ParametricField>,
        r0: Param,
        #[serde(default)]
        variant: WendlandVariant,
    },
    BumpFarfield {
        groups: Vec<BumpGroupSpec>,
    },
    DeltaFarfield {
        groups: DeltaGroupsSpec,
    },
    /// `1/2 s(x_i) s(x_j) [ pre_Sigma W(sqrt Q) + pre_Phi M(sqrt P) far(x_i, x_j) ]`
    /// with a local Wendland term and a Matern 3/2 term gated by the far field.
    SplitFarfield {
        signal: ParametricField,
        local_length: Vec<ParametricField>,
        far_length: Vec<ParametricField>,
        r0: Param,
        far: FarFieldSpec,
        #[serde(default)]
        variant: WendlandVariant,
    },
    Product {
        children: Vec<KernelNode>,
    },
    Sum {
        children: Vec<KernelNode>,
    },
    Scale {
        factor: Param,
        child: Box<KernelNode>,
    },
}

impl KernelNode {
    pub fn wendland(r0: impl Into<Param>) -> Self {
        KernelNode::Wendland {
            r0: r0.into(),
            variant: WendlandVariant::Printed,
        }
    }

    pub fn matern32(length_scale: impl Into<Param>, sigma: impl Into<Param>) -> Self {
        KernelNode::Matern32 {
            length_scale: length_scale.into(),
            sigma: sigma.into(),
        }
    }

    pub fn scale(factor: impl Into<Param>, child: KernelNode) -> Self {
        KernelNode::Scale {
            factor: factor.into(),
            child: Box::new(child),
        }
    }

    pub fn product(children: Vec<KernelNode>) -> Self {
        KernelNode::Product { children }
    }

    pub fn sum(children: Vec<KernelNode>) -> Self {
        KernelNode::Sum { children }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            KernelNode::Wendland { .. } => "wendland",
            KernelNode::Matern32 { .. } => "matern32",
            KernelNode::NonstatWendland { .. } => "nonstat_wendland",
            KernelNode::BumpFarfield { .. } => "bump_farfield",
            KernelNode::DeltaFarfield { .. } => "delta_farfield",
            KernelNode::SplitFarfield { .. } => "split_farfield",
            KernelNode::Product { .. } => "product",
            KernelNode::Sum { .. } => "sum",
            KernelNode::Scale { .. } => "scale",
        }
    }

    fn visit_params<'a>(&'a self, out: &mut Vec<&'a Param>) {
        fn fields<'a>(fs: &'a [ParametricField], out: &mut Vec<&'a Param>) {
            for f in fs {
                out.extend(f.params());
            }
        }
        fn bumps<'a>(gs: &'a [BumpGroupSpec], out: &mut Vec<&'a Param>) {
            for g in gs {
                for b in &g.bumps {
                    out.extend([&b.amplitude, &b.shape, &b.radius]);
                }
            }
        }
        match self {
            KernelNode::Wendland { r0, .. } => out.push(r0),
            KernelNode::Matern32 {
                length_scale,
                sigma,
            } => out.extend([length_scale, sigma]),
            KernelNode::NonstatWendland {
                signal,
                length_scale,
                r0,
                ..
            } => {
                out.extend(signal.params());
                fields(length_scale, out);
                out.push(r0);
            }
            KernelNode::BumpFarfield { groups } => bumps(groups, out),
            KernelNode::DeltaFarfield { groups } => {
                if let DeltaGroupsSpec::Radius { radius } = groups {
                    out.push(radius);
                }
            }
            KernelNode::SplitFarfield {
                signal,
                local_length,
                far_length,
                r0,
                far,
                ..
            } => {
                out.extend(signal.params());
                fields(local_length, out);
                fields(far_length, out);
                out.push(r0);
                match far {
                    FarFieldSpec::Bumps { groups } => bumps(groups, out),
                    FarFieldSpec::Deltas {
                        groups: DeltaGroupsSpec::Radius { radius },
                    } => out.push(radius),
                    FarFieldSpec::Deltas { .. } => {}
                }
            }
            KernelNode::Product { children } | KernelNode::Sum { children } => {
                for c in children {
                    c.visit_params(out);
                }
            }
            KernelNode::Scale { factor, child } => {
                out.push(factor);
                child.visit_params(out);
            }
        }
    }

    fn visit_amplitudes<'a>(&'a self, out: &mut Vec<&'a Param>) {
        let bumps = |gs: &'a [BumpGroupSpec], out: &mut Vec<&'a Param>| {
            for g in gs {
                for b in &g.bumps {
                    out.push(&b.amplitude);
                }
            }
        };
        match self {
            KernelNode::BumpFarfield { groups } => bumps(groups, out),
            KernelNode::SplitFarfield {
                far: FarFieldSpec::Bumps { groups },
                ..
            } => bumps(groups, out),
            KernelNode::Product { children } | KernelNode::Sum { children } => {
                for c in children {
                    c.visit_amplitudes(out);
                }
            }
            KernelNode::Scale { child, .. } => child.visit_amplitudes(out),
            _ => {}
        }
    }

    fn describe_into(&self, depth: usize, s: &mut String) {
        let pad = "  ".repeat(depth);
        let p = |p: &Param| match p {
            Param::Fixed(v) => format!("{v}"),
            Param::Slot { slot, link } => match link {
                super::param::Link::Identity => format!("${slot}"),
                super::param::Link::Exp => format!("exp(${slot})"),
            },
        };
        match self {
            KernelNode::Wendland { r0, variant } => {
                let _ = writeln!(s, "{pad}wendland(r0={}, {variant:?})", p(r0));
            }
            KernelNode::Matern32 {
                length_scale,
                sigma,
            } => {
                let _ = writeln!(
                    s,
                    "{pad}matern32(l={}, sigma={})",
                    p(length_scale),
                    p(sigma)
                );
            }
            KernelNode::NonstatWendland {
                length_scale, r0, ..
            } => {
                let _ = writeln!(
                    s,
                    "{pad}nonstat_wendland(r0={}, length fields={})",
                    p(r0),
                    length_scale.len()
                );
            }
            KernelNode::BumpFarfield { groups } => {
                let _ = writeln!(
                    s,
                    "{pad}bump_farfield(U={}, P={:?})",
                    groups.len(),
                    groups.iter().map(|g| g.bumps.len()).collect::<Vec<_>>()
                );
            }
            KernelNode::DeltaFarfield { groups } => match groups {
                DeltaGroupsSpec::Explicit { groups } => {
                    let _ = writeln!(s, "{pad}delta_farfield(explicit, {} groups)", groups.len());
                }
                DeltaGroupsSpec::Radius { radius } => {
                    let _ = writeln!(s, "{pad}delta_farfield(radius={})", p(radius));
                }
            },
            KernelNode::SplitFarfield { r0, far, .. } => {
                let far = match far {
                    FarFieldSpec::Bumps { groups } => format!("bumps U={}", groups.len()),
                    FarFieldSpec::Deltas { .. } => "deltas".to_string(),
                };
                let _ = writeln!(s, "{pad}split_farfield(r0={}, far={far})", p(r0));
            }
            KernelNode::Product { children } | KernelNode::Sum { children } => {
                let _ = writeln!(s, "{pad}{}", self.kind_name());
                for c in children {
                    c.describe_into(depth + 1, s);
                }
            }
            KernelNode::Scale { factor, child } => {
                let _ = writeln!(s, "{pad}scale({})", p(factor));
                child.describe_into(depth + 1, s);
            }
        }
    }

    fn check_structure(&self) -> Result<()> {
        match self {
            KernelNode::Product { children } | KernelNode::Sum { children } => {
                if children.is_empty() {
                    return Err(Error::Schema(format!(
                        "{} node has no children",
                        self.kind_name()
                    )));
                }
                children.iter().try_for_each(|c| c.check_structure())
            }
            KernelNode::Scale { child, .. } => child.check_structure(),
            KernelNode::BumpFarfield { groups }
            | KernelNode::SplitFarfield {
                far: FarFieldSpec::Bumps { groups },
                ..
            } => {
                if groups.is_empty() || groups.iter().any(|g| g.bumps.is_empty()) {
                    return Err(Error::Schema(
                        "bump far-field needs U >= 1 groups with P >= 1 bumps".into(),
                    ));
                }
                Ok(())
            }
            KernelNode::NonstatWendland { length_scale, .. } if length_scale.is_empty() => Err(
                Error::Schema("nonstat_wendland needs at least one length-scale field".into()),
            ),
            KernelNode::SplitFarfield {
                local_length,
                far_length,
                ..
            } if local_length.is_empty() || far_length.is_empty() => Err(Error::Schema(
                "split_farfield needs length-scale fields".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// A kernel tree plus the parameter table its slot references resolve
/// against. Noise and mean models share the same table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub version: u32,
    #[serde(default)]
    pub metric: MetricSpec,
    pub parameters: Vec<SlotDef>,
    pub root: KernelNode,
}

impl KernelSpec {
    pub fn new(root: KernelNode, parameters: Vec<SlotDef>) -> Self {
        KernelSpec {
            version: KERNEL_SCHEMA_VERSION,
            metric: MetricSpec::default(),
            parameters,
            root,
        }
    }

    pub fn with_metric(mut self, metric: MetricSpec) -> Self {
        self.metric = metric;
        self
    }

    pub fn table(&self) -> Result<ParameterTable> {
        ParameterTable::new(self.parameters.clone())
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        self.root.visit_params(&mut out);
        if let Some(ard) = &self.metric.ard_scales {
            out.extend(ard);
        }
        out
    }

    pub fn referenced_slots(&self) -> BTreeSet<String> {
        self.params()
            .into_iter()
            .filter_map(|p| p.slot_name().map(str::to_string))
            .collect()
    }

    /// Slots that drive bump amplitudes; training starts with these at zero.
    pub fn amplitude_slots(&self) -> BTreeSet<String> {
        let mut out = Vec::new();
        self.root.visit_amplitudes(&mut out);
        out.into_iter()
            .filter_map(|p| p.slot_name().map(str::to_string))
            .collect()
    }

    pub fn validate(&self) -> Result<ParameterTable> {
        if self.version != KERNEL_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "kernel schema version {} is not supported (expected {KERNEL_SCHEMA_VERSION})",
                self.version
            )));
        }
        let table = self.table()?;
        self.root.check_structure()?;
        for name in self.referenced_slots() {
            table.index_of(&name)?;
        }
        Ok(table)
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        self.root.describe_into(0, &mut s);
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: KernelSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
