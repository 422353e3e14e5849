//! Named, bounded hyperparameter slots and references to them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Identity,
    Exp,
}

/// A numeric kernel/noise/mean parameter: either a literal or a reference
/// to a sampled slot, optionally through an exponential link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Fixed(f64),
    Slot {
        slot: String,
        #[serde(default, skip_serializing_if = "is_identity")]
        link: Link,
    },
}

fn is_identity(l: &Link) -> bool {
    *l == Link::Identity
}

impl Param {
    pub fn slot(name: impl Into<String>) -> Self {
        Param::Slot {
            slot: name.into(),
            link: Link::Identity,
        }
    }

    pub fn exp_slot(name: impl Into<String>) -> Self {
        Param::Slot {
            slot: name.into(),
            link: Link::Exp,
        }
    }

    pub fn slot_name(&self) -> Option<&str> {
        match self {
            Param::Fixed(_) => None,
            Param::Slot { slot, .. } => Some(slot),
        }
    }

    pub fn resolve(&self, table: &ParameterTable, theta: &[f64]) -> Result<f64> {
        match self {
            Param::Fixed(v) => Ok(*v),
            Param::Slot { slot, link } => {
                let i = table.index_of(slot)?;
                let raw = theta[i];
                Ok(match link {
                    Link::Identity => raw,
                    Link::Exp => raw.exp(),
                })
            }
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Fixed(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// Starting value; the sampler uses the midpoint of the bounds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<f64>,
}

impl SlotDef {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        SlotDef {
            name: name.into(),
            lower,
            upper,
            init: None,
        }
    }

    pub fn with_init(mut self, v: f64) -> Self {
        self.init = Some(v);
        self
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// The ordered slot list; a hyperparameter vector is a `&[f64]` aligned
/// with it.
#[derive(Clone, Debug, Default)]
pub struct ParameterTable {
    slots: Vec<SlotDef>,
    index: HashMap<String, usize>,
}

impl ParameterTable {
    pub fn new(slots: Vec<SlotDef>) -> Result<Self> {
        let mut index = HashMap::with_capacity(slots.len());
        for (i, s) in slots.iter().enumerate() {
            if !(s.lower < s.upper) || !s.lower.is_finite() || !s.upper.is_finite() {
                return Err(Error::Schema(format!(
                    "slot '{}' needs finite bounds with lower < upper",
                    s.name
                )));
            }
            if let Some(v) = s.init {
                if !s.contains(v) {
                    return Err(Error::Schema(format!(
                        "slot '{}' init {v} is outside [{}, {}]",
                        s.name, s.lower, s.upper
                    )));
                }
            }
            if index.insert(s.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate slot '{}'", s.name)));
            }
        }
        Ok(ParameterTable { slots, index })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[SlotDef] {
        &self.slots
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("unknown hyperparameter slot '{name}'")))
    }

    pub fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.slots.len() {
            return Err(Error::hyper(format!(
                "expected {} hyperparameters, got {}",
                self.slots.len(),
                theta.len()
            )));
        }
        Ok(())
    }

    pub fn in_bounds(&self, theta: &[f64]) -> bool {
        theta.len() == self.slots.len() && self.slots.iter().zip(theta).all(|(s, v)| s.contains(*v))
    }

    pub fn check_bounds(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        for (s, v) in self.slots.iter().zip(theta) {
            if !s.contains(*v) {
                return Err(Error::hyper(format!(
                    "'{}' = {v} outside [{}, {}]",
                    s.name, s.lower, s.upper
                )));
            }
        }
        Ok(())
    }

    /// User-supplied init where present, otherwise the bound midpoint.
    pub fn initial(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| s.init.unwrap_or_else(|| s.midpoint()))
            .collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.slots.iter().map(|s| (s.lower, s.upper)).collect()
    }
}
