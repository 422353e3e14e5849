use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::presets::{f1_nonstat_preset, matern_base_preset, ModelPreset};
use crate::assembly::AssemblyPlan;
use crate::error::{Error, Result};
use crate::gp::{MeanFunction, NoiseModel, VarianceKind};
use crate::kernel::KernelSpec;
use crate::mcmc::McmcConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    SyntheticF1 {
        n_train: usize,
        n_test: usize,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        #[serde(default = "default_grid")]
        grid_size: usize,
    },
    Csv {
        path: String,
        #[serde(default)]
        test_path: Option<String>,
        /// Used when `test_path` is absent.
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        dim: Option<usize>,
    },
}

fn default_noise_std() -> f64 {
    0.1
}

fn default_grid() -> usize {
    500
}

fn default_test_fraction() -> f64 {
    0.2
}

/// A kernel given inline or as a path to a kernel-spec JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelRef {
    Path { path: String },
    Inline(KernelSpec),
}

impl KernelRef {
    pub fn load(&self, base: Option<&Path>) -> Result<KernelSpec> {
        match self {
            KernelRef::Inline(s) => Ok(s.clone()),
            KernelRef::Path { path } => {
                let p = Path::new(path);
                let p = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.to_path_buf(),
                };
                KernelSpec::load(p)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kernel: KernelRef,
    pub noise: NoiseModel,
    #[serde(default)]
    pub mean: MeanFunction,
    pub mcmc: McmcConfig,
}

impl ModelConfig {
    pub fn from_preset(p: ModelPreset, iterations: usize) -> Self {
        ModelConfig {
            kernel: KernelRef::Inline(p.kernel),
            noise: p.noise,
            mean: MeanFunction::Zero,
            mcmc: McmcConfig {
                iterations,
                blocks: p.blocks,
                ..McmcConfig::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: u64,
    pub chain: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub data: DataSource,
    pub model: ModelConfig,
    /// Dense base GP trained and scored on the same split.
    #[serde(default)]
    pub base_gp: Option<ModelConfig>,
    pub seeds: Seeds,
    pub assembly: AssemblyPlan,
    /// Variance fed to CRPS.
    pub score_variance: VarianceKind,
    pub repeats: usize,
    /// Training-set sizes for a timing sweep at the selected θ.
    #[serde(default)]
    pub timing_sizes: Vec<usize>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    /// The 1-D synthetic benchmark: 2000 training and 1000 test points,
    /// non-stationary Wendland model and a dense Matérn base GP.
    pub fn f1_benchmark() -> Self {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            data: DataSource::SyntheticF1 {
                n_train: 2000,
                n_test: 1000,
                noise_std: default_noise_std(),
                grid_size: default_grid(),
            },
            model: ModelConfig::from_preset(f1_nonstat_preset(5), 1000),
            base_gp: Some(ModelConfig::from_preset(matern_base_preset(), 150)),
            seeds: Seeds::default(),
            assembly: AssemblyPlan::default(),
            score_variance: VarianceKind::Y,
            repeats: 1,
            timing_sizes: Vec::new(),
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "config schema version {} is not supported",
                self.schema_version
            )));
        }
        match &self.data {
            DataSource::SyntheticF1 {
                n_train,
                n_test,
                noise_std,
                ..
            } => {
                if *n_train == 0 || *n_test == 0 {
                    return Err(Error::input("n_train and n_test must be positive"));
                }
                if !(*noise_std >= 0.0) {
                    return Err(Error::input("noise_std must be >= 0"));
                }
            }
            DataSource::Csv {
                test_fraction,
                test_path,
                ..
            } => {
                if test_path.is_none() && !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                    return Err(Error::input("test_fraction must lie in (0, 1)"));
                }
            }
        }
        if self.repeats == 0 {
            return Err(Error::input("repeats must be >= 1"));
        }
        AssemblyPlan::new(self.assembly.block_size, self.assembly.workers)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("invalid config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides by dotted path. Keys must exist;
    /// values are parsed as JSON, falling back to a plain string.
    pub fn with_overrides<'a>(&self, overrides: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::input(format!("override `{o}` is not key=value")))?;
            set_path(&mut v, key.trim(), raw.trim())?;
        }
        let c: ExperimentConfig = serde_json::from_value(v)
            .map_err(|e| Error::Schema(format!("invalid config after overrides: {e}")))?;
        c.validate()?;
        Ok(c)
    }
}

fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let missing = || Error::input(format!("unknown config key `{key}`"));
    let mut cur = root;
    for part in key.split('.') {
        cur = match cur {
            Value::Object(m) => m.get_mut(part).ok_or_else(missing)?,
            Value::Array(a) => {
                let i: usize = part.parse().map_err(|_| missing())?;
                a.get_mut(i).ok_or_else(missing)?
            }
            _ => return Err(missing()),
        };
    }
    *cur = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}
