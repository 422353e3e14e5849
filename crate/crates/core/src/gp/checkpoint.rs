use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::{GpModel, MeanFunction, NoiseModel, PosteriorGaussian, TrainedModel};
use crate::assembly::{AssemblyPlan, AssemblyReport};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::sparse::{MinresOptions, Ordering};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub fingerprint: String,
    pub n: usize,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Serialized trained model. The cached solution is not stored; it is
/// recomputed from the training data, whose fingerprint must match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub engine_version: String,
    pub kernel: KernelSpec,
    pub theta: BTreeMap<String, f64>,
    pub noise: NoiseModel,
    pub mean: MeanFunction,
    pub block_size: usize,
    pub workers: usize,
    pub ordering: Ordering,
    pub minres_tol: f64,
    pub dataset: DatasetInfo,
    pub lml: f64,
    pub assembly: AssemblyReport,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
}

impl Checkpoint {
    pub fn from_trained(model: &TrainedModel, dataset_path: Option<String>) -> Result<Self> {
        if let MeanFunction::Plugin(p) = &model.model.mean {
            return Err(Error::input(format!(
                "plug-in mean `{}` cannot be checkpointed",
                p.name
            )));
        }
        let table = model.model.table()?;
        Ok(Checkpoint {
            engine_version: ENGINE_VERSION.to_string(),
            kernel: model.model.spec.clone(),
            theta: table
                .names()
                .map(str::to_string)
                .zip(model.theta.iter().copied())
                .collect(),
            noise: model.model.noise.clone(),
            mean: model.model.mean.clone(),
            block_size: model.model.plan.block_size,
            workers: model.model.plan.workers,
            ordering: model.model.ordering,
            minres_tol: model.model.minres.tol,
            dataset: DatasetInfo {
                fingerprint: model.data.fingerprint(),
                n: model.data.len(),
                dim: model.data.dim(),
                path: dataset_path,
            },
            lml: model.lml,
            assembly: model.assembly.clone(),
            seeds: BTreeMap::new(),
        })
    }

    pub fn model(&self) -> Result<GpModel> {
        let m = GpModel {
            spec: self.kernel.clone(),
            noise: self.noise.clone(),
            mean: self.mean.clone(),
            plan: AssemblyPlan::new(self.block_size, self.workers)?,
            minres: MinresOptions {
                tol: self.minres_tol,
                maxiter: None,
            },
            ordering: self.ordering,
        };
        m.table()?;
        Ok(m)
    }

    /// θ in parameter-table order.
    pub fn theta_vec(&self) -> Result<Vec<f64>> {
        let table = self.kernel.validate()?;
        if table.len() != self.theta.len() {
            return Err(Error::Schema(
                "checkpoint θ does not match the kernel's parameter table".into(),
            ));
        }
        table
            .names()
            .map(|n| {
                self.theta
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::Schema(format!("checkpoint is missing θ `{n}`")))
            })
            .collect()
    }

    /// Refits on `data`, which must be the dataset the checkpoint was
    /// trained on.
    pub fn restore(&self, data: Arc<Dataset>) -> Result<TrainedModel> {
        let fp = data.fingerprint();
        if fp != self.dataset.fingerprint {
            return Err(Error::StaleCheckpoint(format!(
                "training data fingerprint {fp} does not match checkpoint {}",
                self.dataset.fingerprint
            )));
        }
        self.model()?.fit(&self.theta_vec()?, data)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("invalid checkpoint: {e}")))?;
        c.theta_vec()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut s = String::new();
        std::fs::File::open(path)?.read_to_string(&mut s)?;
        Checkpoint::from_json(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub index: usize,
    pub mean: f64,
    pub variance: f64,
    pub variance_kind: String,
}

pub fn write_predictions<W: Write>(post: &PosteriorGaussian, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for (i, (m, v)) in post.mean.iter().zip(&post.variance).enumerate() {
        csv.serialize(PredictionRow {
            index: i,
            mean: *m,
            variance: *v,
            variance_kind: post.kind.as_str().to_string(),
        })?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> Result<Vec<PredictionRow>> {
    let mut csv = csv::Reader::from_reader(r);
    let headers = csv.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["index", "mean", "variance", "variance_kind"] {
        return Err(Error::Schema(format!(
            "unexpected prediction header {:?}",
            headers
        )));
    }
    let mut out = Vec::new();
    for (line, row) in csv.deserialize().enumerate() {
        let row: PredictionRow =
            row.map_err(|e| Error::Schema(format!("prediction row {}: {e}", line + 2)))?;
        if !row.mean.is_finite() || !(row.variance >= 0.0) {
            return Err(Error::Schema(format!(
                "prediction row {} has invalid values",
                line + 2
            )));
        }
        out.push(row);
    }
    Ok(out)
}
