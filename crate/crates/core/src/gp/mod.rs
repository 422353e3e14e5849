//! Exact GP marginal likelihood and posterior through the sparse pipeline,
//! plus the dense reference GP.

mod checkpoint;
mod data;
mod dense;
mod model;

pub use checkpoint::{
    read_predictions, write_predictions, Checkpoint, DatasetInfo, PredictionRow, ENGINE_VERSION,
};
pub use data::Dataset;
pub use dense::{dense_fit, dense_log_marginal_likelihood, dense_reference_fit_predict, DenseFit};
pub use model::{
    EvalTimings, GpModel, LmlEvaluation, MeanFn, MeanFunction, NamedParams, NoiseModel, PluginMean,
    PosteriorGaussian, TrainedModel, VarianceKind, CLAMP_TOLERANCE,
};
