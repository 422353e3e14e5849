//! Synthetic data, dataset files, experiment configuration and runs.

mod config;
mod csvio;
mod experiment;
mod presets;
mod synthetic;

pub use config::{
    DataSource, ExperimentConfig, KernelRef, ModelConfig, Seeds, CONFIG_SCHEMA_VERSION,
};
pub use csvio::{load_csv, read_dataset, save_csv, write_dataset};
pub use experiment::{
    artifacts, prepare_data, run_experiment, run_repeats, split_indices, timing_row, train_model,
    BaseGpReport, ChainSummary, MeanStd, RepeatSummary, RunReport, Split, TimingRow, Trained,
    REPORT_SCHEMA_VERSION,
};
pub use presets::{f1_nonstat_preset, matern_base_preset, ModelPreset};
pub use synthetic::{make_synthetic_dataset, synth_f1, SyntheticData};
