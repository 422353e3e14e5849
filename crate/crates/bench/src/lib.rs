//! Shared fixtures for the benchmarks.

use sparsegp::assembly::AssemblyPlan;
use sparsegp::gp::{Dataset, GpModel};
use sparsegp::harness::{f1_nonstat_preset, make_synthetic_dataset};
use sparsegp::kernel::ParameterTable;
use sparsegp::mcmc::initial_theta;

/// Synthetic 1-D data, the benchmark model and its starting θ.
pub fn fixture(n: usize) -> (Dataset, GpModel, Vec<f64>) {
    let data = make_synthetic_dataset(n, 0.1, 0, 0)
        .expect("synthetic data")
        .data;
    let preset = f1_nonstat_preset(5);
    let model = GpModel::new(preset.kernel, preset.noise)
        .with_plan(AssemblyPlan::new(1000, 1).expect("plan"));
    let table: ParameterTable = model.table().expect("valid preset");
    let theta = initial_theta(&table, std::iter::empty()).expect("initial θ");
    (data, model, theta)
}
