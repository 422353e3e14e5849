//! Kernel functions, non-stationary fields, far-field terms and the
//! composable kernel tree.

mod bound;
mod farfield;
mod field;
mod functions;
mod metric;
mod param;
mod spec;

pub use bound::{eval_kernel, gram_block, BoundKernel, PreparedPoints};
pub use farfield::{
    bump_farfield, bump_grid_1d, delta_farfield, BumpGroup, BumpGroupSpec, BumpSpec, DeltaGroup,
    DeltaGroupsSpec, DeltaMembership,
};
pub use field::{radial_field_1d, ParametricField, ResolvedField};
pub use functions::{
    bump_eval, matern32, matern32_profile, wendland, wendland_profile, wendland_with, BumpFunction,
    WendlandVariant, BUMP_GUARD,
};
pub use metric::{distance, DistanceMetric, MetricKind, Point};
pub use param::{Link, Param, ParameterTable, SlotDef};
pub use spec::{FarFieldSpec, KernelNode, KernelSpec, MetricSpec, KERNEL_SCHEMA_VERSION};
