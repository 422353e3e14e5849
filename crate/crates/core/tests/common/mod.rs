#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sparsegp::kernel::{
    BumpGroupSpec, BumpSpec, DeltaGroupsSpec, FarFieldSpec, KernelNode, KernelSpec, Param,
    ParameterTable, ParametricField, Point, SlotDef, WendlandVariant,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    (0..n)
        .map(|i| Point::indexed((0..dim).map(|_| rng.random::<f64>()).collect(), i))
        .collect()
}

pub fn random_theta(table: &ParameterTable, rng: &mut ChaCha8Rng) -> Vec<f64> {
    table
        .slots()
        .iter()
        .map(|s| s.lower + (s.upper - s.lower) * rng.random::<f64>())
        .collect()
}

fn axis_linear(intercept: &str, slope: &str, dim: usize) -> ParametricField {
    ParametricField::AxisLinear {
        intercept: Param::slot(intercept),
        slopes: (0..dim)
            .map(|k| Param::slot(format!("{slope}{k}")))
            .collect(),
    }
}

fn field_slots(intercept: (&str, f64, f64), slope: &str, dim: usize) -> Vec<SlotDef> {
    let mut v = vec![SlotDef::new(intercept.0, intercept.1, intercept.2)];
    v.extend((0..dim).map(|k| SlotDef::new(format!("{slope}{k}"), -1.0, 1.0)));
    v
}

fn nonstat_node(dim: usize) -> (KernelNode, Vec<SlotDef>) {
    let node = KernelNode::NonstatWendland {
        signal: axis_linear("log_sigma", "sigma_slope", dim),
        length_scale: vec![axis_linear("log_ell", "ell_slope", dim)],
        r0: Param::slot("r0"),
        variant: WendlandVariant::Printed,
    };
    let mut slots = field_slots(("log_sigma", -1.0, 1.0), "sigma_slope", dim);
    slots.extend(field_slots(
        ("log_ell", 0.05f64.ln(), 0.5f64.ln()),
        "ell_slope",
        dim,
    ));
    slots.push(SlotDef::new("r0", 0.5, 2.0));
    (node, slots)
}

fn bump_groups(dim: usize, groups: usize, per_group: usize) -> (Vec<BumpGroupSpec>, Vec<SlotDef>) {
    let mut slots = vec![
        SlotDef::new("bump_shape", 0.5, 2.0),
        SlotDef::new("bump_radius", 0.2, 0.6),
    ];
    let mut specs = Vec::new();
    for u in 0..groups {
        slots.push(SlotDef::new(format!("amp{u}"), 0.0, 1.0));
        let bumps = (0..per_group)
            .map(|p| {
                let t = (u * per_group + p) as f64 / (groups * per_group) as f64;
                BumpSpec {
                    center: (0..dim)
                        .map(|k| ((t + 0.37 * k as f64) % 1.0) + 0.05)
                        .collect(),
                    amplitude: Param::slot(format!("amp{u}")),
                    shape: Param::slot("bump_shape"),
                    radius: Param::slot("bump_radius"),
                }
            })
            .collect();
        specs.push(BumpGroupSpec { bumps });
    }
    (specs, slots)
}

/// One kernel per family: stationary Wendland, non-stationary Wendland,
/// core plus bump far-field, core plus delta far-field, and the split
/// local/far-field kernel.
pub fn families(dim: usize) -> Vec<(&'static str, KernelSpec)> {
    let wendland = KernelSpec::new(
        KernelNode::scale(
            Param::exp_slot("log_amp"),
            KernelNode::wendland(Param::slot("r0")),
        ),
        vec![
            SlotDef::new("log_amp", -2.0, 2.0),
            SlotDef::new("r0", 0.05, 1.0),
        ],
    );

    let (ns, ns_slots) = nonstat_node(dim);
    let nonstat = KernelSpec::new(ns.clone(), ns_slots.clone());

    let (groups, bump_slots) = bump_groups(dim, 2, 3);
    let mut slots = ns_slots.clone();
    slots.extend(bump_slots.clone());
    let bumps = KernelSpec::new(
        KernelNode::sum(vec![
            ns.clone(),
            KernelNode::BumpFarfield {
                groups: groups.clone(),
            },
        ]),
        slots,
    );

    let mut slots = ns_slots.clone();
    slots.push(SlotDef::new("delta_weight", 0.01, 1.0));
    slots.push(SlotDef::new("delta_radius", 0.02, 0.3));
    let deltas = KernelSpec::new(
        KernelNode::sum(vec![
            ns,
            KernelNode::scale(
                Param::slot("delta_weight"),
                KernelNode::DeltaFarfield {
                    groups: DeltaGroupsSpec::Radius {
                        radius: Param::slot("delta_radius"),
                    },
                },
            ),
        ]),
        slots,
    );

    let mut slots = field_slots(("log_sigma", -1.0, 1.0), "sigma_slope", dim);
    slots.extend(field_slots(
        ("log_ell", 0.05f64.ln(), 0.5f64.ln()),
        "ell_slope",
        dim,
    ));
    slots.extend(field_slots(
        ("log_far", 0.1f64.ln(), 1f64.ln()),
        "far_slope",
        dim,
    ));
    slots.push(SlotDef::new("r0", 0.5, 2.0));
    slots.extend(bump_slots);
    let split = KernelSpec::new(
        KernelNode::SplitFarfield {
            signal: axis_linear("log_sigma", "sigma_slope", dim),
            local_length: vec![axis_linear("log_ell", "ell_slope", dim)],
            far_length: vec![axis_linear("log_far", "far_slope", dim)],
            r0: Param::slot("r0"),
            far: FarFieldSpec::Bumps { groups },
            variant: WendlandVariant::Printed,
        },
        slots,
    );

    vec![
        ("wendland", wendland),
        ("nonstat_wendland", nonstat),
        ("bump_farfield", bumps),
        ("delta_farfield", deltas),
        ("split_farfield", split),
    ]
}

/// Non-stationary Wendland spec with a constant noise-variance slot, for
/// GP-level tests.
pub fn nonstat_gp_spec(dim: usize) -> KernelSpec {
    let (node, mut slots) = nonstat_node(dim);
    slots.push(SlotDef::new("log_noise", 0.01f64.ln(), 0.1f64.ln()));
    KernelSpec::new(node, slots)
}

/// Gram matrix of `spec` on `points`, with `points` also serving as the
/// training set for data-derived delta groups.
pub fn gram(spec: &KernelSpec, theta: &[f64], points: &[Point]) -> nalgebra::DMatrix<f64> {
    let k =
        sparsegp::kernel::BoundKernel::bind(spec, theta, points[0].dim(), Some(points)).unwrap();
    let p = k.prepare(points).unwrap();
    k.gram(&p, &p).unwrap()
}

pub fn min_eig(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

pub fn max_diag(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.diagonal()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}
