use serde::{Deserialize, Serialize};

use crate::gp::NoiseModel;
use crate::kernel::{radial_field_1d, KernelNode, KernelSpec, Param, SlotDef, WendlandVariant};
use crate::mcmc::BlockDef;

/// A kernel, its noise model and a block layout for the sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPreset {
    pub kernel: KernelSpec,
    pub noise: NoiseModel,
    pub blocks: Vec<BlockDef>,
}

fn block(name: &str, slots: Vec<String>) -> BlockDef {
    BlockDef {
        name: name.into(),
        slots,
        scale: 0.05,
    }
}

fn noise_slot() -> SlotDef {
    SlotDef::new("log_noise_var", 2.0 * 0.01f64.ln(), 0.0)
}

/// Non-stationary Wendland on `[0, 1]` with log signal std and log length
/// scale each given by an intercept plus `centers` Gaussian bumps, and a
/// homoscedastic noise variance.
pub fn f1_nonstat_preset(centers: usize) -> ModelPreset {
    let weights = |p: &str| (0..centers).map(|m| format!("{p}{m}")).collect::<Vec<_>>();
    let mut slots = vec![SlotDef::new("log_sigma", 0.1f64.ln(), 10f64.ln())];
    slots.extend(
        weights("sigma_w")
            .into_iter()
            .map(|n| SlotDef::new(n, -3.0, 3.0)),
    );
    slots.push(SlotDef::new("log_ell", 0.002f64.ln(), 0.2f64.ln()));
    slots.extend(
        weights("ell_w")
            .into_iter()
            .map(|n| SlotDef::new(n, -3.0, 3.0)),
    );
    slots.push(noise_slot());

    let root = KernelNode::NonstatWendland {
        signal: radial_field_1d(Param::slot("log_sigma"), 0.0, 1.0, centers, "sigma_w"),
        length_scale: vec![radial_field_1d(
            Param::slot("log_ell"),
            0.0,
            1.0,
            centers,
            "ell_w",
        )],
        r0: Param::Fixed(1.0),
        variant: WendlandVariant::Printed,
    };
    let mut signal = vec!["log_sigma".to_string()];
    signal.extend(weights("sigma_w"));
    let mut length = vec!["log_ell".to_string()];
    length.extend(weights("ell_w"));
    ModelPreset {
        kernel: KernelSpec::new(root, slots),
        noise: NoiseModel::Constant {
            variance: Param::exp_slot("log_noise_var"),
        },
        blocks: vec![
            block("signal", signal),
            block("length", length),
            block("noise", vec!["log_noise_var".into()]),
        ],
    }
}

/// Stationary Matérn 3/2 with log length scale, log signal std and log
/// noise variance, sampled as one block.
pub fn matern_base_preset() -> ModelPreset {
    let slots = vec![
        SlotDef::new("log_ell", 0.001f64.ln(), 1f64.ln()),
        SlotDef::new("log_sigma", 0.1f64.ln(), 10f64.ln()),
        noise_slot(),
    ];
    ModelPreset {
        kernel: KernelSpec::new(
            KernelNode::matern32(Param::exp_slot("log_ell"), Param::exp_slot("log_sigma")),
            slots,
        ),
        noise: NoiseModel::Constant {
            variance: Param::exp_slot("log_noise_var"),
        },
        blocks: vec![block(
            "all",
            vec!["log_ell".into(), "log_sigma".into(), "log_noise_var".into()],
        )],
    }
}
