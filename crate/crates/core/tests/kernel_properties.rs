mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use sparsegp::kernel::{
    eval_kernel, BumpGroupSpec, BumpSpec, KernelNode, KernelSpec, Param, ParametricField, Point,
    SlotDef, WendlandVariant,
};

use common::{families, gram, max_diag, min_eig, random_points, random_theta, rng};

/// Wendland polynomial written out directly.
fn wendland_oracle(d: f64, r0: f64) -> f64 {
    let r = d / r0;
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - r).powi(8) * (35.0 * r.powi(3) + 25.0 * r.powi(2) + 8.0 * r + 1.0)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn symmetry_is_exact_for_every_family() {
    let mut r = rng(1);
    for dim in [1, 2] {
        for (name, spec) in families(dim) {
            let table = spec.validate().unwrap();
            for _ in 0..5 {
                let theta = random_theta(&table, &mut r);
                let pts = random_points(30, dim, &mut r);
                let g = gram(&spec, &theta, &pts);
                for i in 0..pts.len() {
                    for j in 0..pts.len() {
                        assert_eq!(g[(i, j)], g[(j, i)], "{name} dim {dim} ({i},{j})");
                    }
                }
            }
        }
    }
}

#[test]
fn empirical_psd_for_every_family() {
    let mut r = rng(2);
    for (name, spec) in families(1) {
        let table = spec.validate().unwrap();
        for _ in 0..40 {
            let theta = random_theta(&table, &mut r);
            let pts = random_points(50, 1, &mut r);
            let g = gram(&spec, &theta, &pts);
            let tol = 1e-8 * max_diag(&g);
            assert!(
                min_eig(&g) >= -tol,
                "{name}: eigmin {} < -{tol}",
                min_eig(&g)
            );
        }
    }
}

#[test]
fn constant_field_reduction() {
    let mut r = rng(3);
    for dim in [1, 2, 3] {
        for _ in 0..1000 / 3 + 1 {
            let c: f64 = 0.2 + 2.0 * rand::Rng::random::<f64>(&mut r);
            let ell: f64 = 0.05 + 0.5 * rand::Rng::random::<f64>(&mut r);
            let r0: f64 = 0.5 + 1.5 * rand::Rng::random::<f64>(&mut r);
            let spec = KernelSpec::new(
                KernelNode::NonstatWendland {
                    signal: ParametricField::constant(Param::Fixed(c.ln())),
                    length_scale: vec![ParametricField::constant(Param::Fixed(ell.ln()))],
                    r0: Param::Fixed(r0),
                    variant: WendlandVariant::Printed,
                },
                vec![],
            );
            let pts = random_points(2, dim, &mut r);
            // Pull the pair close enough that most land inside the support.
            let b: Vec<f64> = pts[0]
                .coords
                .iter()
                .zip(&pts[1].coords)
                .map(|(a, b)| a + 0.3 * (b - a))
                .collect();
            let (xi, xj) = (pts[0].clone(), Point::new(b));
            let got = eval_kernel(&spec, &[], &xi, &xj).unwrap();
            let want = c * c * wendland_oracle(euclid(&xi.coords, &xj.coords) / ell, r0);
            // Relative to the peak value c^2: near the support edge the
            // (1-r)^8 factor amplifies last-bit differences in r.
            assert!((got - want).abs() <= 1e-12 * c * c, "{got} vs {want}");
        }
    }
}

#[test]
fn bump_farfield_rank_bound() {
    let mut r = rng(4);
    for u in 1..=3usize {
        let mut slots = vec![];
        let groups: Vec<BumpGroupSpec> = (0..u)
            .map(|g| {
                slots.push(SlotDef::new(format!("a{g}"), 0.0, 1.0));
                BumpGroupSpec {
                    bumps: (0..3)
                        .map(|p| BumpSpec {
                            center: vec![(g * 3 + p) as f64 / (3 * u) as f64 + 0.1],
                            amplitude: Param::slot(format!("a{g}")),
                            shape: Param::Fixed(1.0),
                            radius: Param::Fixed(0.4),
                        })
                        .collect(),
                }
            })
            .collect();
        let spec = KernelSpec::new(KernelNode::BumpFarfield { groups }, slots);
        let table = spec.validate().unwrap();
        for _ in 0..10 {
            let theta = random_theta(&table, &mut r);
            let g = gram(&spec, &theta, &random_points(40, 1, &mut r));
            let mut sv: Vec<f64> = g.singular_values().iter().cloned().collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for s in &sv[u..] {
                assert!(*s <= 1e-10 * sv[0].max(f64::MIN_POSITIVE), "U={u}: {sv:?}");
            }
        }
    }
}

#[test]
fn spec_json_round_trip_preserves_values() {
    let mut r = rng(5);
    for (name, spec) in families(2) {
        let back = KernelSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec, "{name}");
        let table = spec.validate().unwrap();
        let theta = random_theta(&table, &mut r);
        let pts = random_points(10, 2, &mut r);
        assert_eq!(
            gram(&spec, &theta, &pts),
            gram(&back, &theta, &pts),
            "{name}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compact_support_gives_exact_zero(r0 in 0.01f64..2.0, d in 0.0f64..10.0) {
        let spec = KernelSpec::new(KernelNode::wendland(r0), vec![]);
        let v = eval_kernel(&spec, &[], &Point::new(vec![0.0]), &Point::new(vec![d])).unwrap();
        if d >= r0 {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!(v > 0.0);
            prop_assert!((v - wendland_oracle(d, r0)).abs() <= 1e-14);
        }
    }

    #[test]
    fn scaled_product_of_valid_kernels_is_psd(seed in 0u64..1000, scale in 0.1f64..10.0) {
        let mut r = rng(seed);
        let spec = KernelSpec::new(
            KernelNode::scale(
                scale,
                KernelNode::product(vec![KernelNode::wendland(0.4), KernelNode::matern32(0.2, 1.0)]),
            ),
            vec![],
        );
        let g = gram(&spec, &[], &random_points(40, 2, &mut r));
        prop_assert!(min_eig(&g) >= -1e-8 * max_diag(&g));
    }

    #[test]
    fn diagonal_rescaling_keeps_psd(seed in 0u64..1000) {
        let mut r = rng(seed);
        let spec = KernelSpec::new(KernelNode::wendland(0.3), vec![]);
        let pts = random_points(40, 1, &mut r);
        let k = gram(&spec, &[], &pts);
        let f: Vec<f64> = (0..pts.len()).map(|_| 4.0 * rand::Rng::random::<f64>(&mut r) - 2.0).collect();
        let fm = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(f));
        let fkf = &fm * k * &fm;
        prop_assert!(min_eig(&fkf) >= -1e-8 * max_diag(&fkf).max(f64::MIN_POSITIVE));
    }
}
