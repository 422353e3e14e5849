mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use sparsegp::gp::{
    dense_log_marginal_likelihood, dense_reference_fit_predict, read_predictions,
    write_predictions, Checkpoint, Dataset, GpModel, MeanFunction, NoiseModel, VarianceKind,
};
use sparsegp::kernel::{KernelNode, KernelSpec, Param, Point, SlotDef};
use sparsegp::Error;

use common::{families, nonstat_gp_spec, random_theta, rng};

fn constant_noise(v: f64) -> NoiseModel {
    NoiseModel::Constant {
        variance: Param::Fixed(v),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Wendland with support far below the point spacing, so K = I.
fn identity_model(noise: f64) -> GpModel {
    GpModel::new(
        KernelSpec::new(KernelNode::wendland(1e-3), vec![]),
        constant_noise(noise),
    )
}

#[test]
fn lml_unit_scalar_case() {
    let m = identity_model(0.0);
    let data = Dataset::from_1d(&[0.0], vec![0.0]).unwrap();
    let got = m.log_marginal_likelihood(&[], &data).unwrap().lml;
    assert!((got - (-0.5 * (2.0 * PI).ln())).abs() < 1e-12);
    assert!((got + 0.918_938_5).abs() < 1e-7);
}

#[test]
fn lml_identity_covariance() {
    let m = identity_model(0.0);
    let data = Dataset::from_1d(&[0.0, 1.0], vec![1.0, 0.0]).unwrap();
    let got = m.log_marginal_likelihood(&[], &data).unwrap().lml;
    assert!((got - (-0.5 - (2.0 * PI).ln())).abs() < 1e-12);
    assert!((got + 2.337_877_1).abs() < 1e-7);
}

#[test]
fn fit_solution_examples() {
    let data = Arc::new(Dataset::from_1d(&[0.0, 1.0, 2.0], vec![0.3, -1.0, 2.5]).unwrap());
    let fit = identity_model(0.0).fit(&[], data.clone()).unwrap();
    assert_eq!(fit.solution(), data.y());

    let data = Arc::new(Dataset::from_1d(&[0.0, 1.0, 2.0], vec![2.0; 3]).unwrap());
    let fit = identity_model(1.0).fit(&[], data).unwrap();
    for a in fit.solution() {
        assert!((a - 1.0).abs() < 1e-15);
    }
}

fn random_instance(n: usize, seed: u64) -> (GpModel, Vec<f64>, Arc<Dataset>) {
    let mut r = rng(seed);
    let spec = nonstat_gp_spec(1);
    let table = spec.validate().unwrap();
    let theta = random_theta(&table, &mut r);
    let x: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let y = x
        .iter()
        .map(|x| (6.0 * x).sin() + 0.1 * r.random::<f64>())
        .collect();
    let model = GpModel::new(
        spec,
        NoiseModel::Constant {
            variance: Param::exp_slot("log_noise"),
        },
    );
    (model, theta, Arc::new(Dataset::from_1d(&x, y).unwrap()))
}

#[test]
fn fit_residual_is_tiny() {
    let (model, theta, data) = random_instance(400, 31);
    let fit = model.fit(&theta, data.clone()).unwrap();
    let ax = fit.matrix().spmv(fit.solution()).unwrap();
    let ymax = data.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, y) in ax.iter().zip(data.y()) {
        assert!((a - y).abs() <= 1e-8 * ymax);
    }
}

#[test]
fn sparse_and_dense_agree_at_n300() {
    let (model, theta, data) = random_instance(300, 32);
    let sparse = model.log_marginal_likelihood(&theta, &data).unwrap().lml;
    let dense = dense_log_marginal_likelihood(&model, &theta, &data).unwrap();
    assert!(rel(sparse, dense) <= 1e-6, "{sparse} vs {dense}");

    let x_star: Vec<Point> = (0..50).map(|i| Point::new(vec![i as f64 / 49.0])).collect();
    for kind in [VarianceKind::F, VarianceKind::Y] {
        let post = model
            .fit(&theta, data.clone())
            .unwrap()
            .predict(&x_star, kind)
            .unwrap();
        let (_, oracle) =
            dense_reference_fit_predict(&model, &theta, &data, &x_star, kind).unwrap();
        for s in 0..x_star.len() {
            assert!((post.mean[s] - oracle.mean[s]).abs() <= 1e-6 * oracle.mean[s].abs().max(1e-3));
            assert!(
                (post.variance[s] - oracle.variance[s]).abs()
                    <= 1e-6 * oracle.variance[s].max(1e-6)
            );
        }
    }
}

#[test]
fn sparse_and_dense_agree_across_families() {
    let mut r = rng(33);
    for (name, spec) in families(1) {
        let table = spec.validate().unwrap();
        let theta = random_theta(&table, &mut r);
        let x: Vec<f64> = (0..150).map(|_| r.random::<f64>()).collect();
        let y = x.iter().map(|x| x.cos()).collect();
        let data = Arc::new(Dataset::from_1d(&x, y).unwrap());
        let model = GpModel::new(spec, constant_noise(0.05));
        let s = model.log_marginal_likelihood(&theta, &data).unwrap().lml;
        let d = dense_log_marginal_likelihood(&model, &theta, &data).unwrap();
        assert!(rel(s, d) <= 1e-6, "{name}: {s} vs {d}");
    }
}

#[test]
fn lml_invariant_to_data_order() {
    let (model, theta, data) = random_instance(250, 34);
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.reverse();
    idx.swap(3, 100);
    let permuted = data.subset(&idx).unwrap();
    let a = model.log_marginal_likelihood(&theta, &data).unwrap().lml;
    let b = model
        .log_marginal_likelihood(&theta, &permuted)
        .unwrap()
        .lml;
    assert!(rel(a, b) <= 1e-9, "{a} vs {b}");
}

#[test]
fn prior_recovered_far_from_data() {
    let spec = KernelSpec::new(
        KernelNode::scale(Param::Fixed(2.5), KernelNode::wendland(0.1)),
        vec![],
    );
    let model = GpModel::new(spec, constant_noise(0.01)).with_mean(MeanFunction::Constant {
        value: Param::Fixed(0.7),
    });
    let data = Arc::new(Dataset::from_1d(&[0.0, 0.05, 0.2], vec![1.0, 2.0, 3.0]).unwrap());
    let post = model
        .fit(&[], data)
        .unwrap()
        .predict(&[Point::new(vec![5.0])], VarianceKind::F)
        .unwrap();
    assert_eq!(post.mean[0], 0.7);
    assert_eq!(post.variance[0], 2.5);
}

#[test]
fn noiseless_interpolation() {
    let spec = KernelSpec::new(
        KernelNode::scale(Param::Fixed(1.7), KernelNode::wendland(0.3)),
        vec![],
    );
    let x = [0.0, 0.1, 0.25, 0.4, 0.7];
    let y = vec![0.5, -0.2, 1.0, 0.3, -1.1];
    let data = Arc::new(Dataset::from_1d(&x, y.clone()).unwrap());
    let fit = GpModel::new(spec, constant_noise(0.0))
        .fit(&[], data)
        .unwrap();
    assert_eq!(fit.factor().jitter(), 0.0);
    let pts: Vec<Point> = x.iter().map(|&v| Point::new(vec![v])).collect();
    let post = fit.predict(&pts, VarianceKind::F).unwrap();
    for i in 0..x.len() {
        assert!((post.mean[i] - y[i]).abs() <= 1e-8, "{i}");
        assert!(post.variance[i] <= 1e-8 * 1.7, "{i}: {}", post.variance[i]);
    }
}

#[test]
fn removing_data_never_lowers_variance() {
    let spec = KernelSpec::new(KernelNode::wendland(0.4), vec![]);
    let model = GpModel::new(spec, constant_noise(0.0));
    let mut r = rng(35);
    let x: Vec<f64> = (0..12)
        .map(|i| i as f64 / 11.0 + 0.01 * r.random::<f64>())
        .collect();
    let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
    let full = Arc::new(Dataset::from_1d(&x, y).unwrap());
    let x_star: Vec<Point> = (0..30).map(|i| Point::new(vec![i as f64 / 29.0])).collect();
    let base = model
        .fit(&[], full.clone())
        .unwrap()
        .predict(&x_star, VarianceKind::F)
        .unwrap();
    for drop in 0..x.len() {
        let keep: Vec<usize> = (0..x.len()).filter(|&i| i != drop).collect();
        let sub = Arc::new(full.subset(&keep).unwrap());
        let post = model
            .fit(&[], sub)
            .unwrap()
            .predict(&x_star, VarianceKind::F)
            .unwrap();
        for s in 0..x_star.len() {
            assert!(
                post.variance[s] >= base.variance[s] - 1e-8,
                "drop {drop} at {s}"
            );
        }
    }
}

#[test]
fn y_variance_adds_noise() {
    let (model, theta, data) = random_instance(100, 36);
    let fit = model.fit(&theta, data).unwrap();
    let pts = [Point::new(vec![0.5])];
    let f = fit.predict(&pts, VarianceKind::F).unwrap();
    let y = fit.predict(&pts, VarianceKind::Y).unwrap();
    let noise = theta[model.table().unwrap().index_of("log_noise").unwrap()].exp();
    assert!((y.variance[0] - f.variance[0] - noise).abs() <= 1e-15 * y.variance[0].max(1.0));
}

#[test]
fn plugin_mean_is_used() {
    let spec = KernelSpec::new(
        KernelNode::wendland(1e-3),
        vec![SlotDef::new("slope", -5.0, 5.0)],
    );
    let model = GpModel::new(spec, constant_noise(1.0))
        .with_mean(MeanFunction::plugin("linear", |x, p| {
            Ok(p.get("slope")? * x[0])
        }));
    let data = Arc::new(Dataset::from_1d(&[1.0, 2.0], vec![2.0, 4.0]).unwrap());
    let at = model.log_marginal_likelihood(&[2.0], &data).unwrap();
    assert!(at.quad.abs() < 1e-15);
    let fit = model.fit(&[2.0], data).unwrap();
    assert!(Checkpoint::from_trained(&fit, None).is_err());
}

#[test]
fn out_of_bounds_theta_is_rejected() {
    let (model, mut theta, data) = random_instance(20, 37);
    theta[0] = 1e6;
    assert!(matches!(
        model.log_marginal_likelihood(&theta, &data),
        Err(Error::Hyperparameter(_))
    ));
}

#[test]
fn checkpoint_round_trip_reproduces_predictions() {
    let (model, theta, data) = random_instance(200, 38);
    let fit = model.fit(&theta, data.clone()).unwrap();
    let ck = Checkpoint::from_trained(&fit, Some("train.csv".into())).unwrap();
    let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
    assert_eq!(back.theta_vec().unwrap(), theta);
    let restored = back.restore(data).unwrap();
    let pts: Vec<Point> = (0..10).map(|i| Point::new(vec![i as f64 / 9.0])).collect();
    let a = fit.predict(&pts, VarianceKind::Y).unwrap();
    let b = restored.predict(&pts, VarianceKind::Y).unwrap();
    assert_eq!(a, b);

    let other = Arc::new(Dataset::from_1d(&[0.1, 0.2], vec![1.0, 2.0]).unwrap());
    assert!(matches!(
        back.restore(other),
        Err(Error::StaleCheckpoint(_))
    ));
    assert!(matches!(
        Checkpoint::from_json("{\"engine_version\": 1}"),
        Err(Error::Schema(_))
    ));
}

#[test]
fn predictions_csv_round_trip() {
    let (model, theta, data) = random_instance(50, 39);
    let post = model
        .fit(&theta, data)
        .unwrap()
        .predict(
            &[Point::new(vec![0.2]), Point::new(vec![0.9])],
            VarianceKind::F,
        )
        .unwrap();
    let mut buf = Vec::new();
    write_predictions(&post, &mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("index,mean,variance,variance_kind\n"));
    let rows = read_predictions(&buf[..]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].mean, post.mean[1]);
    assert_eq!(rows[1].variance, post.variance[1]);
    assert_eq!(rows[0].variance_kind, "f");
}

#[test]
fn empty_dataset_is_rejected() {
    assert!(Dataset::from_1d(&[], vec![]).is_err());
    assert!(Dataset::from_1d(&[0.0], vec![f64::NAN]).is_err());
}
