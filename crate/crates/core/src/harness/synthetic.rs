use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gp::Dataset;

/// `sin(5x) + cos(20x) + 2(x - 0.4)^2 cos(400x)`
pub fn synth_f1(x: f64) -> f64 {
    (5.0 * x).sin() + (20.0 * x).cos() + 2.0 * (x - 0.4).powi(2) * (400.0 * x).cos()
}

/// Noisy samples of `synth_f1` at uniform inputs plus a noise-free grid.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub data: Dataset,
    pub grid_x: Vec<f64>,
    pub grid_truth: Vec<f64>,
}

/// `n` uniform inputs on `[0, 1]` with Gaussian noise of std `noise_std`;
/// fully determined by `seed`.
pub fn make_synthetic_dataset(
    n: usize,
    noise_std: f64,
    seed: u64,
    grid_size: usize,
) -> Result<SyntheticData> {
    if n == 0 {
        return Err(Error::input("n must be >= 1"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::input("noise std must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::input(e.to_string()))?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.random();
        let eps = noise.sample(&mut rng);
        x.push(xi);
        y.push(synth_f1(xi) + eps);
    }
    let grid_x: Vec<f64> = match grid_size {
        0 => Vec::new(),
        1 => vec![0.5],
        g => (0..g).map(|i| i as f64 / (g - 1) as f64).collect(),
    };
    let grid_truth = grid_x.iter().map(|&v| synth_f1(v)).collect();
    Ok(SyntheticData {
        data: Dataset::from_1d(&x, y)?,
        grid_x,
        grid_truth,
    })
}
