#![allow(dead_code)]

use lcnn::nnmodel::{Activation, Dataset, NetworkConfig, WeightMatrix};
use lcnn::rng::{stream_rng, Rng};
use rand::Rng as _;

pub fn tanh_net(k: usize, d: usize, v: f64) -> NetworkConfig {
    NetworkConfig::new(k, d, v, Activation::tanh(1.0, 1.0).unwrap()).unwrap()
}

pub fn relu2_net(k: usize, d: usize, v: f64) -> NetworkConfig {
    NetworkConfig::new(k, d, v, Activation::squared_relu(1.0).unwrap()).unwrap()
}

/// Rows with a leading 1 and the rest uniform on [-1, 1].
pub fn random_inputs(n: usize, d: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut r = vec![1.0];
            r.extend((1..d).map(|_| rng.random_range(-1.0..=1.0)));
            r
        })
        .collect()
}

pub fn random_dataset(n: usize, d: usize, y_scale: f64, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 0);
    let x = random_inputs(n, d, &mut rng);
    let y = (0..n)
        .map(|_| rng.random_range(-y_scale..=y_scale))
        .collect();
    Dataset::new(x, y).unwrap()
}

/// Data generated by a teacher network plus optional Gaussian noise.
pub fn teacher_dataset(
    cfg: &NetworkConfig,
    teacher: &WeightMatrix,
    n: usize,
    noise: f64,
    seed: u64,
) -> Dataset {
    let mut rng = stream_rng(seed, 1);
    let x = random_inputs(n, cfg.d, &mut rng);
    let y = x
        .iter()
        .map(|xi| {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            cfg.forward(teacher, xi) + noise * z
        })
        .collect();
    Dataset::new(x, y).unwrap()
}

pub fn random_ball_weights(k: usize, d: usize, rng: &mut Rng) -> WeightMatrix {
    let rows = (0..k)
        .map(|_| lcnn::priors::sample_l1_ball(d, rng))
        .collect();
    WeightMatrix::from_rows(rows).unwrap()
}

pub fn unit_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..dim)
        .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng))
        .collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    u
}

/// Simpson's rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}
