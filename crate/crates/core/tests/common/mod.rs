#![allow(dead_code)]

use hopcap::FadingModel;
use rand::Rng;

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Discrete model with 1..=max_states distinct gains in [1e-2, 1e2].
pub fn random_discrete<R: Rng>(rng: &mut R, max_states: usize) -> FadingModel {
    let n = rng.random_range(1..=max_states);
    let mut gains: Vec<f64> = Vec::with_capacity(n);
    while gains.len() < n {
        let g = log_uniform(rng, 1e-2, 1e2);
        if gains.iter().all(|&x| (x / g - 1.0).abs() > 1e-3) {
            gains.push(g);
        }
    }
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let states: Vec<(f64, f64)> = gains
        .into_iter()
        .zip(weights.iter().map(|w| w / total))
        .collect();
    let c = log_uniform(rng, 0.3, 3.0);
    FadingModel::discrete(&states, c).expect("valid random discrete model")
}

pub fn random_exponential<R: Rng>(rng: &mut R) -> FadingModel {
    FadingModel::exponential(log_uniform(rng, 0.2, 5.0), log_uniform(rng, 0.3, 3.0)).unwrap()
}

/// Gamma-shaped (`h^k e^{-h/theta}`) or uniform tabulated density.
pub fn random_tabulated<R: Rng>(rng: &mut R) -> FadingModel {
    let c = log_uniform(rng, 0.3, 3.0);
    if rng.random_bool(0.7) {
        let k: i32 = rng.random_range(0..3);
        let theta = rng.random_range(0.5..2.0);
        let top = 30.0 * theta;
        let samples: Vec<(f64, f64)> = (0..3001)
            .map(|i| {
                let h = top * i as f64 / 3000.0;
                (h, h.powi(k) * (-h / theta).exp())
            })
            .collect();
        FadingModel::tabulated_normalized(&samples, c).unwrap()
    } else {
        let a = rng.random_range(0.05..1.0);
        let b = a + rng.random_range(0.2..3.0);
        FadingModel::tabulated_normalized(&[(a, 1.0), (b, 1.0)], c).unwrap()
    }
}

pub fn random_model<R: Rng>(rng: &mut R, i: usize) -> FadingModel {
    match i % 3 {
        0 => random_discrete(rng, 6),
        1 => random_exponential(rng),
        _ => random_tabulated(rng),
    }
}

pub fn bimodal(a1: f64) -> FadingModel {
    FadingModel::discrete(&[(100.0, a1), (0.5, 1.0 - a1)], 1.0).unwrap()
}
