//! Helpers shared by the integration targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rank1_phase::potential::{mutual_information, stationary_points, thresholds};
use rank1_phase::{Model, Prior, Thresholds};

pub fn random_prior(rng: &mut ChaCha20Rng) -> Prior {
    match rng.random_range(0..4) {
        0 => Prior::bernoulli(rng.random_range(0.01..0.5)).unwrap(),
        1 => Prior::community(rng.random_range(0.03..0.5)).unwrap(),
        2 => {
            let a = rng.random_range(0.2..2.0);
            let b = -rng.random_range(0.0..2.0);
            Prior::new(vec![a, b], vec![rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)]).unwrap()
        }
        _ => Prior::new(
            vec![-1.0, 0.0, rng.random_range(0.5..2.0)],
            vec![rng.random_range(0.1..1.0), rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)],
        )
        .unwrap(),
    }
}

/// `(model, Δ)` pairs spread around each prior's own transition.
pub fn random_cases(count: usize, seed: u64) -> Vec<(Model, f64, Thresholds)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let model = Model::new(random_prior(&mut rng));
        let Ok(th) = thresholds(&model) else { continue };
        let v = model.v();
        let scale = if th.delta_rs.is_finite() { th.delta_rs } else { v * v };
        let delta = scale * 10f64.powf(rng.random_range(-0.6..0.6));
        if stationary_points(&model, delta).is_err() {
            continue;
        }
        out.push((model, delta, th));
    }
    out
}


/// Derivative of `min i_RS` in `t = 1/Δ` by a fourth-order stencil.
pub fn mi_slope(model: &Model, delta: f64) -> f64 {
    let t = delta.recip();
    let h = 1e-3 * t;
    let f = |t: f64| mutual_information(model, t.recip()).unwrap().value;
    (8.0 * (f(t + h) - f(t - h)) - (f(t + 2.0 * h) - f(t - 2.0 * h))) / (12.0 * h)
}

