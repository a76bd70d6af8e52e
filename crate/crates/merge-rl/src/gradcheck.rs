//! Central finite-difference oracles for the analytic gradients. Used by
//! the `gradcheck` CLI subcommand and by the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ACCEL_MAX, ACCEL_MIN};
use crate::nn::{Activation, LayerSpec, NetParams};
use crate::qfunc::{QTargetPair, STATE_DIM};
use crate::replay::Transition;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Max relative error between analytic and central-difference gradients of
/// a sum-of-squares head loss for one random network and input.
pub fn net_fd_error(specs: &[LayerSpec], seed: u64) -> f64 {
    let net = NetParams::init(specs, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00ff_00ff);
    let x: Vec<f64> = (0..specs[0].input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let loss = |p: &NetParams| -> f64 {
        let (y, _) = p.forward(&x).unwrap();
        y.iter().map(|v| v * v).sum()
    };
    let (y, cache) = net.forward(&x).unwrap();
    let dl_dy: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
    let (grads, _) = net.backward(&cache, &dl_dy).unwrap();
    let analytic = grads.flatten();

    let flat = net.flatten();
    let mut max_rel = 0.0f64;
    for i in 0..flat.len() {
        let mut work = net.clone();
        let mut theta = flat.clone();
        theta[i] += FD_STEP;
        work.unflatten_into(&theta);
        let plus = loss(&work);
        theta[i] -= 2.0 * FD_STEP;
        work.unflatten_into(&theta);
        let minus = loss(&work);
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
    }
    max_rel
}

pub fn random_state(rng: &mut ChaCha8Rng) -> [f64; STATE_DIM] {
    std::array::from_fn(|_| rng.gen_range(-1.2..1.2))
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            state: random_state(rng),
            action: rng.gen_range(ACCEL_MIN..ACCEL_MAX),
            reward: -rng.gen_range(0.0..3.0),
            next_state: random_state(rng),
            terminal: rng.gen_bool(0.1),
        })
        .collect()
}

/// Max relative error of the composite TD-loss gradients through the
/// quadratic form and all three heads.
pub fn composite_fd_error(pair: &QTargetPair, batch: &[Transition], gamma: f64) -> f64 {
    let (_, grads) = pair.loss_and_grads(batch, gamma).unwrap();
    let analytic: Vec<f64> = grads
        .head_a
        .flatten()
        .into_iter()
        .chain(grads.head_b.flatten())
        .chain(grads.head_c.flatten())
        .collect();
    let flat: Vec<f64> = pair
        .prediction
        .head_a
        .flatten()
        .into_iter()
        .chain(pair.prediction.head_b.flatten())
        .chain(pair.prediction.head_c.flatten())
        .collect();
    let na = pair.prediction.head_a.param_count();
    let nb = pair.prediction.head_b.param_count();
    let eval = |theta: &[f64]| -> f64 {
        let mut p = pair.clone();
        p.prediction.head_a.unflatten_into(&theta[..na]);
        p.prediction.head_b.unflatten_into(&theta[na..na + nb]);
        p.prediction.head_c.unflatten_into(&theta[na + nb..]);
        p.loss_and_grads(batch, gamma).unwrap().0
    };
    let mut max_rel = 0.0f64;
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += FD_STEP;
        let mut minus = flat.clone();
        minus[i] -= FD_STEP;
        let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
    }
    max_rel
}

/// Run every finite-difference suite; returns (name, max relative error).
pub fn run_all(seed: u64, composite_batches: usize, hidden: usize) -> Vec<(String, f64)> {
    let mut results = Vec::new();
    for (name, hidden_act) in [
        ("layer tanh", Activation::Tanh),
        ("layer relu", Activation::Relu),
        ("layer sigmoid", Activation::Sigmoid),
        ("layer softplus", Activation::Softplus),
    ] {
        let specs = [
            LayerSpec { input_dim: STATE_DIM, output_dim: 16, activation: hidden_act },
            LayerSpec { input_dim: 16, output_dim: 1, activation: Activation::Identity },
        ];
        let err = (0..8).map(|i| net_fd_error(&specs, seed + i)).fold(0.0, f64::max);
        results.push((name.to_string(), err));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..composite_batches {
        let pair = QTargetPair::init(hidden, &mut rng).unwrap();
        let batch = random_batch(&mut rng, 4);
        worst = worst.max(composite_fd_error(&pair, &batch, 0.95));
    }
    results.push(("composite td loss".to_string(), worst));
    results
}
