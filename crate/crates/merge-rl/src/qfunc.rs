//! Quadratic Q-function approximator: Q(s, a) = A(s)·(B(s) − a)² + C(s)
//! with three small coefficient networks. A is forced negative so the
//! quadratic is strictly concave in the action and B is squashed into the
//! action bounds, making B(s) the global argmax and C(s) the maximum value.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, ACCEL_MAX, ACCEL_MIN, SENSING_RANGE, SPEED_LIMIT};
use crate::error::{Error, Result};
use crate::nn::{sigmoid, softplus, Activation, Gradients, LayerSpec, NetParams};
use crate::replay::Transition;

pub const STATE_DIM: usize = 6;
pub const DEFAULT_HIDDEN: usize = 64;
/// Keeps A(s) away from zero so the quadratic never degenerates.
const A_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNet {
    pub head_a: NetParams,
    pub head_b: NetParams,
    pub head_c: NetParams,
}

pub struct QGrads {
    pub head_a: Gradients,
    pub head_b: Gradients,
    pub head_c: Gradients,
}

fn head_specs(hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec { input_dim: STATE_DIM, output_dim: hidden, activation: Activation::Tanh },
        LayerSpec { input_dim: hidden, output_dim: 1, activation: Activation::Identity },
    ]
}

/// Map raw observations to the normalized 6-vector fed to the networks:
/// speeds scaled by the speed limit, the ego position relative to the merge
/// point, neighbor positions relative to the ego.
pub fn normalize(obs: &Observation, merge_point_x: f64) -> [f64; 6] {
    [
        obs.v_ev / SPEED_LIMIT,
        (obs.p_ev - merge_point_x) / SENSING_RANGE,
        obs.v_gfv / SPEED_LIMIT,
        (obs.p_gfv - obs.p_ev) / SENSING_RANGE,
        obs.v_gbv / SPEED_LIMIT,
        (obs.p_gbv - obs.p_ev) / SENSING_RANGE,
    ]
}

impl QNet {
    pub fn init(hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let specs = head_specs(hidden);
        Ok(QNet {
            head_a: NetParams::init(&specs, rng)?,
            head_b: NetParams::init(&specs, rng)?,
            head_c: NetParams::init(&specs, rng)?,
        })
    }

    fn raw(&self, head: &NetParams, s: &[f64; 6]) -> f64 {
        let (y, _) = head.forward(s).expect("state dim fixed at 6");
        y[0]
    }

    /// Coefficients (A, B, C) with A < 0 and B inside the action bounds.
    pub fn coeffs(&self, s: &[f64; 6]) -> (f64, f64, f64) {
        let a = -softplus(self.raw(&self.head_a, s)) - A_FLOOR;
        let b = ACCEL_MIN + (ACCEL_MAX - ACCEL_MIN) * sigmoid(self.raw(&self.head_b, s));
        let c = self.raw(&self.head_c, s);
        (a, b, c)
    }

    pub fn q_value(&self, s: &[f64; 6], action: f64) -> f64 {
        let (a, b, c) = self.coeffs(s);
        a * (b - action) * (b - action) + c
    }

    /// The vertex of the concave quadratic: a* = B(s).
    pub fn optimal_action(&self, s: &[f64; 6]) -> f64 {
        self.coeffs(s).1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTargetPair {
    pub prediction: QNet,
    pub target: QNet,
}

impl QTargetPair {
    pub fn init(hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let prediction = QNet::init(hidden, rng)?;
        let target = prediction.clone();
        Ok(QTargetPair { prediction, target })
    }

    /// Hard copy: target <- prediction.
    pub fn sync_target(&mut self) {
        self.target = self.prediction.clone();
    }

    /// TD target r + γ·max_a' Q(s', a', θ⁻); the maximum over actions of
    /// the quadratic is exactly C_target(s').
    pub fn td_target(&self, reward: f64, next_state: &[f64; 6], terminal: bool, gamma: f64) -> f64 {
        if terminal {
            reward
        } else {
            reward + gamma * self.target.coeffs(next_state).2
        }
    }

    /// Mean squared TD error over the batch and its exact gradients with
    /// respect to the prediction networks. Targets are constants.
    pub fn loss_and_grads(&self, batch: &[Transition], gamma: f64) -> Result<(f64, QGrads)> {
        if batch.is_empty() {
            return Err(Error::Usage("empty mini-batch".into()));
        }
        let pred = &self.prediction;
        let mut grads = QGrads {
            head_a: Gradients::zeros_like(&pred.head_a),
            head_b: Gradients::zeros_like(&pred.head_b),
            head_c: Gradients::zeros_like(&pred.head_c),
        };
        let m = batch.len() as f64;
        let mut loss = 0.0;
        for tr in batch {
            let q_t = self.td_target(tr.reward, &tr.next_state, tr.terminal, gamma);
            let (raw_a_out, cache_a) = pred.head_a.forward(&tr.state)?;
            let (raw_b_out, cache_b) = pred.head_b.forward(&tr.state)?;
            let (raw_c_out, cache_c) = pred.head_c.forward(&tr.state)?;
            let (raw_a, raw_b, raw_c) = (raw_a_out[0], raw_b_out[0], raw_c_out[0]);
            let a = -softplus(raw_a) - A_FLOOR;
            let sig_b = sigmoid(raw_b);
            let b = ACCEL_MIN + (ACCEL_MAX - ACCEL_MIN) * sig_b;
            let q_p = a * (b - tr.action) * (b - tr.action) + raw_c;
            let diff = q_p - q_t;
            loss += diff * diff / m;
            let dl_dqp = 2.0 * diff / m;

            // Chain rule through the quadratic and each head's squashing.
            let dqp_draw_a = (b - tr.action) * (b - tr.action) * -sigmoid(raw_a);
            let dqp_draw_b =
                2.0 * a * (b - tr.action) * (ACCEL_MAX - ACCEL_MIN) * sig_b * (1.0 - sig_b);
            let (ga, _) = pred.head_a.backward(&cache_a, &[dl_dqp * dqp_draw_a])?;
            let (gb, _) = pred.head_b.backward(&cache_b, &[dl_dqp * dqp_draw_b])?;
            let (gc, _) = pred.head_c.backward(&cache_c, &[dl_dqp])?;
            grads.head_a.add_scaled(&ga, 1.0);
            grads.head_b.add_scaled(&gb, 1.0);
            grads.head_c.add_scaled(&gc, 1.0);
        }
        Ok((loss, grads))
    }

    pub fn apply_update(&mut self, grads: &QGrads, alpha: f64) -> Result<()> {
        self.prediction.head_a.sgd_step(&grads.head_a, alpha)?;
        self.prediction.head_b.sgd_step(&grads.head_b, alpha)?;
        self.prediction.head_c.sgd_step(&grads.head_c, alpha)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_state(rng: &mut ChaCha8Rng) -> [f64; 6] {
        std::array::from_fn(|_| rng.gen_range(-1.2..1.2))
    }

    #[test]
    fn normalize_reference_point() {
        let obs = Observation {
            v_ev: SPEED_LIMIT,
            p_ev: 0.0,
            v_gfv: SPEED_LIMIT,
            p_gfv: 150.0,
            v_gbv: SPEED_LIMIT,
            p_gbv: -150.0,
        };
        assert_eq!(normalize(&obs, 0.0), [1.0, 0.0, 1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn normalize_zero_speeds_map_to_zero() {
        let obs = Observation { v_ev: 0.0, p_ev: 0.0, v_gfv: 0.0, p_gfv: 0.0, v_gbv: 0.0, p_gbv: 0.0 };
        assert_eq!(normalize(&obs, 0.0), [0.0; 6]);
    }

    #[test]
    fn coeff_transforms_at_raw_zero() {
        // zero all parameters so every raw head output is 0
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = QNet::init(8, &mut rng).unwrap();
        for head in [&mut net.head_a, &mut net.head_b, &mut net.head_c] {
            for l in &mut head.layers {
                l.weights.iter_mut().for_each(|w| *w = 0.0);
            }
        }
        let (a, b, c) = net.coeffs(&[0.3; 6]);
        assert!((a - (-(2.0f64.ln()) - 0.01)).abs() < 1e-12);
        assert!((b - -1.0).abs() < 1e-12);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn coeff_ranges_hold_on_random_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let net = QNet::init(16, &mut rng).unwrap();
            for _ in 0..50 {
                let s = random_state(&mut rng);
                let (a, b, _) = net.coeffs(&s);
                assert!(a < 0.0);
                assert!(b > ACCEL_MIN && b < ACCEL_MAX);
            }
        }
    }

    #[test]
    fn q_value_hand_examples() {
        // A = -1, B = 0.5, C = -2 via direct formula check
        let q = |a: f64, b: f64, c: f64, act: f64| a * (b - act) * (b - act) + c;
        assert_eq!(q(-1.0, 0.5, -2.0, 0.5), -2.0);
        assert_eq!(q(-1.0, 0.5, -2.0, 1.5), -3.0);
        assert_eq!(q(-1.0, 0.5, -2.0, -0.5), -3.0);
    }

    #[test]
    fn optimal_action_is_vertex_and_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let net = QNet::init(16, &mut rng).unwrap();
            let s = random_state(&mut rng);
            let a_star = net.optimal_action(&s);
            assert_eq!(a_star, net.coeffs(&s).1);
            // Q at the vertex equals C
            assert!((net.q_value(&s, a_star) - net.coeffs(&s).2).abs() < 1e-12);
            let grid_step = (ACCEL_MAX - ACCEL_MIN) / 10_000.0;
            let best = (0..=10_000)
                .map(|i| ACCEL_MIN + i as f64 * grid_step)
                .max_by(|x, y| net.q_value(&s, *x).total_cmp(&net.q_value(&s, *y)))
                .unwrap();
            assert!((best - a_star).abs() <= grid_step, "grid {best} vs vertex {a_star}");
        }
    }

    #[test]
    fn td_target_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pair = QTargetPair::init(16, &mut rng).unwrap();
        let s = random_state(&mut rng);
        assert_eq!(pair.td_target(-10.0, &s, true, 0.95), -10.0);
        let c = pair.target.coeffs(&s).2;
        let t = pair.td_target(-0.2, &s, false, 0.95);
        assert!((t - (-0.2 + 0.95 * c)).abs() < 1e-12);
        // target max via C equals grid search max
        let grid_max = (0..=10_000)
            .map(|i| ACCEL_MIN + i as f64 * (ACCEL_MAX - ACCEL_MIN) / 10_000.0)
            .map(|a| pair.target.q_value(&s, a))
            .fold(f64::NEG_INFINITY, f64::max);
        // grid resolution limits agreement; vertex value can only be higher
        assert!(c >= grid_max - 1e-9);
        assert!((c - grid_max).abs() < 1e-6);
    }

    #[test]
    fn sync_target_copies_and_isolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pair = QTargetPair::init(16, &mut rng).unwrap();
        // drift the prediction net first
        pair.prediction.head_c.layers[0].weights[0] += 0.5;
        pair.sync_target();
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let a = rng.gen_range(ACCEL_MIN..ACCEL_MAX);
            assert_eq!(pair.prediction.q_value(&s, a), pair.target.q_value(&s, a));
        }
        let snapshot = pair.target.clone();
        pair.prediction.head_b.layers[0].weights[3] -= 0.25;
        assert_eq!(pair.target, snapshot);
        pair.sync_target();
        let once = pair.target.clone();
        pair.sync_target();
        assert_eq!(pair.target, once);
    }

    #[test]
    fn loss_zero_when_prediction_equals_target() {
        // terminal transition with reward equal to the predicted Q value
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pair = QTargetPair::init(8, &mut rng).unwrap();
        let s = random_state(&mut rng);
        let act = pair.prediction.optimal_action(&s);
        let q = pair.prediction.q_value(&s, act).min(0.0);
        // shift C head bias so Q(s, act) is exactly q (already is); build the batch
        let batch = vec![Transition {
            state: s,
            action: act,
            reward: q.min(-0.0),
            next_state: s,
            terminal: true,
        }];
        // reward must equal prediction for zero loss; only valid when q <= 0
        if q <= 0.0 {
            let (loss, grads) = pair.loss_and_grads(&batch, 0.95).unwrap();
            assert!(loss < 1e-20);
            assert!(grads.head_a.flatten().iter().all(|g| g.abs() < 1e-12));
        }
    }

    #[test]
    fn vertex_action_kills_b_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pair = QTargetPair::init(8, &mut rng).unwrap();
        let s = random_state(&mut rng);
        let batch = vec![Transition {
            state: s,
            action: pair.prediction.optimal_action(&s),
            reward: -1.0,
            next_state: s,
            terminal: true,
        }];
        let (_, grads) = pair.loss_and_grads(&batch, 0.95).unwrap();
        assert!(grads.head_b.flatten().iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let pair = QTargetPair::init(8, &mut rng).unwrap();
        assert!(pair.loss_and_grads(&[], 0.95).is_err());
    }

    #[test]
    fn composite_gradients_match_finite_differences() {
        use crate::gradcheck;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..3 {
            let pair = QTargetPair::init(8, &mut rng).unwrap();
            let batch = gradcheck::random_batch(&mut rng, 4);
            let err = gradcheck::composite_fd_error(&pair, &batch, 0.95);
            assert!(err < 1e-4, "max relative error {err}");
        }
    }
}
