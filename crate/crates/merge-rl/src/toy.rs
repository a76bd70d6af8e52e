//! Toy speed-tracking MDP. One-dimensional deterministic dynamics with the
//! same acceleration and polygonal speed penalties as the merge reward,
//! small enough for an exact tabular oracle.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ACCEL_MAX, ACCEL_MIN, DT, SPEED_LIMIT};
use crate::reward::{speed_penalty, RewardWeights};

pub const TOY_EPISODE_STEPS: u64 = 100;
pub const TOY_W_ACCEL: f64 = 0.5;
pub const TOY_W_SPEED: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyMdpState {
    pub v: f64,
    pub step: u64,
}

pub fn toy_reset(rng: &mut ChaCha8Rng) -> ToyMdpState {
    ToyMdpState { v: rng.gen_range(0.0..=SPEED_LIMIT), step: 0 }
}

/// Deterministic transition and reward. The action is clamped nowhere;
/// callers must respect the acceleration bounds.
pub fn toy_step(state: ToyMdpState, a: f64) -> (ToyMdpState, f64, bool) {
    debug_assert!((ACCEL_MIN..=ACCEL_MAX).contains(&a));
    let v_next = (state.v + a * DT).clamp(0.0, SPEED_LIMIT);
    let reward = toy_reward(a, v_next);
    let next = ToyMdpState { v: v_next, step: state.step + 1 };
    (next, reward, next.step >= TOY_EPISODE_STEPS)
}

pub fn toy_reward(a: f64, v_next: f64) -> f64 {
    let weights = RewardWeights::default();
    -TOY_W_ACCEL * a.abs() - TOY_W_SPEED * speed_penalty(&weights, v_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_action_inside_band_gives_zero_reward() {
        let (_, r, _) = toy_step(ToyMdpState { v: 27.0, step: 0 }, 0.0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn hand_computed_reward() {
        let (next, r, _) = toy_step(ToyMdpState { v: 20.0, step: 0 }, 2.5);
        assert!((next.v - 20.25).abs() < 1e-12);
        assert!((r - -1.288).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn speed_clamps_at_limit_and_zero() {
        let (next, _, _) = toy_step(ToyMdpState { v: SPEED_LIMIT, step: 0 }, 2.5);
        assert_eq!(next.v, SPEED_LIMIT);
        let (next, _, _) = toy_step(ToyMdpState { v: 0.1, step: 0 }, -4.5);
        assert_eq!(next.v, 0.0);
    }

    #[test]
    fn episode_terminates_after_fixed_length() {
        let mut state = toy_reset(&mut ChaCha8Rng::seed_from_u64(1));
        let mut steps = 0;
        loop {
            let (next, _, done) = toy_step(state, 0.1);
            state = next;
            steps += 1;
            if done {
                break;
            }
        }
        assert_eq!(steps, TOY_EPISODE_STEPS);
    }

    #[test]
    fn reset_stays_in_bounds_and_is_deterministic() {
        let a = toy_reset(&mut ChaCha8Rng::seed_from_u64(9));
        let b = toy_reset(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.v >= 0.0 && a.v <= SPEED_LIMIT);
    }
}
