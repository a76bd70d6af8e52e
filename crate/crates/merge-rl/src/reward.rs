//! Immediate penalty-style reward and its four-way decomposition:
//! an acceleration term, front/back gap-distance terms, and a polygonal
//! speed term. Every component is <= 0.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub w_accel: f64,
    pub w_front: f64,
    pub w_back: f64,
    pub w_speed: f64,
    pub d_min: f64,
    pub d_safe: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub activation_distance: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_accel: 0.5,
            w_front: 2.0,
            w_back: 1.0,
            w_speed: 0.2,
            d_min: 2.0,
            d_safe: 15.0,
            v_lo: 25.0,
            v_hi: 29.0576,
            activation_distance: 100.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        if self.w_accel < 0.0 || self.w_front < 0.0 || self.w_back < 0.0 || self.w_speed < 0.0 {
            return Err("reward weights must be non-negative".into());
        }
        if self.w_front <= self.w_back {
            return Err("w_front must exceed w_back".into());
        }
        if self.d_min >= self.d_safe {
            return Err("d_min must be below d_safe".into());
        }
        if self.v_lo >= self.v_hi {
            return Err("v_lo must be below v_hi".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_accel: f64,
    pub r_front: f64,
    pub r_back: f64,
    pub r_speed: f64,
    pub total: f64,
}

impl RewardBreakdown {
    fn assemble(r_accel: f64, r_front: f64, r_back: f64, r_speed: f64) -> Self {
        RewardBreakdown {
            r_accel,
            r_front,
            r_back,
            r_speed,
            total: r_accel + r_front + r_back + r_speed,
        }
    }
}

/// Acceleration penalty: -w_accel * |a|.
pub fn r_accel(weights: &RewardWeights, a: f64) -> f64 {
    -weights.w_accel * a.abs()
}

/// Gap-distance penalty shape: zero beyond d_safe, quadratic ramp inside
/// the safety band, linear growth below d_min.
fn gap_penalty(weights: &RewardWeights, d: f64) -> f64 {
    if d >= weights.d_safe {
        0.0
    } else if d >= weights.d_min {
        let x = (weights.d_safe - d) / (weights.d_safe - weights.d_min);
        x * x
    } else {
        1.0 + (weights.d_min - d)
    }
}

/// Front/back gap penalties. Inactive outside the merge zone.
pub fn r_distance(weights: &RewardWeights, d_front: f64, d_back: f64, active: bool) -> (f64, f64) {
    if !active {
        return (0.0, 0.0);
    }
    (
        -weights.w_front * gap_penalty(weights, d_front),
        -weights.w_back * gap_penalty(weights, d_back),
    )
}

/// Polygonal speed penalty: zero inside [v_lo, v_hi], linear outside.
pub fn speed_penalty(weights: &RewardWeights, v: f64) -> f64 {
    if v < weights.v_lo {
        (weights.v_lo - v) / weights.v_lo
    } else if v > weights.v_hi {
        (v - weights.v_hi) / weights.v_hi
    } else {
        0.0
    }
}

pub fn r_speed(weights: &RewardWeights, v: f64) -> f64 {
    -weights.w_speed * speed_penalty(weights, v)
}

/// Full immediate reward for one tick.
pub fn immediate_reward(
    weights: &RewardWeights,
    a: f64,
    v: f64,
    d_front: f64,
    d_back: f64,
    active: bool,
) -> RewardBreakdown {
    let (rf, rb) = r_distance(weights, d_front, d_back, active);
    RewardBreakdown::assemble(r_accel(weights, a), rf, rb, r_speed(weights, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> RewardWeights {
        RewardWeights::default()
    }

    #[test]
    fn accel_zero_and_bounds() {
        assert_eq!(r_accel(&w(), 0.0), 0.0);
        assert!((r_accel(&w(), 2.5) - -1.25).abs() < 1e-12);
        assert!((r_accel(&w(), -4.5) - -2.25).abs() < 1e-12);
    }

    #[test]
    fn distance_inactive_is_zero() {
        assert_eq!(r_distance(&w(), 0.5, -1.0, false), (0.0, 0.0));
    }

    #[test]
    fn distance_hand_value() {
        let (rf, _) = r_distance(&w(), 8.5, 30.0, true);
        assert!((rf - -0.5).abs() < 1e-12);
    }

    #[test]
    fn distance_safe_boundary_is_zero() {
        assert_eq!(r_distance(&w(), 15.0, 15.0, true), (0.0, 0.0));
    }

    #[test]
    fn distance_linear_below_min() {
        // g(d) = 1 + (d_min - d) for d < d_min
        let (rf, rb) = r_distance(&w(), 0.0, -1.0, true);
        assert!((rf - -2.0 * 3.0).abs() < 1e-12);
        assert!((rb - -1.0 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn speed_band_and_extremes() {
        assert_eq!(r_speed(&w(), 27.0), 0.0);
        assert!((r_speed(&w(), 20.0) - -0.04).abs() < 1e-12);
        assert!((r_speed(&w(), 0.0) - -0.2).abs() < 1e-12);
    }

    #[test]
    fn immediate_reward_sums_examples() {
        let b = immediate_reward(&w(), 2.5, 20.0, 8.5, 30.0, true);
        assert!((b.total - -1.79).abs() < 1e-12);
        let far = immediate_reward(&w(), 0.0, 27.0, 150.0, 150.0, false);
        assert_eq!(far.total, 0.0);
    }

    #[test]
    fn components_nonpositive_and_decomposition_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let a = rng.gen_range(-4.5..2.5);
            let v = rng.gen_range(0.0..40.0);
            let df = rng.gen_range(-5.0..160.0);
            let db = rng.gen_range(-5.0..160.0);
            let active = rng.gen_bool(0.5);
            let b = immediate_reward(&w(), a, v, df, db, active);
            assert!(b.r_accel <= 0.0 && b.r_front <= 0.0 && b.r_back <= 0.0 && b.r_speed <= 0.0);
            assert_eq!(b.total, b.r_accel + b.r_front + b.r_back + b.r_speed);
        }
    }

    #[test]
    fn front_emphasis_at_equal_gaps() {
        for d in [0.0, 1.0, 5.0, 10.0, 14.9] {
            let (rf, rb) = r_distance(&w(), d, d, true);
            assert!(rf.abs() > rb.abs(), "d = {d}");
        }
    }

    #[test]
    fn gap_penalty_monotone_in_distance() {
        let weights = w();
        let mut prev = f64::INFINITY;
        let mut d = -3.0;
        while d < 20.0 {
            let g = gap_penalty(&weights, d);
            assert!(g <= prev + 1e-12);
            prev = g;
            d += 0.05;
        }
    }
}
