//! Brute-force tabular oracle for the toy speed MDP: sweep-until-converged
//! value iteration over a discretized speed grid, with next-state values
//! interpolated linearly between bins.

use crate::env::{ACCEL_MAX, ACCEL_MIN, DT, SPEED_LIMIT};
use crate::error::{Error, Result};
use crate::toy::toy_reward;

const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct OracleTable {
    pub v_grid: Vec<f64>,
    pub actions: Vec<f64>,
    /// q[i][j] = Q(v_grid[i], actions[j]) at convergence.
    pub q: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub max_residual: f64,
    pub gamma: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Linear interpolation of grid values at speed `v`.
fn interp(grid: &[f64], values: &[f64], v: f64) -> f64 {
    let lo = grid[0];
    let hi = *grid.last().unwrap();
    let v = v.clamp(lo, hi);
    let pos = (v - lo) / (hi - lo) * (grid.len() - 1) as f64;
    let i = (pos.floor() as usize).min(grid.len() - 2);
    let frac = pos - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

pub fn oracle_q_iteration(v_bins: usize, a_bins: usize, gamma: f64, tol: f64) -> Result<OracleTable> {
    if v_bins < 2 || a_bins < 2 {
        return Err(Error::Config("oracle needs at least 2 bins per axis".into()));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config("gamma must lie in [0, 1)".into()));
    }
    let v_grid = linspace(0.0, SPEED_LIMIT, v_bins);
    let actions = linspace(ACCEL_MIN, ACCEL_MAX, a_bins);
    let mut values = vec![0.0; v_bins];
    let mut q = vec![vec![0.0; a_bins]; v_bins];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < MAX_SWEEPS {
        iterations += 1;
        let mut next_values = vec![f64::NEG_INFINITY; v_bins];
        for (i, &v) in v_grid.iter().enumerate() {
            for (j, &a) in actions.iter().enumerate() {
                let v_next = (v + a * DT).clamp(0.0, SPEED_LIMIT);
                let qv = toy_reward(a, v_next) + gamma * interp(&v_grid, &values, v_next);
                q[i][j] = qv;
                if qv > next_values[i] {
                    next_values[i] = qv;
                }
            }
        }
        residual = values
            .iter()
            .zip(&next_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next_values;
        if residual < tol {
            return Ok(OracleTable {
                v_grid,
                actions,
                q,
                values,
                iterations,
                max_residual: residual,
                gamma,
            });
        }
    }
    Err(Error::Numeric(format!(
        "oracle did not converge within {MAX_SWEEPS} sweeps (residual {residual})"
    )))
}

impl OracleTable {
    /// Greedy action at a continuous speed, via one Bellman backup against
    /// the converged value function.
    pub fn greedy_action(&self, v: f64) -> f64 {
        let mut best = self.actions[0];
        let mut best_q = f64::NEG_INFINITY;
        for &a in &self.actions {
            let v_next = (v + a * DT).clamp(0.0, SPEED_LIMIT);
            let qv = toy_reward(a, v_next) + self.gamma * interp(&self.v_grid, &self.values, v_next);
            if qv > best_q {
                best_q = qv;
                best = a;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn myopic_limit_equals_immediate_reward() {
        let table = oracle_q_iteration(21, 15, 0.0, 1e-12).unwrap();
        for (i, &v) in table.v_grid.iter().enumerate() {
            for (j, &a) in table.actions.iter().enumerate() {
                let v_next = (v + a * DT).clamp(0.0, SPEED_LIMIT);
                assert!((table.q[i][j] - toy_reward(a, v_next)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn converges_below_tolerance() {
        let table = oracle_q_iteration(121, 29, 0.95, 1e-8).unwrap();
        assert!(table.max_residual < 1e-8);
        assert!(table.iterations < MAX_SWEEPS);
    }

    #[test]
    fn greedy_action_near_zero_in_band() {
        let table = oracle_q_iteration(121, 29, 0.95, 1e-8).unwrap();
        // with a 29-point action grid, 0 is exactly a grid point
        for v in [26.0, 27.0, 28.0] {
            assert_eq!(table.greedy_action(v), 0.0, "v = {v}");
        }
        // even far below the band, the acceleration penalty dominates
        assert!(table.greedy_action(10.0).abs() < 0.3);
    }

    #[test]
    fn residuals_shrink_monotonically() {
        // re-run value iteration manually, tracking residuals
        let v_grid = linspace(0.0, SPEED_LIMIT, 61);
        let actions = linspace(ACCEL_MIN, ACCEL_MAX, 15);
        let mut values = vec![0.0; v_grid.len()];
        let mut residuals = Vec::new();
        for _ in 0..50 {
            let mut next = vec![f64::NEG_INFINITY; v_grid.len()];
            for (i, &v) in v_grid.iter().enumerate() {
                for &a in &actions {
                    let vn = (v + a * DT).clamp(0.0, SPEED_LIMIT);
                    let q = toy_reward(a, vn) + 0.95 * interp(&v_grid, &values, vn);
                    next[i] = next[i].max(q);
                }
            }
            residuals.push(
                values.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            );
            values = next;
        }
        for pair in residuals[1..].windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }
}
