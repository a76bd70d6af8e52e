//! The training loop: k-step action hold, Gaussian exploration with a
//! linearly decaying scale, replay updates against a periodically synced
//! target network, and metrics accumulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{
    EpisodeStatus, IdmParams, MergeEnv, RoadGeometry, TrafficConfig, ACCEL_MAX, ACCEL_MIN, DT,
    SENSING_RANGE, SPEED_LIMIT, VEHICLE_LENGTH,
};
use crate::error::{Error, Result};
use crate::qfunc::{normalize, QTargetPair};
use crate::replay::{ReplayBuffer, Transition};
use crate::reward::{RewardBreakdown, RewardWeights};
use crate::toy::{toy_reset, toy_step, ToyMdpState, TOY_W_ACCEL, TOY_W_SPEED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Total environment steps N.
    pub total_steps: u64,
    /// Action update interval k, in dt ticks.
    pub action_hold: u64,
    /// Replay mini-batch size M.
    pub batch_size: usize,
    /// Target network sync interval p, in env steps.
    pub target_sync_interval: u64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub sigma_initial: f64,
    pub sigma_min: f64,
    /// Fraction of N over which sigma decays linearly to its floor.
    pub decay_fraction: f64,
    pub replay_capacity: usize,
    pub seed: u64,
    pub loss_log_stride: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 300_000,
            action_hold: 4,
            batch_size: 32,
            target_sync_interval: 500,
            gamma: 0.95,
            learning_rate: 0.001,
            sigma_initial: 1.0,
            sigma_min: 0.05,
            decay_fraction: 0.7,
            replay_capacity: 100_000,
            seed: 0,
            loss_log_stride: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.action_hold < 1 || self.target_sync_interval < 1 {
            return Err(Error::Config("action_hold and target_sync_interval must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) || self.gamma == 0.0 {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.sigma_initial < self.sigma_min || self.sigma_min < 0.0 {
            return Err(Error::Config("need sigma_initial >= sigma_min >= 0".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::Config("replay capacity must cover the batch size".into()));
        }
        Ok(())
    }
}

/// Exploration noise scale at a given env step: linear decay from
/// sigma_initial to sigma_min over decay_fraction·N, constant after.
pub fn sigma_at(step: u64, config: &TrainConfig) -> f64 {
    let horizon = config.decay_fraction * config.total_steps as f64;
    if horizon <= 0.0 || step as f64 >= horizon {
        return config.sigma_min;
    }
    let frac = step as f64 / horizon;
    config.sigma_initial + (config.sigma_min - config.sigma_initial) * frac
}

/// Gaussian exploration around the greedy action, clamped to the bounds.
pub fn explore_action(a_star: f64, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    if sigma <= 0.0 {
        return a_star.clamp(ACCEL_MIN, ACCEL_MAX);
    }
    let noise = Normal::new(0.0, sigma).expect("sigma validated").sample(rng);
    (a_star + noise).clamp(ACCEL_MIN, ACCEL_MAX)
}

/// What one dt tick of an environment reports back to the trainer.
#[derive(Debug, Clone, Copy)]
pub struct TickOutcome {
    pub state: [f64; 6],
    pub reward: RewardBreakdown,
    pub terminal: bool,
    pub status: EpisodeStatus,
    pub front_gap: f64,
    pub back_gap: f64,
}

/// Environment surface the trainer runs against. The merge scenario and
/// the toy speed MDP both implement it.
pub trait TrainEnv {
    fn reset(&mut self, seed: u64) -> Result<[f64; 6]>;
    fn tick(&mut self, action: f64) -> Result<TickOutcome>;
    fn sim_time(&self) -> f64;
}

pub struct MergeTrainEnv {
    pub geometry: RoadGeometry,
    pub traffic: TrafficConfig,
    pub idm: IdmParams,
    pub weights: RewardWeights,
    env: Option<MergeEnv>,
}

impl MergeTrainEnv {
    pub fn new(
        geometry: RoadGeometry,
        traffic: TrafficConfig,
        idm: IdmParams,
        weights: RewardWeights,
    ) -> Self {
        MergeTrainEnv { geometry, traffic, idm, weights, env: None }
    }

    pub fn env(&self) -> Option<&MergeEnv> {
        self.env.as_ref()
    }

    pub fn env_mut(&mut self) -> Option<&mut MergeEnv> {
        self.env.as_mut()
    }
}

impl TrainEnv for MergeTrainEnv {
    fn reset(&mut self, seed: u64) -> Result<[f64; 6]> {
        let mut env = MergeEnv::reset(seed, self.geometry, self.traffic, self.idm, self.weights)?;
        let obs = env.observe();
        let state = normalize(&obs, self.geometry.merge_point_x);
        self.env = Some(env);
        Ok(state)
    }

    fn tick(&mut self, action: f64) -> Result<TickOutcome> {
        let merge_point = self.geometry.merge_point_x;
        let env = self.env.as_mut().ok_or_else(|| Error::Usage("tick before reset".into()))?;
        let result = env.step(action)?;
        let obs = result.observation;
        let gap = |p: f64| (p - obs.p_ev).abs() - VEHICLE_LENGTH;
        Ok(TickOutcome {
            state: normalize(&obs, merge_point),
            reward: result.reward,
            terminal: result.terminal,
            status: result.status,
            front_gap: gap(obs.p_gfv),
            back_gap: gap(obs.p_gbv),
        })
    }

    fn sim_time(&self) -> f64 {
        self.env.as_ref().map_or(0.0, |e| e.world().t)
    }
}

/// Toy MDP adapter. The 1-D speed state occupies the first slot of the
/// 6-vector; the rest stays zero.
#[derive(Default)]
pub struct ToyTrainEnv {
    state: Option<ToyMdpState>,
}

fn toy_state_vec(s: ToyMdpState) -> [f64; 6] {
    [s.v / SPEED_LIMIT, 0.0, 0.0, 0.0, 0.0, 0.0]
}

impl TrainEnv for ToyTrainEnv {
    fn reset(&mut self, seed: u64) -> Result<[f64; 6]> {
        let state = toy_reset(&mut ChaCha8Rng::seed_from_u64(seed));
        self.state = Some(state);
        Ok(toy_state_vec(state))
    }

    fn tick(&mut self, action: f64) -> Result<TickOutcome> {
        let state = self.state.ok_or_else(|| Error::Usage("tick before reset".into()))?;
        let (next, reward, done) = toy_step(state, action);
        self.state = Some(next);
        let weights = RewardWeights::default();
        let r_accel = -TOY_W_ACCEL * action.abs();
        let r_speed = -TOY_W_SPEED * crate::reward::speed_penalty(&weights, next.v);
        Ok(TickOutcome {
            state: toy_state_vec(next),
            reward: RewardBreakdown {
                r_accel,
                r_front: 0.0,
                r_back: 0.0,
                r_speed,
                total: reward,
            },
            terminal: done,
            status: if done { EpisodeStatus::Success } else { EpisodeStatus::Running },
            front_gap: SENSING_RANGE - VEHICLE_LENGTH,
            back_gap: SENSING_RANGE - VEHICLE_LENGTH,
        })
    }

    fn sim_time(&self) -> f64 {
        self.state.map_or(0.0, |s| s.step as f64 * DT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub update_index: u64,
    pub env_step: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub outcome: EpisodeStatus,
    pub steps: u64,
    pub reward_total: f64,
    pub reward_accel: f64,
    pub reward_front: f64,
    pub reward_back: f64,
    pub reward_speed: f64,
    pub merge_duration_s: f64,
    pub min_front_gap_m: f64,
    pub min_back_gap_m: f64,
    pub mean_abs_accel: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainMetrics {
    pub losses: Vec<LossRecord>,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Default)]
struct EpisodeAccumulator {
    steps: u64,
    r_accel: f64,
    r_front: f64,
    r_back: f64,
    r_speed: f64,
    min_front_gap: f64,
    min_back_gap: f64,
    abs_accel_sum: f64,
}

impl EpisodeAccumulator {
    fn fresh() -> Self {
        EpisodeAccumulator {
            min_front_gap: f64::INFINITY,
            min_back_gap: f64::INFINITY,
            ..Default::default()
        }
    }

    fn absorb(&mut self, out: &TickOutcome, action: f64) {
        self.steps += 1;
        self.r_accel += out.reward.r_accel;
        self.r_front += out.reward.r_front;
        self.r_back += out.reward.r_back;
        self.r_speed += out.reward.r_speed;
        self.min_front_gap = self.min_front_gap.min(out.front_gap);
        self.min_back_gap = self.min_back_gap.min(out.back_gap);
        self.abs_accel_sum += action.abs();
    }

    fn finish(&self, episode: u64, outcome: EpisodeStatus, duration: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            outcome,
            steps: self.steps,
            reward_total: self.r_accel + self.r_front + self.r_back + self.r_speed,
            reward_accel: self.r_accel,
            reward_front: self.r_front,
            reward_back: self.r_back,
            reward_speed: self.r_speed,
            merge_duration_s: duration,
            min_front_gap_m: self.min_front_gap,
            min_back_gap_m: self.min_back_gap,
            mean_abs_accel: if self.steps > 0 {
                self.abs_accel_sum / self.steps as f64
            } else {
                0.0
            },
        }
    }
}

fn episode_seed(base: u64, episode: u64) -> u64 {
    base ^ (episode.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Run the full training procedure. Deterministic per (config, env setup).
pub fn train(
    config: &TrainConfig,
    env: &mut dyn TrainEnv,
    hidden: usize,
) -> Result<(QTargetPair, TrainMetrics)> {
    let mut net_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pair = QTargetPair::init(hidden, &mut net_rng)?;
    train_from(config, env, pair)
}

/// Like `train`, but continues from an existing network pair (e.g. a second
/// phase with a lower learning rate or noise floor).
pub fn train_from(
    config: &TrainConfig,
    env: &mut dyn TrainEnv,
    pair: QTargetPair,
) -> Result<(QTargetPair, TrainMetrics)> {
    config.validate()?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5DEE_CE66_D1CE_u64);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xB5F0_0B5F_00B5_u64);

    let mut pair = pair;
    let mut buffer = ReplayBuffer::new(config.replay_capacity);
    let mut metrics = TrainMetrics::default();

    let mut episode_index: u64 = 0;
    let mut state = env.reset(episode_seed(config.seed, 0))?;
    let mut acc = EpisodeAccumulator::fresh();
    let mut env_step: u64 = 0;
    let mut update_count: u64 = 0;

    while env_step < config.total_steps {
        let a_star = pair.prediction.optimal_action(&state);
        let action = explore_action(a_star, sigma_at(env_step, config), &mut noise_rng);

        let block_state = state;
        let mut block_reward = 0.0;
        let mut terminal = false;
        let mut status = EpisodeStatus::Running;
        for _ in 0..config.action_hold {
            if env_step >= config.total_steps {
                break;
            }
            let out = env.tick(action)?;
            env_step += 1;
            block_reward += out.reward.total;
            acc.absorb(&out, action);
            state = out.state;
            terminal = out.terminal;
            status = out.status;
            if env_step % config.target_sync_interval == 0 {
                pair.sync_target();
            }
            if terminal {
                break;
            }
        }
        if terminal {
            block_reward += status.terminal_penalty();
        }
        buffer.push(Transition {
            state: block_state,
            action,
            reward: block_reward,
            next_state: state,
            terminal,
        })?;

        if buffer.len() >= config.batch_size {
            let batch = buffer.sample(config.batch_size, &mut sample_rng)?;
            let (loss, grads) = pair.loss_and_grads(&batch, config.gamma)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at env step {env_step} (update {update_count})"
                )));
            }
            pair.apply_update(&grads, config.learning_rate)?;
            update_count += 1;
            if update_count % config.loss_log_stride == 0 {
                metrics.losses.push(LossRecord { update_index: update_count, env_step, loss });
            }
        }

        if terminal {
            metrics
                .episodes
                .push(acc.finish(episode_index, status, env.sim_time()));
            episode_index += 1;
            state = env.reset(episode_seed(config.seed, episode_index))?;
            acc = EpisodeAccumulator::fresh();
        }
    }
    Ok((pair, metrics))
}
