//! C ABI for the merge simulator and trained policies: opaque handles,
//! integer error codes, and a thread-local last-error message.
//!
//! The generated header lands in `include/merge_rl.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::path::Path;
use std::ptr;

use merge_rl::checkpoint;
use merge_rl::config::Config;
use merge_rl::env::{EpisodeStatus, MergeEnv, Observation};
use merge_rl::error::Error;
use merge_rl::qfunc::{normalize, QTargetPair};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeRlStatus {
    MergeRlOk = 0,
    MergeRlUsageError = 1,
    MergeRlConfigError = 2,
    MergeRlNumericError = 3,
    MergeRlIoError = 4,
    MergeRlNullPointer = 5,
}

/// Episode outcome, mirroring the simulator's episode status.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeRlEpisode {
    MergeRlRunning = 0,
    MergeRlSuccess = 1,
    MergeRlCollision = 2,
    MergeRlTimeout = 3,
}

/// Raw six-component observation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MergeRlObservation {
    pub v_ev: c_double,
    pub p_ev: c_double,
    pub v_gfv: c_double,
    pub p_gfv: c_double,
    pub v_gbv: c_double,
    pub p_gbv: c_double,
}

/// One simulation tick's outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MergeRlStepResult {
    pub observation: MergeRlObservation,
    pub reward_total: c_double,
    pub reward_accel: c_double,
    pub reward_front: c_double,
    pub reward_back: c_double,
    pub reward_speed: c_double,
    pub terminal: c_int,
    pub episode: MergeRlEpisode,
}

/// Opaque simulator handle.
pub struct MergeRlEnv {
    env: MergeEnv,
}

/// Opaque policy handle wrapping a loaded checkpoint.
pub struct MergeRlPolicy {
    pair: QTargetPair,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(err: &Error) -> MergeRlStatus {
    let message = CString::new(err.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
    match err {
        Error::Usage(_) | Error::InsufficientData { .. } => MergeRlStatus::MergeRlUsageError,
        Error::Config(_) => MergeRlStatus::MergeRlConfigError,
        Error::Numeric(_) => MergeRlStatus::MergeRlNumericError,
        Error::Checkpoint(_) | Error::Io(_) | Error::Json(_) => MergeRlStatus::MergeRlIoError,
    }
}

fn null_pointer(what: &str) -> MergeRlStatus {
    let message = CString::new(format!("null pointer: {what}")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
    MergeRlStatus::MergeRlNullPointer
}

fn to_observation(obs: &Observation) -> MergeRlObservation {
    MergeRlObservation {
        v_ev: obs.v_ev,
        p_ev: obs.p_ev,
        v_gfv: obs.v_gfv,
        p_gfv: obs.p_gfv,
        v_gbv: obs.v_gbv,
        p_gbv: obs.p_gbv,
    }
}

fn to_episode(status: EpisodeStatus) -> MergeRlEpisode {
    match status {
        EpisodeStatus::Running => MergeRlEpisode::MergeRlRunning,
        EpisodeStatus::Success => MergeRlEpisode::MergeRlSuccess,
        EpisodeStatus::Collision => MergeRlEpisode::MergeRlCollision,
        EpisodeStatus::Timeout => MergeRlEpisode::MergeRlTimeout,
    }
}

/// Message describing the most recent error on this thread. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn merge_rl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Create a simulator from an optional JSON config document (NULL for
/// defaults) and a seed. Returns NULL on error.
#[no_mangle]
pub unsafe extern "C" fn merge_rl_env_new(
    config_json: *const c_char,
    seed: u64,
) -> *mut MergeRlEnv {
    let config = if config_json.is_null() {
        Config::default()
    } else {
        let text = match CStr::from_ptr(config_json).to_str() {
            Ok(text) => text,
            Err(_) => {
                null_pointer("config_json is not valid UTF-8");
                return ptr::null_mut();
            }
        };
        match serde_json::from_str::<Config>(text)
            .map_err(|e| Error::Config(e.to_string()))
            .and_then(|c| c.validate().map(|_| c))
        {
            Ok(config) => config,
            Err(err) => {
                set_error(&err);
                return ptr::null_mut();
            }
        }
    };
    match MergeEnv::reset(
        seed,
        config.env.geometry,
        config.env.traffic,
        config.env.idm,
        config.reward,
    ) {
        Ok(env) => Box::into_raw(Box::new(MergeRlEnv { env })),
        Err(err) => {
            set_error(&err);
            ptr::null_mut()
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn merge_rl_env_free(env: *mut MergeRlEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Current observation without advancing the simulation.
#[no_mangle]
pub unsafe extern "C" fn merge_rl_env_observe(
    env: *mut MergeRlEnv,
    out: *mut MergeRlObservation,
) -> MergeRlStatus {
    if env.is_null() || out.is_null() {
        return null_pointer("env or out");
    }
    let handle = &mut *env;
    *out = to_observation(&handle.env.observe());
    MergeRlStatus::MergeRlOk
}

/// Advance one 0.1 s tick under the given ego acceleration.
#[no_mangle]
pub unsafe extern "C" fn merge_rl_env_step(
    env: *mut MergeRlEnv,
    ego_accel: c_double,
    out: *mut MergeRlStepResult,
) -> MergeRlStatus {
    if env.is_null() || out.is_null() {
        return null_pointer("env or out");
    }
    let handle = &mut *env;
    match handle.env.step(ego_accel) {
        Ok(result) => {
            *out = MergeRlStepResult {
                observation: to_observation(&result.observation),
                reward_total: result.reward.total,
                reward_accel: result.reward.r_accel,
                reward_front: result.reward.r_front,
                reward_back: result.reward.r_back,
                reward_speed: result.reward.r_speed,
                terminal: result.terminal as c_int,
                episode: to_episode(result.status),
            };
            MergeRlStatus::MergeRlOk
        }
        Err(err) => set_error(&err),
    }
}

/// Load a policy from a checkpoint file. Returns NULL on error.
#[no_mangle]
pub unsafe extern "C" fn merge_rl_policy_load(path: *const c_char) -> *mut MergeRlPolicy {
    if path.is_null() {
        null_pointer("path");
        return ptr::null_mut();
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p,
        Err(_) => {
            null_pointer("path is not valid UTF-8");
            return ptr::null_mut();
        }
    };
    match checkpoint::load(Path::new(path)) {
        Ok(pair) => Box::into_raw(Box::new(MergeRlPolicy { pair })),
        Err(err) => {
            set_error(&err);
            ptr::null_mut()
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn merge_rl_policy_free(policy: *mut MergeRlPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Greedy acceleration for a raw observation. `merge_point_x` anchors the
/// position normalization (0 for the default geometry).
#[no_mangle]
pub unsafe extern "C" fn merge_rl_policy_action(
    policy: *const MergeRlPolicy,
    observation: *const MergeRlObservation,
    merge_point_x: c_double,
    action_out: *mut c_double,
) -> MergeRlStatus {
    if policy.is_null() || observation.is_null() || action_out.is_null() {
        return null_pointer("policy, observation or action_out");
    }
    let obs = &*observation;
    let state = normalize(
        &Observation {
            v_ev: obs.v_ev,
            p_ev: obs.p_ev,
            v_gfv: obs.v_gfv,
            p_gfv: obs.p_gfv,
            v_gbv: obs.v_gbv,
            p_gbv: obs.p_gbv,
        },
        merge_point_x,
    );
    *action_out = (*policy).pair.prediction.optimal_action(&state);
    MergeRlStatus::MergeRlOk
}
