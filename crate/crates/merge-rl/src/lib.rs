//! Continuous-action Q-learning for autonomous highway on-ramp merging.
//!
//! The action-value function is a quadratic in the acceleration,
//! Q(s, a) = A(s)·(B(s) − a)² + C(s), with three small neural networks
//! producing the coefficients. Because A(s) is forced negative, B(s) is
//! both the greedy action and the vertex of the quadratic, so acting and
//! bootstrapping stay closed-form even though states and actions are
//! continuous. Training uses experience replay and a periodically synced
//! target network inside a seedable microscopic merge simulator.

pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod qfunc;
pub mod replay;
pub mod reward;
pub mod toy;
pub mod trainer;

pub use config::Config;
pub use error::{Error, Result};
