//! Fixed-capacity experience replay memory with uniform mini-batch
//! sampling (with replacement).

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const ACTION_MIN: f64 = -4.5;
pub const ACTION_MAX: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; 6],
    pub action: f64,
    pub reward: f64,
    pub next_state: [f64; 6],
    pub terminal: bool,
}

impl Transition {
    fn validate(&self) -> Result<()> {
        if !(ACTION_MIN..=ACTION_MAX).contains(&self.action) {
            return Err(Error::Usage(format!(
                "transition action {} outside [{ACTION_MIN}, {ACTION_MAX}]",
                self.action
            )));
        }
        if self.reward > 0.0 {
            return Err(Error::Usage(format!("transition reward {} is positive", self.reward)));
        }
        let finite = self.state.iter().chain(self.next_state.iter()).all(|x| x.is_finite())
            && self.action.is_finite()
            && self.reward.is_finite();
        if !finite {
            return Err(Error::Usage("transition contains non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { storage: VecDeque::with_capacity(capacity.min(1 << 20)), capacity }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate()?;
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
        Ok(())
    }

    /// Uniform sample of `batch` transitions, with replacement.
    pub fn sample(&self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Transition>> {
        if self.storage.len() < batch {
            return Err(Error::InsufficientData { have: self.storage.len(), need: batch });
        }
        Ok((0..batch)
            .map(|_| self.storage[rng.gen_range(0..self.storage.len())])
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}
