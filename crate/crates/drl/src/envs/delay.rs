//! The delay queue and the wrappers that impose it.
//!
//! A length-d FIFO sits between the agent and the environment: the action
//! chosen now enters the back, the action chosen d steps ago pops out and is
//! the one actually executed. The observation handed to the agent is the
//! current state together with a snapshot of the queue (the augmented
//! approach). Frame skip repeats the executed action for f inner frames with
//! rewards summed.

use super::{Environment, TwoPlayerEnv};
use crate::error::{DrlError, Result};
use crate::state::{Action, MixedState};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// Length-d FIFO of pending actions, initialized with no-ops at reset.
#[derive(Debug, Clone)]
pub struct DelayQueue {
    d: usize,
    buf: VecDeque<Action>,
}

impl DelayQueue {
    pub fn new(d: usize) -> Self {
        DelayQueue {
            d,
            buf: std::iter::repeat(Action::NOOP).take(d).collect(),
        }
    }

    pub fn delay(&self) -> usize {
        self.d
    }

    /// Push the newly chosen action and pop the one to execute now. With
    /// d = 0 the chosen action executes immediately.
    pub fn push(&mut self, chosen: Action) -> Action {
        if self.d == 0 {
            return chosen;
        }
        self.buf.push_back(chosen);
        let executed = self.buf.pop_front().expect("queue is never empty for d>0");
        debug_assert_eq!(self.buf.len(), self.d);
        executed
    }

    /// Pending actions, oldest first: the next to execute is index 0.
    pub fn snapshot(&self) -> Vec<Action> {
        self.buf.iter().copied().collect()
    }

    pub fn reset(&mut self) {
        self.buf = std::iter::repeat(Action::NOOP).take(self.d).collect();
    }
}

/// A delayed, frame-skipped view of a single-agent environment.
pub struct DelayedEnv<E: Environment> {
    pub inner: E,
    queue: DelayQueue,
    frame_skip: usize,
    terminal: bool,
}

#[derive(Debug, Clone)]
pub struct DelayedStep {
    pub state: MixedState,
    /// Queue contents after this step, oldest first; what the agent observes
    /// alongside `state` when making its next decision.
    pub queue: Vec<Action>,
    pub executed: Action,
    pub reward: f64,
    pub terminal: bool,
}

impl<E: Environment> DelayedEnv<E> {
    pub fn new(inner: E, d: usize, frame_skip: usize) -> Result<Self> {
        if frame_skip == 0 {
            return Err(DrlError::contract("frame skip must be >= 1".to_string()));
        }
        Ok(DelayedEnv {
            inner,
            queue: DelayQueue::new(d),
            frame_skip,
            terminal: false,
        })
    }

    pub fn delay(&self) -> usize {
        self.queue.delay()
    }

    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> (MixedState, Vec<Action>) {
        self.queue.reset();
        self.terminal = false;
        (self.inner.reset(rng), self.queue.snapshot())
    }

    /// One agent step: `chosen` enters the queue, the action chosen d steps
    /// ago executes for `frame_skip` inner frames (stopping early if the
    /// episode ends) with rewards summed.
    pub fn step(&mut self, chosen: Action) -> Result<DelayedStep> {
        if self.terminal {
            return Err(DrlError::contract(
                "delayed step on terminal environment".to_string(),
            ));
        }
        let executed = self.queue.push(chosen);
        let mut reward = 0.0;
        let mut state = None;
        let mut terminal = false;
        for _ in 0..self.frame_skip {
            let step = self.inner.step(executed)?;
            reward += step.reward;
            terminal = step.terminal;
            state = Some(step.state);
            if terminal {
                break;
            }
        }
        self.terminal = terminal;
        Ok(DelayedStep {
            state: state.expect("frame skip >= 1"),
            queue: self.queue.snapshot(),
            executed,
            reward,
            terminal,
        })
    }
}

/// Two-player delayed wrapper: each player owns an independent queue, so the
/// two sides may run different delays. Frame skip is shared (simultaneous
/// play).
pub struct TwoPlayerDelayed<E: TwoPlayerEnv> {
    pub inner: E,
    queues: (DelayQueue, DelayQueue),
    frame_skip: usize,
    terminal: bool,
}

#[derive(Debug, Clone)]
pub struct TwoPlayerDelayedStep {
    pub obs: (MixedState, MixedState),
    pub queues: (Vec<Action>, Vec<Action>),
    pub executed: (Action, Action),
    pub rewards: (f64, f64),
    pub terminal: bool,
}

impl<E: TwoPlayerEnv> TwoPlayerDelayed<E> {
    pub fn new(inner: E, d_a: usize, d_b: usize, frame_skip: usize) -> Result<Self> {
        if frame_skip == 0 {
            return Err(DrlError::contract("frame skip must be >= 1".to_string()));
        }
        Ok(TwoPlayerDelayed {
            inner,
            queues: (DelayQueue::new(d_a), DelayQueue::new(d_b)),
            frame_skip,
            terminal: false,
        })
    }

    pub fn delays(&self) -> (usize, usize) {
        (self.queues.0.delay(), self.queues.1.delay())
    }

    pub fn reset(
        &mut self,
        rng: &mut ChaCha8Rng,
    ) -> ((MixedState, MixedState), (Vec<Action>, Vec<Action>)) {
        self.queues.0.reset();
        self.queues.1.reset();
        self.terminal = false;
        (
            self.inner.reset(rng),
            (self.queues.0.snapshot(), self.queues.1.snapshot()),
        )
    }

    pub fn step(&mut self, chosen_a: Action, chosen_b: Action) -> Result<TwoPlayerDelayedStep> {
        if self.terminal {
            return Err(DrlError::contract(
                "delayed step on terminal environment".to_string(),
            ));
        }
        let executed = (self.queues.0.push(chosen_a), self.queues.1.push(chosen_b));
        let mut rewards = (0.0, 0.0);
        let mut obs = None;
        let mut terminal = false;
        for _ in 0..self.frame_skip {
            let step = self.inner.step(executed.0, executed.1)?;
            rewards.0 += step.rewards.0;
            rewards.1 += step.rewards.1;
            terminal = step.terminal;
            obs = Some(step.obs);
            if terminal {
                break;
            }
        }
        self.terminal = terminal;
        Ok(TwoPlayerDelayedStep {
            obs: obs.expect("frame skip >= 1"),
            queues: (self.queues.0.snapshot(), self.queues.1.snapshot()),
            executed,
            rewards,
            terminal,
        })
    }
}

/// Reaction time of a (d, ·, f) agent at the given frame rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionTime {
    pub frames: u32,
    pub ms: f64,
    /// Average including the extra (f−1)/2 frames the skip itself adds.
    pub avg_ms: f64,
}

pub fn reaction_time_ms(d: u32, f: u32, hz: u32) -> Result<ReactionTime> {
    if f == 0 || hz == 0 {
        return Err(DrlError::contract(
            "frame skip and frame rate must be >= 1".to_string(),
        ));
    }
    let frames = d * f;
    let per_frame = 1000.0 / hz as f64;
    let ms = frames as f64 * per_frame;
    let avg_ms = (frames as f64 + (f as f64 - 1.0) / 2.0) * per_frame;
    Ok(ReactionTime { frames, ms, avg_ms })
}
