//! W×H gridworld with slip probability ε: the intended move happens with
//! probability 1−ε, otherwise one of the three other directions is taken
//! uniformly. Start bottom-left, +1 on entering the top-right goal.

use super::{Environment, Step};
use crate::error::{DrlError, Result};
use crate::state::{Action, CatValue, MixedState, StateSchema};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Gridworld {
    w: usize,
    h: usize,
    slip: f64,
    schema: StateSchema,
    cell: usize,
    steps: usize,
    max_steps: usize,
    terminal: bool,
    started: bool,
    rng: ChaCha8Rng,
}

/// Deterministic effect of moving in `dir` (0=up, 1=right, 2=down, 3=left)
/// from `cell`. Off-grid moves stay in place.
pub(crate) fn grid_move(w: usize, h: usize, cell: usize, dir: usize) -> usize {
    let (x, y) = (cell % w, cell / w);
    let (nx, ny) = match dir {
        0 => (x, (y + 1).min(h - 1)),
        1 => ((x + 1).min(w - 1), y),
        2 => (x, y.saturating_sub(1)),
        _ => (x.saturating_sub(1), y),
    };
    ny * w + nx
}

/// Full transition distribution for (cell, action): list of (probability,
/// next cell, reward, entered_goal). Shared with the tabular oracles.
pub(crate) fn grid_transitions(
    w: usize,
    h: usize,
    slip: f64,
    cell: usize,
    action: usize,
) -> Vec<(f64, usize, f64, bool)> {
    let goal = w * h - 1;
    let outcome = |dir: usize| {
        let next = grid_move(w, h, cell, dir);
        let entered = next == goal && cell != goal;
        (next, if entered { 1.0 } else { 0.0 }, entered)
    };
    let mut out = Vec::with_capacity(4);
    for dir in 0..4 {
        let p = if dir == action {
            1.0 - slip
        } else {
            slip / 3.0
        };
        if p > 0.0 {
            let (n, r, g) = outcome(dir);
            out.push((p, n, r, g));
        }
    }
    out
}

impl Gridworld {
    pub fn new(w: usize, h: usize, slip: f64, max_steps: usize) -> Result<Self> {
        if w < 2 || h < 2 {
            return Err(DrlError::usage("gridworld needs w, h >= 2".to_string()));
        }
        if !(0.0..=0.75).contains(&slip) {
            return Err(DrlError::usage(format!(
                "gridworld slip {slip} outside [0, 0.75]"
            )));
        }
        Ok(Gridworld {
            w,
            h,
            slip,
            schema: StateSchema::new(2, vec![w * h]),
            cell: 0,
            steps: 0,
            max_steps,
            terminal: false,
            started: false,
            rng: crate::rng::RngStream::new(0, 0).rng(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.w, self.h)
    }

    pub fn slip(&self) -> f64 {
        self.slip
    }

    fn observe(&self) -> MixedState {
        let (x, y) = (self.cell % self.w, self.cell / self.w);
        MixedState::new(
            vec![
                x as f64 / (self.w - 1) as f64,
                y as f64 / (self.h - 1) as f64,
            ],
            vec![CatValue::new(self.w * self.h, self.cell)],
        )
    }
}

impl Environment for Gridworld {
    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> MixedState {
        self.rng = crate::rng::fork(rng);
        self.cell = 0;
        self.steps = 0;
        self.terminal = false;
        self.started = true;
        self.observe()
    }

    fn step(&mut self, action: Action) -> Result<Step> {
        if !self.started || self.terminal {
            return Err(DrlError::contract("step on terminal gridworld".to_string()));
        }
        if action.index() >= 4 {
            return Err(DrlError::contract(format!(
                "gridworld action {} out of range",
                action.index()
            )));
        }
        let dir = if self.slip > 0.0 && self.rng.gen::<f64>() < self.slip {
            // Slip to one of the three unintended directions.
            let k = self.rng.gen_range(0..3usize);
            (action.index() + 1 + k) % 4
        } else {
            action.index()
        };
        let next = grid_move(self.w, self.h, self.cell, dir);
        let goal = next == self.w * self.h - 1;
        self.cell = next;
        self.steps += 1;
        self.terminal = goal || self.steps >= self.max_steps;
        Ok(Step {
            state: self.observe(),
            reward: if goal { 1.0 } else { 0.0 },
            terminal: self.terminal,
        })
    }
}
