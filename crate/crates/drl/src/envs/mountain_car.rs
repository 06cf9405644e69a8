//! Classic one-dimensional mountain car. Actions: 0 = coast, 1 = push left,
//! 2 = push right. Reward −1 per step until the car reaches the right hill.

use super::{Environment, Step};
use crate::error::{DrlError, Result};
use crate::state::{Action, MixedState, StateSchema};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const POS_MIN: f64 = -1.2;
const POS_MAX: f64 = 0.6;
const VEL_MAX: f64 = 0.07;
const GOAL: f64 = 0.5;
const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;

pub struct MountainCar {
    schema: StateSchema,
    pos: f64,
    vel: f64,
    steps: usize,
    max_steps: usize,
    terminal: bool,
    started: bool,
}

impl MountainCar {
    pub fn new(max_steps: usize) -> Self {
        MountainCar {
            schema: StateSchema::new(2, vec![]),
            pos: -0.5,
            vel: 0.0,
            steps: 0,
            max_steps,
            terminal: false,
            started: false,
        }
    }

    fn observe(&self) -> MixedState {
        MixedState::new(vec![self.pos, self.vel], vec![])
    }
}

impl Environment for MountainCar {
    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> MixedState {
        self.pos = rng.gen_range(-0.6..-0.4);
        self.vel = 0.0;
        self.steps = 0;
        self.terminal = false;
        self.started = true;
        self.observe()
    }

    fn step(&mut self, action: Action) -> Result<Step> {
        if !self.started || self.terminal {
            return Err(DrlError::contract(
                "step on terminal mountain car".to_string(),
            ));
        }
        let force = match action.index() {
            0 => 0.0,
            1 => -1.0,
            2 => 1.0,
            a => {
                return Err(DrlError::contract(format!(
                    "mountain car action {a} out of range"
                )))
            }
        };
        self.vel = (self.vel + force * FORCE - (3.0 * self.pos).cos() * GRAVITY)
            .clamp(-VEL_MAX, VEL_MAX);
        self.pos = (self.pos + self.vel).clamp(POS_MIN, POS_MAX);
        if self.pos <= POS_MIN && self.vel < 0.0 {
            self.vel = 0.0;
        }
        self.steps += 1;
        let reached = self.pos >= GOAL;
        self.terminal = reached || self.steps >= self.max_steps;
        Ok(Step {
            state: self.observe(),
            reward: -1.0,
            terminal: self.terminal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn coasting_rolls_downhill() {
        let mut env = MountainCar::new(1000);
        let mut rng = RngStream::new(2, 0).rng();
        let s0 = env.reset(&mut rng);
        let s1 = env.step(Action(0)).unwrap();
        // From the left slope the car accelerates toward the valley.
        assert!(s1.state.continuous[1] != 0.0);
        assert!(s0.continuous[0] > POS_MIN && s0.continuous[0] < 0.0);
    }

    #[test]
    fn oscillation_with_pumping_reaches_goal() {
        let mut env = MountainCar::new(10_000);
        let mut rng = RngStream::new(7, 0).rng();
        let mut s = env.reset(&mut rng);
        // Bang-bang energy pumping: push in the direction of motion.
        for _ in 0..10_000 {
            let v = s.continuous[1];
            let a = if v >= 0.0 { 2 } else { 1 };
            let step = env.step(Action(a)).unwrap();
            s = step.state;
            if step.terminal {
                assert!(s.continuous[0] >= GOAL, "terminated before goal");
                return;
            }
        }
        panic!("never terminated");
    }
}
