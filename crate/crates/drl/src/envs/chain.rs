//! Deterministic chain world: N states in a line, start at the left end,
//! reward 1 on entering the rightmost (absorbing) state. The smallest
//! oracle-checkable delayed MDP.

use super::{Environment, Step};
use crate::error::{DrlError, Result};
use crate::state::{Action, CatValue, MixedState, StateSchema};
use rand_chacha::ChaCha8Rng;

pub struct Chain {
    n: usize,
    schema: StateSchema,
    pos: usize,
    steps: usize,
    max_steps: usize,
    terminal: bool,
    started: bool,
}

/// Pure transition function shared with the tabular oracle builder.
/// Actions: 0 = left, 1 = right. Walls clamp. Returns (next, reward,
/// entered_goal).
pub(crate) fn chain_next(n: usize, s: usize, a: usize) -> (usize, f64, bool) {
    debug_assert!(s < n && a < 2);
    let next = match a {
        0 => s.saturating_sub(1),
        _ => (s + 1).min(n - 1),
    };
    let entered_goal = next == n - 1 && s != n - 1;
    (next, if entered_goal { 1.0 } else { 0.0 }, entered_goal)
}

impl Chain {
    pub fn new(n: usize, max_steps: usize) -> Self {
        assert!(n >= 2, "chain needs at least two states");
        Chain {
            n,
            schema: StateSchema::new(1, vec![n]),
            pos: 0,
            steps: 0,
            max_steps,
            terminal: false,
            started: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn observe(&self) -> MixedState {
        MixedState::new(
            vec![self.pos as f64 / (self.n - 1) as f64],
            vec![CatValue::new(self.n, self.pos)],
        )
    }
}

impl Environment for Chain {
    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> MixedState {
        self.pos = 0;
        self.steps = 0;
        self.terminal = false;
        self.started = true;
        self.observe()
    }

    fn step(&mut self, action: Action) -> Result<Step> {
        if !self.started || self.terminal {
            return Err(DrlError::contract("step on terminal chain".to_string()));
        }
        if action.index() >= 2 {
            return Err(DrlError::contract(format!(
                "chain action {} out of range",
                action.index()
            )));
        }
        let (next, reward, goal) = chain_next(self.n, self.pos, action.index());
        self.pos = next;
        self.steps += 1;
        self.terminal = goal || self.steps >= self.max_steps;
        Ok(Step {
            state: self.observe(),
            reward,
            terminal: self.terminal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn walk_right_to_goal() {
        let mut env = Chain::new(5, 100);
        let mut rng = RngStream::new(0, 0).rng();
        env.reset(&mut rng);
        for i in 0..4 {
            let step = env.step(Action(1)).unwrap();
            assert_eq!(step.state.categorical[0].index, i + 1);
            if i < 3 {
                assert_eq!(step.reward, 0.0);
                assert!(!step.terminal);
            } else {
                assert_eq!(step.reward, 1.0);
                assert!(step.terminal);
            }
        }
        assert!(env.step(Action(0)).is_err());
    }

    #[test]
    fn left_wall_clamps() {
        let mut env = Chain::new(3, 100);
        let mut rng = RngStream::new(0, 0).rng();
        env.reset(&mut rng);
        let step = env.step(Action(0)).unwrap();
        assert_eq!(step.state.categorical[0].index, 0);
        assert_eq!(step.reward, 0.0);
    }

    #[test]
    fn truncates_at_max_steps() {
        let mut env = Chain::new(5, 3);
        let mut rng = RngStream::new(0, 0).rng();
        env.reset(&mut rng);
        env.step(Action(0)).unwrap();
        env.step(Action(0)).unwrap();
        let s = env.step(Action(0)).unwrap();
        assert!(s.terminal);
    }
}
