//! Fixed-length trajectory windows emitted by actors and consumed by the
//! learner. Windows never cross episode boundaries; the final state and its
//! terminal flag carry what the learner needs for bootstrapping.

use crate::error::{DrlError, Result};
use crate::state::{Action, MixedState};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TrajStep {
    /// Observed state s_t.
    pub state: MixedState,
    /// Pending-action queue as observed at decision time, oldest first.
    pub queue: Vec<Action>,
    /// Action chosen at t (enters the queue).
    pub chosen: Action,
    /// Action executed at t (left the queue d steps after being chosen).
    pub executed: Action,
    /// Reward collected at t, summed over skipped frames.
    pub reward: f64,
    /// log π_behavior(chosen | input) at collection time.
    pub behavior_logp: f64,
    /// Predictor hidden state before consuming s_t.
    pub hidden: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub steps: Vec<TrajStep>,
    /// State reached after the last step.
    pub final_state: MixedState,
    /// True when `final_state` ended the episode (no bootstrapping).
    pub terminal: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks the delay bookkeeping: within the window, executed(t) equals
    /// chosen(t−d); before that it equals the corresponding entry of the
    /// first observed queue snapshot.
    pub fn validate_alignment(&self, d: usize) -> Result<()> {
        for (t, step) in self.steps.iter().enumerate() {
            if step.queue.len() != d {
                return Err(DrlError::contract(format!(
                    "step {t}: queue length {} != d = {d}",
                    step.queue.len()
                )));
            }
            let expect = if t >= d {
                self.steps[t - d].chosen
            } else {
                self.steps[0].queue[t]
            };
            if step.executed != expect {
                return Err(DrlError::contract(format!(
                    "step {t}: executed {:?} but the queue says {:?}",
                    step.executed, expect
                )));
            }
            if !step.behavior_logp.is_finite() {
                return Err(DrlError::contract(format!(
                    "step {t}: non-finite behavior log-prob"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::CatValue;

    fn state() -> MixedState {
        MixedState::new(vec![0.0], vec![CatValue::new(3, 0)])
    }

    fn step(queue: Vec<usize>, chosen: usize, executed: usize) -> TrajStep {
        TrajStep {
            state: state(),
            queue: queue.into_iter().map(Action).collect(),
            chosen: Action(chosen),
            executed: Action(executed),
            reward: 0.0,
            behavior_logp: -0.5,
            hidden: vec![],
        }
    }

    #[test]
    fn alignment_accepts_consistent_window() {
        // d = 2, initial queue [7, 8], choices 1, 2, 3, 4.
        let traj = Trajectory {
            steps: vec![
                step(vec![7, 8], 1, 7),
                step(vec![8, 1], 2, 8),
                step(vec![1, 2], 3, 1),
                step(vec![2, 3], 4, 2),
            ],
            final_state: state(),
            terminal: false,
        };
        traj.validate_alignment(2).unwrap();
    }

    #[test]
    fn alignment_rejects_swapped_execution() {
        let traj = Trajectory {
            steps: vec![step(vec![7, 8], 1, 8)],
            final_state: state(),
            terminal: false,
        };
        assert!(traj.validate_alignment(2).is_err());
    }
}
