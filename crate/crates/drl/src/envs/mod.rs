//! Environments and the action-delay machinery.
//!
//! Single-agent environments implement [`Environment`]; the two-player
//! mini-melee game implements [`TwoPlayerEnv`]. Delay is layered on top by
//! [`DelayedEnv`] / [`TwoPlayerDelayed`], which hold the pending-action
//! queues and the frame skip.

mod chain;
mod delay;
mod gridworld;
mod mini_melee;
mod mountain_car;

pub use chain::Chain;
pub(crate) use chain::chain_next as chain_transition;
pub(crate) use gridworld::grid_transitions as gridworld_transition_dist;
pub use delay::{
    reaction_time_ms, DelayQueue, DelayedEnv, DelayedStep, ReactionTime, TwoPlayerDelayed,
    TwoPlayerDelayedStep,
};
pub use gridworld::Gridworld;
pub use mini_melee::{MiniMelee, Mm1Config, PlayerSide, MM1_VERSION};
pub use mountain_car::MountainCar;

use crate::error::{DrlError, Result};
use crate::state::{Action, MixedState, StateSchema};
use rand_chacha::ChaCha8Rng;

/// One transition of a single-agent environment.
#[derive(Debug, Clone)]
pub struct Step {
    pub state: MixedState,
    pub reward: f64,
    pub terminal: bool,
}

/// One transition of a two-player environment. Observations and rewards are
/// per player; the game is zero-sum, so `rewards.1 == -rewards.0`.
#[derive(Debug, Clone)]
pub struct TwoStep {
    pub obs: (MixedState, MixedState),
    pub rewards: (f64, f64),
    pub terminal: bool,
}

/// A single-agent environment. Deterministic given the generator passed to
/// `reset`: all episode randomness is derived from it.
pub trait Environment {
    fn schema(&self) -> &StateSchema;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> MixedState;
    /// Stepping a terminal environment is a contract violation.
    fn step(&mut self, action: Action) -> Result<Step>;
}

/// A simultaneous-move two-player environment. Both players share one action
/// set and one per-player observation schema.
pub trait TwoPlayerEnv {
    fn schema(&self) -> &StateSchema;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> (MixedState, MixedState);
    fn step(&mut self, a: Action, b: Action) -> Result<TwoStep>;
}

/// Parameters accepted by [`make_env`]. Unused fields are ignored by the
/// environments that do not need them.
#[derive(Debug, Clone)]
pub struct EnvParams {
    pub chain_n: usize,
    pub grid_w: usize,
    pub grid_h: usize,
    pub grid_slip: f64,
    pub max_steps: usize,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            chain_n: 5,
            grid_w: 4,
            grid_h: 3,
            grid_slip: 0.0,
            max_steps: 1000,
        }
    }
}

/// A constructed environment of either arity.
pub enum EnvKind {
    Single(Box<dyn Environment + Send>),
    Two(Box<dyn TwoPlayerEnv + Send>),
}

/// Environment factory. Names: `chain`, `gridworld`, `mountaincar`,
/// `minimelee`.
pub fn make_env(name: &str, params: &EnvParams, rng: &mut ChaCha8Rng) -> Result<EnvKind> {
    let _ = rng; // construction itself is deterministic; randomness enters at reset
    match name {
        "chain" => Ok(EnvKind::Single(Box::new(Chain::new(
            params.chain_n,
            params.max_steps,
        )))),
        "gridworld" => Ok(EnvKind::Single(Box::new(Gridworld::new(
            params.grid_w,
            params.grid_h,
            params.grid_slip,
            params.max_steps,
        )?))),
        "mountaincar" => Ok(EnvKind::Single(Box::new(MountainCar::new(
            params.max_steps,
        )))),
        "minimelee" => Ok(EnvKind::Two(Box::new(MiniMelee::new(Mm1Config {
            max_steps: params.max_steps,
            ..Mm1Config::default()
        })))),
        other => Err(DrlError::usage(format!(
            "unknown environment '{other}' (expected chain|gridworld|mountaincar|minimelee)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn factory_names() {
        let mut rng = RngStream::new(0, 0).rng();
        let p = EnvParams::default();
        assert!(matches!(
            make_env("chain", &p, &mut rng),
            Ok(EnvKind::Single(_))
        ));
        assert!(matches!(
            make_env("minimelee", &p, &mut rng),
            Ok(EnvKind::Two(_))
        ));
        assert!(matches!(
            make_env("nope", &p, &mut rng),
            Err(DrlError::Usage(_))
        ));
    }

    #[test]
    fn chain_factory_matches_params() {
        let mut rng = RngStream::new(0, 0).rng();
        let p = EnvParams {
            chain_n: 5,
            ..Default::default()
        };
        if let Ok(EnvKind::Single(mut env)) = make_env("chain", &p, &mut rng) {
            assert_eq!(env.schema().categorical_cards, vec![5]);
            assert_eq!(env.n_actions(), 2);
            let s = env.reset(&mut rng);
            assert_eq!(s.categorical[0].index, 0);
        } else {
            panic!("chain should be a single-agent env");
        }
    }

    #[test]
    fn minimelee_schema_shape() {
        let mut rng = RngStream::new(0, 0).rng();
        if let Ok(EnvKind::Two(env)) = make_env("minimelee", &EnvParams::default(), &mut rng) {
            assert_eq!(env.schema().n_continuous, 8);
            assert_eq!(env.schema().categorical_cards, vec![6, 6]);
            assert_eq!(env.n_actions(), 5);
        } else {
            panic!("minimelee should be a two-player env");
        }
    }
}
