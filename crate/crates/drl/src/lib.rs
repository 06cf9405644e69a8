//! Reinforcement learning under constant action delay.
//!
//! The crate is organized around a delay-queue environment wrapper, a
//! residual action-conditional predictive model that estimates the state an
//! action will actually be executed in, a delayed-return actor-critic with
//! V-trace off-policy correction, and exact tabular oracles used to validate
//! the neural pipeline on small MDPs.

pub mod agents;
pub mod checkpoint;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod predictor;
pub mod rng;
pub mod state;
pub mod tabular;

pub use error::DrlError;
pub use rng::RngStream;
pub use state::{Action, MixedState, StateDistribution, StateSchema};
