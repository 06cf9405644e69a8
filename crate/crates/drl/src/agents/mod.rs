//! Policies and learning rules: the augmented-state (non-predictive) agent,
//! the (d, p) predictive agent, delayed returns, the true-state critic, and
//! the V-trace-corrected actor-critic update.

mod learner;
mod trajectory;
mod vtrace;

pub use learner::{
    compute_targets, learner_update, loss_given_targets, LearnerMetrics, Targets, TrajTargets,
};
pub use trajectory::{TrajStep, Trajectory};
pub use vtrace::{delayed_returns, n_step_returns, vtrace_targets, VtraceOut};

use crate::error::{DrlError, Result};
use crate::nn::{fan_in_uniform, log_softmax, Activation, DenseLayer, Flatten, Mlp, MlpGrad};
use crate::predictor::{PredictiveModel, PredictorGrad, RolloutCache};
use crate::state::{encode, Action, MixedState, StateDistribution, StateSchema};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Full (d, p, f) agent configuration plus learning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Action delay in agent steps.
    pub d: usize,
    /// Predictive-model unroll steps consumed from the queue, 0 ≤ p ≤ d.
    pub p: usize,
    /// Environment frames per agent step.
    pub frame_skip: usize,
    pub gamma: f64,
    pub rho_bar: f64,
    pub c_bar: f64,
    pub entropy_weight: f64,
    pub value_loss_weight: f64,
    pub model_loss_weight: f64,
    /// Trajectory window length T; must exceed d.
    pub unroll_len: usize,
    /// Model-regression unroll K.
    pub model_unroll: usize,
    pub gru_hidden: usize,
    pub head_hidden: usize,
    pub trunk_hidden: usize,
    pub trunk_layers: usize,
    pub learning_rate: f64,
    pub grad_clip: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            d: 0,
            p: 0,
            frame_skip: 1,
            gamma: 0.99,
            rho_bar: 1.0,
            c_bar: 1.0,
            entropy_weight: 0.01,
            value_loss_weight: 0.5,
            model_loss_weight: 1.0,
            unroll_len: 40,
            model_unroll: 1,
            gru_hidden: 128,
            head_hidden: 128,
            trunk_hidden: 128,
            trunk_layers: 2,
            learning_rate: 1e-4,
            grad_clip: 5.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p > self.d {
            return Err(DrlError::contract(format!(
                "p = {} must not exceed d = {}",
                self.p, self.d
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(DrlError::contract(format!(
                "gamma {} outside [0, 1)",
                self.gamma
            )));
        }
        if !(self.rho_bar >= self.c_bar && self.c_bar > 0.0) {
            return Err(DrlError::contract(format!(
                "clips must satisfy rho_bar >= c_bar > 0, got ({}, {})",
                self.rho_bar, self.c_bar
            )));
        }
        if self.unroll_len <= self.d {
            return Err(DrlError::contract(format!(
                "unroll T = {} must exceed d = {}",
                self.unroll_len, self.d
            )));
        }
        if self.frame_skip == 0 || self.model_unroll == 0 {
            return Err(DrlError::contract(
                "frame_skip and model_unroll must be >= 1".to_string(),
            ));
        }
        Ok(())
    }

    /// A small-network variant used by tests and desk-scale experiments.
    pub fn small(d: usize, p: usize) -> Self {
        AgentConfig {
            d,
            p,
            model_unroll: p.max(1),
            gru_hidden: 16,
            head_hidden: 24,
            trunk_hidden: 32,
            trunk_layers: 2,
            ..AgentConfig::default()
        }
    }
}

/// Policy, value, and predictive-model parameters for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentNets {
    pub schema: StateSchema,
    pub n_actions: usize,
    pub policy: Mlp,
    pub value: Mlp,
    pub predictor: PredictiveModel,
}

#[derive(Debug, Clone)]
pub struct AgentGrads {
    pub policy: MlpGrad,
    pub value: MlpGrad,
    pub predictor: PredictorGrad,
}

fn trunk(
    in_dim: usize,
    hidden: usize,
    layers: usize,
    out_dim: usize,
    out_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Mlp {
    let mut stack = Vec::with_capacity(layers + 1);
    let mut cur = in_dim;
    for _ in 0..layers {
        stack.push(DenseLayer {
            w: fan_in_uniform(hidden, cur, rng),
            b: vec![0.0; hidden],
            act: Activation::Tanh,
        });
        cur = hidden;
    }
    let mut out = DenseLayer {
        w: fan_in_uniform(out_dim, cur, rng),
        b: vec![0.0; out_dim],
        act: Activation::Identity,
    };
    for v in &mut out.w.data {
        *v *= out_scale;
    }
    stack.push(out);
    Mlp { layers: stack }
}

impl AgentNets {
    pub fn init(
        schema: StateSchema,
        n_actions: usize,
        cfg: &AgentConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let enc = schema.encoded_len();
        let policy_in = enc + (cfg.d - cfg.p) * n_actions;
        Ok(AgentNets {
            predictor: PredictiveModel::init(
                schema.clone(),
                n_actions,
                cfg.gru_hidden,
                cfg.head_hidden,
                rng,
            ),
            // A damped final layer keeps the initial policy near uniform.
            policy: trunk(
                policy_in,
                cfg.trunk_hidden,
                cfg.trunk_layers,
                n_actions,
                0.01,
                rng,
            ),
            value: trunk(enc, cfg.trunk_hidden, cfg.trunk_layers, 1, 1.0, rng),
            schema,
            n_actions,
        })
    }

    pub fn zero_grad(&self) -> AgentGrads {
        AgentGrads {
            policy: self.policy.zero_grad(),
            value: self.value.zero_grad(),
            predictor: self.predictor.zero_grad(),
        }
    }

    pub fn zero_hidden(&self) -> Vec<f64> {
        self.predictor.zero_hidden()
    }
}

impl Flatten for AgentNets {
    fn flat_len(&self) -> usize {
        self.policy.flat_len() + self.value.flat_len() + self.predictor.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.policy.write_flat(out);
        self.value.write_flat(out);
        self.predictor.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.policy.read_flat(src, pos);
        self.value.read_flat(src, pos);
        self.predictor.read_flat(src, pos);
    }
}

impl Flatten for AgentGrads {
    fn flat_len(&self) -> usize {
        self.policy.flat_len() + self.value.flat_len() + self.predictor.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.policy.write_flat(out);
        self.value.write_flat(out);
        self.predictor.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.policy.read_flat(src, pos);
        self.value.read_flat(src, pos);
        self.predictor.read_flat(src, pos);
    }
}

/// Cached forward state of one policy-input construction, consumed by the
/// learner's backward pass.
pub(crate) struct PolicyInputCache {
    pub x: Vec<f64>,
    /// Present when p > 0.
    pub rollout: Option<RolloutCache>,
    /// Softmax probabilities per slot of the final predicted distribution
    /// (the soft encoding fed to the policy), when p > 0.
    pub final_probs: Vec<Vec<f64>>,
    pub final_dist: Option<StateDistribution>,
}

/// Builds the policy input for a decision: the predictive agent rolls the
/// model over the p oldest queued actions and feeds the soft-encoded
/// prediction plus the d−p newest queued actions (one-hot, newest last); the
/// p = 0 agent feeds the raw state plus the whole queue (the augmented
/// approach). Returns the advanced recurrent hidden as well.
pub(crate) fn policy_input(
    nets: &AgentNets,
    cfg: &AgentConfig,
    state: &MixedState,
    queue: &[Action],
    hidden: &[f64],
) -> Result<(PolicyInputCache, Vec<f64>)> {
    if queue.len() != cfg.d {
        return Err(DrlError::contract(format!(
            "queue length {} does not match delay {}",
            queue.len(),
            cfg.d
        )));
    }
    let onehot_tail = |x: &mut Vec<f64>, actions: &[Action]| {
        for a in actions {
            let start = x.len();
            x.resize(start + nets.n_actions, 0.0);
            x[start + a.index()] = 1.0;
        }
    };
    if cfg.p == 0 {
        let mut x = encode(state, &nets.schema)?;
        onehot_tail(&mut x, queue);
        let new_hidden = nets.predictor.advance_hidden(state, hidden)?;
        Ok((
            PolicyInputCache {
                x,
                rollout: None,
                final_probs: Vec::new(),
                final_dist: None,
            },
            new_hidden,
        ))
    } else {
        let (ps, cache) = nets
            .predictor
            .rollout(state, hidden, &queue[..cfg.p], cfg.d)?;
        let final_probs: Vec<Vec<f64>> = ps
            .dist
            .categorical_logits
            .iter()
            .map(|l| crate::nn::softmax(l))
            .collect();
        let mut x = ps.dist.continuous_mean.clone();
        for p in &final_probs {
            x.extend_from_slice(p);
        }
        onehot_tail(&mut x, &queue[cfg.p..]);
        let new_hidden = cache.hiddens[1].clone();
        Ok((
            PolicyInputCache {
                x,
                rollout: Some(cache),
                final_probs,
                final_dist: Some(ps.dist),
            },
            new_hidden,
        ))
    }
}

/// One acting decision.
#[derive(Debug, Clone)]
pub struct ActOutput {
    pub action: Action,
    pub logp: f64,
    pub new_hidden: Vec<f64>,
    /// The predicted state the policy saw (p > 0 only), for introspection.
    pub predicted: Option<StateDistribution>,
}

/// Samples an action from the policy softmax.
pub fn act(
    nets: &AgentNets,
    cfg: &AgentConfig,
    state: &MixedState,
    queue: &[Action],
    hidden: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<ActOutput> {
    let (cache, new_hidden) = policy_input(nets, cfg, state, queue, hidden)?;
    let (logits, _) = nets.policy.forward(&cache.x)?;
    let logp = log_softmax(&logits);
    let action = sample_from_logp(&logp, rng);
    Ok(ActOutput {
        action,
        logp: logp[action.index()],
        new_hidden,
        predicted: cache.final_dist,
    })
}

/// Greedy (argmax) variant used in evaluation logging; ties to lowest index.
pub fn act_greedy(
    nets: &AgentNets,
    cfg: &AgentConfig,
    state: &MixedState,
    queue: &[Action],
    hidden: &[f64],
) -> Result<ActOutput> {
    let (cache, new_hidden) = policy_input(nets, cfg, state, queue, hidden)?;
    let (logits, _) = nets.policy.forward(&cache.x)?;
    let logp = log_softmax(&logits);
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    Ok(ActOutput {
        action: Action(best),
        logp: logp[best],
        new_hidden,
        predicted: cache.final_dist,
    })
}

fn sample_from_logp(logp: &[f64], rng: &mut ChaCha8Rng) -> Action {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return Action(i);
        }
    }
    Action(logp.len() - 1)
}

/// Forward-only value of the critic at a true state.
pub fn state_value(nets: &AgentNets, state: &MixedState) -> Result<f64> {
    let x = encode(state, &nets.schema)?;
    let (v, _) = nets.value.forward(&x)?;
    Ok(v[0])
}
