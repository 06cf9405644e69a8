//! Domain state types shared by every environment, model, and agent.
//!
//! Environments deal in concrete [`MixedState`]s (hard categorical indices);
//! the predictive model deals in [`StateDistribution`]s (categorical slots as
//! logits). The boundary between the two is exactly [`lift`] /
//! [`decode_hard`].

use crate::error::{DrlError, Result};
use serde::{Deserialize, Serialize};

/// Logit magnitude used when embedding a concrete state as a degenerate
/// distribution: +L on the true class, -L elsewhere. Softmax of a 2-way slot
/// at L = 10 puts ~0.9999998 on the true class.
pub const LIFT_LOGIT: f64 = 10.0;

/// One categorical feature value together with its declared cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatValue {
    pub card: usize,
    pub index: usize,
}

impl CatValue {
    pub fn new(card: usize, index: usize) -> Self {
        CatValue { card, index }
    }
}

/// Environment state split into continuous features and categorical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedState {
    pub continuous: Vec<f64>,
    pub categorical: Vec<CatValue>,
}

impl MixedState {
    pub fn new(continuous: Vec<f64>, categorical: Vec<CatValue>) -> Self {
        MixedState {
            continuous,
            categorical,
        }
    }

    /// Checks this state against `schema`: lengths, cardinalities, index
    /// bounds, and finiteness of the continuous block.
    pub fn validate(&self, schema: &StateSchema) -> Result<()> {
        if self.continuous.len() != schema.n_continuous {
            return Err(DrlError::contract(format!(
                "continuous length {} does not match schema ({})",
                self.continuous.len(),
                schema.n_continuous
            )));
        }
        if self.categorical.len() != schema.categorical_cards.len() {
            return Err(DrlError::contract(format!(
                "categorical slot count {} does not match schema ({})",
                self.categorical.len(),
                schema.categorical_cards.len()
            )));
        }
        for (slot, (cv, &card)) in self
            .categorical
            .iter()
            .zip(&schema.categorical_cards)
            .enumerate()
        {
            if cv.card != card {
                return Err(DrlError::contract(format!(
                    "slot {slot} cardinality {} does not match schema ({card})",
                    cv.card
                )));
            }
            if cv.index >= cv.card {
                return Err(DrlError::contract(format!(
                    "slot {slot} index {} out of range for cardinality {}",
                    cv.index, cv.card
                )));
            }
        }
        if let Some(v) = self.continuous.iter().find(|v| !v.is_finite()) {
            return Err(DrlError::contract(format!(
                "non-finite continuous value {v}"
            )));
        }
        Ok(())
    }
}

/// Shape of an environment's state: fixed for the environment's lifetime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSchema {
    pub n_continuous: usize,
    pub categorical_cards: Vec<usize>,
}

impl StateSchema {
    pub fn new(n_continuous: usize, categorical_cards: Vec<usize>) -> Self {
        assert!(
            categorical_cards.iter().all(|&c| c >= 2),
            "categorical cardinalities must be at least 2"
        );
        StateSchema {
            n_continuous,
            categorical_cards,
        }
    }

    /// Length of the flat encoding: continuous block plus one one-hot block
    /// per categorical slot. Identical to the value-vector length.
    pub fn encoded_len(&self) -> usize {
        self.n_continuous + self.categorical_cards.iter().sum::<usize>()
    }
}

/// Discrete action, an index into the owning environment's action set.
/// Index 0 is the designated queue-filler ("no-op") in every environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action(pub usize);

impl Action {
    pub const NOOP: Action = Action(0);

    pub fn index(self) -> usize {
        self.0
    }
}

/// Predicted state: continuous components as means, categorical components as
/// per-slot logit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub continuous_mean: Vec<f64>,
    pub categorical_logits: Vec<Vec<f64>>,
}

impl StateDistribution {
    pub fn validate(&self, schema: &StateSchema) -> Result<()> {
        if self.continuous_mean.len() != schema.n_continuous
            || self.categorical_logits.len() != schema.categorical_cards.len()
            || self
                .categorical_logits
                .iter()
                .zip(&schema.categorical_cards)
                .any(|(l, &c)| l.len() != c)
        {
            return Err(DrlError::contract(
                "state distribution shape does not match schema".to_string(),
            ));
        }
        let finite = self.continuous_mean.iter().all(|v| v.is_finite())
            && self
                .categorical_logits
                .iter()
                .all(|l| l.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(DrlError::contract(
                "non-finite value in state distribution".to_string(),
            ));
        }
        Ok(())
    }

    /// The vector the residual model does arithmetic on: continuous means
    /// followed by raw logits, slot by slot.
    pub fn value_vec(&self) -> Vec<f64> {
        let mut v = self.continuous_mean.clone();
        for logits in &self.categorical_logits {
            v.extend_from_slice(logits);
        }
        v
    }

    /// Inverse of [`value_vec`](Self::value_vec) given the schema.
    pub fn from_value_vec(schema: &StateSchema, v: &[f64]) -> Self {
        debug_assert_eq!(v.len(), schema.encoded_len());
        let continuous_mean = v[..schema.n_continuous].to_vec();
        let mut categorical_logits = Vec::with_capacity(schema.categorical_cards.len());
        let mut off = schema.n_continuous;
        for &card in &schema.categorical_cards {
            categorical_logits.push(v[off..off + card].to_vec());
            off += card;
        }
        StateDistribution {
            continuous_mean,
            categorical_logits,
        }
    }
}

/// Flat feature encoding: raw continuous values followed by exact one-hot
/// blocks. Input layout for every network in the crate.
pub fn encode(state: &MixedState, schema: &StateSchema) -> Result<Vec<f64>> {
    state.validate(schema)?;
    let mut out = Vec::with_capacity(schema.encoded_len());
    out.extend_from_slice(&state.continuous);
    for cv in &state.categorical {
        let start = out.len();
        out.resize(start + cv.card, 0.0);
        out[start + cv.index] = 1.0;
    }
    Ok(out)
}

/// Soft encoding of a predicted state: continuous means followed by softmax
/// probabilities per slot. Same length as [`encode`]; keeps the unroll
/// differentiable where `encode` of an argmax would not be.
pub fn encode_soft(dist: &StateDistribution, schema: &StateSchema) -> Result<Vec<f64>> {
    dist.validate(schema)?;
    let mut out = Vec::with_capacity(schema.encoded_len());
    out.extend_from_slice(&dist.continuous_mean);
    for logits in &dist.categorical_logits {
        out.extend_from_slice(&crate::nn::softmax(logits));
    }
    Ok(out)
}

/// Collapses a predicted state to a concrete one: continuous copied verbatim,
/// each categorical slot replaced by the argmax of its logits. Ties break
/// toward the lowest index.
pub fn decode_hard(dist: &StateDistribution, schema: &StateSchema) -> Result<MixedState> {
    dist.validate(schema)?;
    let categorical = dist
        .categorical_logits
        .iter()
        .map(|logits| {
            let mut best = 0;
            for (i, &v) in logits.iter().enumerate() {
                if v > logits[best] {
                    best = i;
                }
            }
            CatValue::new(logits.len(), best)
        })
        .collect();
    Ok(MixedState {
        continuous: dist.continuous_mean.clone(),
        categorical,
    })
}

/// Embeds a concrete state as a degenerate distribution: logit +L on the true
/// class and -L elsewhere, continuous copied. `decode_hard(lift(s)) == s`.
pub fn lift(state: &MixedState, schema: &StateSchema) -> Result<StateDistribution> {
    state.validate(schema)?;
    let categorical_logits = state
        .categorical
        .iter()
        .map(|cv| {
            let mut logits = vec![-LIFT_LOGIT; cv.card];
            logits[cv.index] = LIFT_LOGIT;
            logits
        })
        .collect();
    Ok(StateDistribution {
        continuous_mean: state.continuous.clone(),
        categorical_logits,
    })
}
