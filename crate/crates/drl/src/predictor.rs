//! The residual action-conditional predictive model.
//!
//! One step computes P(s, a) = F(s, a) ⊙ (s + D(s, a)) + (1 − F(s, a)) ⊙ N(s, a)
//! componentwise over the state's value vector: continuous components in raw
//! space, categorical components in logit space. The delta head D adjusts the
//! previous state, the new head N constructs a replacement, and the forget
//! head F (sigmoid outputs in [0, 1]) interpolates between them. All three
//! heads sit on a shared GRU core and receive (soft-encoded state, one-hot
//! action, core output).
//!
//! Unrolling the step over the pending-action queue yields an estimate of the
//! state the current decision will actually be executed in. During the unroll
//! the next core input is the predicted distribution soft-encoded (softmax
//! probabilities, not argmax), which keeps the whole rollout differentiable;
//! hard decoding happens only at the policy boundary.

use crate::error::{DrlError, Result};
use crate::nn::{
    softmax, softmax_backward, Flatten, GruCache, GruCell, GruGrad, Mlp, MlpCache, MlpGrad,
};
use crate::state::{
    encode_soft, lift, Action, MixedState, StateDistribution, StateSchema,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveModel {
    pub schema: StateSchema,
    pub n_actions: usize,
    pub gru: GruCell,
    pub delta_head: Mlp,
    pub new_head: Mlp,
    pub forget_head: Mlp,
}

/// Rolling prediction state: the current distribution estimate and the GRU
/// hidden that produced it.
#[derive(Debug, Clone)]
pub struct PredictorState {
    pub dist: StateDistribution,
    pub hidden: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PredictorGrad {
    pub gru: GruGrad,
    pub delta_head: MlpGrad,
    pub new_head: MlpGrad,
    pub forget_head: MlpGrad,
}

/// Everything needed to run the backward pass of one predict step.
pub struct PredictStepCache {
    enc: Vec<f64>,
    /// Softmax probabilities per categorical slot of the input distribution.
    probs: Vec<Vec<f64>>,
    sv: Vec<f64>,
    gru: GruCache,
    delta: MlpCache,
    new: MlpCache,
    forget: MlpCache,
    d_out: Vec<f64>,
    n_out: Vec<f64>,
    f_out: Vec<f64>,
}

pub struct RolloutCache {
    pub steps: Vec<PredictStepCache>,
    /// h_{t,0} .. h_{t,p}; index 1 is the hidden after consuming the true
    /// state, which is what the actor carries forward in time.
    pub hiddens: Vec<Vec<f64>>,
}

impl PredictiveModel {
    pub fn init(
        schema: StateSchema,
        n_actions: usize,
        gru_hidden: usize,
        head_hidden: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Self {
        use crate::nn::{fan_in_uniform, orthogonal, Activation, DenseLayer};
        let enc = schema.encoded_len();
        let head_in = enc + n_actions + gru_hidden;
        let head = |out_act: Activation, rng: &mut rand_chacha::ChaCha8Rng| Mlp {
            layers: vec![
                DenseLayer {
                    w: fan_in_uniform(head_hidden, head_in, rng),
                    b: vec![0.0; head_hidden],
                    act: Activation::Tanh,
                },
                DenseLayer {
                    w: fan_in_uniform(enc, head_hidden, rng),
                    b: vec![0.0; enc],
                    act: out_act,
                },
            ],
        };
        let gru = GruCell {
            wz: fan_in_uniform(gru_hidden, enc, rng),
            uz: orthogonal(gru_hidden, rng),
            bz: vec![0.0; gru_hidden],
            wr: fan_in_uniform(gru_hidden, enc, rng),
            ur: orthogonal(gru_hidden, rng),
            br: vec![0.0; gru_hidden],
            wh: fan_in_uniform(gru_hidden, enc, rng),
            uh: orthogonal(gru_hidden, rng),
            bh: vec![0.0; gru_hidden],
        };
        PredictiveModel {
            schema,
            n_actions,
            gru,
            delta_head: head(Activation::Identity, rng),
            new_head: head(Activation::Identity, rng),
            forget_head: head(Activation::Sigmoid, rng),
        }
    }

    pub fn gru_hidden(&self) -> usize {
        self.gru.hidden_dim()
    }

    pub fn zero_hidden(&self) -> Vec<f64> {
        vec![0.0; self.gru.hidden_dim()]
    }

    pub fn zero_grad(&self) -> PredictorGrad {
        PredictorGrad {
            gru: self.gru.zero_grad(),
            delta_head: self.delta_head.zero_grad(),
            new_head: self.new_head.zero_grad(),
            forget_head: self.forget_head.zero_grad(),
        }
    }

    /// One prediction step conditioned on `action`.
    pub fn predict_one(
        &self,
        ps: &PredictorState,
        action: Action,
    ) -> Result<(PredictorState, PredictStepCache)> {
        if action.index() >= self.n_actions {
            return Err(DrlError::contract(format!(
                "action {} out of range ({} actions)",
                action.index(),
                self.n_actions
            )));
        }
        ps.dist.validate(&self.schema)?;
        let probs: Vec<Vec<f64>> = ps
            .dist
            .categorical_logits
            .iter()
            .map(|l| softmax(l))
            .collect();
        let mut enc = ps.dist.continuous_mean.clone();
        for p in &probs {
            enc.extend_from_slice(p);
        }

        let (hnext, gru_cache) = self.gru.step(&enc, &ps.hidden)?;
        // Core output equals the new hidden state.
        let mut head_in = Vec::with_capacity(enc.len() + self.n_actions + hnext.len());
        head_in.extend_from_slice(&enc);
        let onehot_start = head_in.len();
        head_in.resize(onehot_start + self.n_actions, 0.0);
        head_in[onehot_start + action.index()] = 1.0;
        head_in.extend_from_slice(&hnext);

        let (d_out, delta_cache) = self.delta_head.forward(&head_in)?;
        let (n_out, new_cache) = self.new_head.forward(&head_in)?;
        let (f_out, forget_cache) = self.forget_head.forward(&head_in)?;

        let sv = ps.dist.value_vec();
        let next_v: Vec<f64> = (0..sv.len())
            .map(|i| f_out[i] * (sv[i] + d_out[i]) + (1.0 - f_out[i]) * n_out[i])
            .collect();
        if next_v.iter().any(|v| !v.is_finite()) {
            return Err(DrlError::Training(
                "predictive model produced a non-finite state".to_string(),
            ));
        }
        let next = PredictorState {
            dist: StateDistribution::from_value_vec(&self.schema, &next_v),
            hidden: hnext,
        };
        Ok((
            next,
            PredictStepCache {
                enc,
                probs,
                sv,
                gru: gru_cache,
                delta: delta_cache,
                new: new_cache,
                forget: forget_cache,
                d_out,
                n_out,
                f_out,
            },
        ))
    }

    /// Backward through one step. `d_next` is the loss gradient with respect
    /// to the produced distribution in value-vector layout, `d_hidden_next`
    /// with respect to the produced hidden. Returns the gradients with
    /// respect to the input distribution (value-vector layout) and hidden.
    pub fn backward_one(
        &self,
        cache: &PredictStepCache,
        d_next: &[f64],
        d_hidden_next: &[f64],
        grad: &mut PredictorGrad,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = cache.sv.len();
        debug_assert_eq!(d_next.len(), n);

        let mut d_prev = vec![0.0; n];
        let mut df = vec![0.0; n];
        let mut dd = vec![0.0; n];
        let mut dn = vec![0.0; n];
        for i in 0..n {
            let g = d_next[i];
            df[i] = g * (cache.sv[i] + cache.d_out[i] - cache.n_out[i]);
            dd[i] = g * cache.f_out[i];
            dn[i] = g * (1.0 - cache.f_out[i]);
            // Residual path: gradient flows straight into the previous state.
            d_prev[i] = g * cache.f_out[i];
        }

        let mut d_head_in = self
            .delta_head
            .backward(&cache.delta, &dd, &mut grad.delta_head);
        let d_head_in_n = self.new_head.backward(&cache.new, &dn, &mut grad.new_head);
        let d_head_in_f = self
            .forget_head
            .backward(&cache.forget, &df, &mut grad.forget_head);
        for i in 0..d_head_in.len() {
            d_head_in[i] += d_head_in_n[i] + d_head_in_f[i];
        }

        let enc_len = cache.enc.len();
        let hid_len = d_hidden_next.len();
        let mut d_hnext = d_hidden_next.to_vec();
        // Head input layout: [enc | one-hot action | core output].
        for i in 0..hid_len {
            d_hnext[i] += d_head_in[enc_len + self.n_actions + i];
        }
        let (d_enc_gru, d_hidden_prev) = self.gru.backward(&cache.gru, &d_hnext, &mut grad.gru);

        let mut d_enc = d_enc_gru;
        for i in 0..enc_len {
            d_enc[i] += d_head_in[i];
        }

        // Soft encoding: continuous passes through, softmax slots chain.
        let n_cont = self.schema.n_continuous;
        for i in 0..n_cont {
            d_prev[i] += d_enc[i];
        }
        let mut off = n_cont;
        for probs in &cache.probs {
            let card = probs.len();
            let d_logits = softmax_backward(probs, &d_enc[off..off + card]);
            for (j, dl) in d_logits.iter().enumerate() {
                d_prev[off + j] += dl;
            }
            off += card;
        }
        (d_prev, d_hidden_prev)
    }

    /// Advances the recurrent hidden one step on an observed state without
    /// predicting; what a p = 0 agent does each environment step.
    pub fn advance_hidden(&self, state: &MixedState, hidden: &[f64]) -> Result<Vec<f64>> {
        let dist = lift(state, &self.schema)?;
        let enc = encode_soft(&dist, &self.schema)?;
        Ok(self.gru.step(&enc, hidden)?.0)
    }

    /// Unrolls the model from an observed state through `actions` (the
    /// oldest entries of the pending queue). `max_delay` is the agent's d;
    /// rolling past it is a contract violation. With no actions this is the
    /// lifted state unchanged.
    pub fn rollout(
        &self,
        state: &MixedState,
        hidden: &[f64],
        actions: &[Action],
        max_delay: usize,
    ) -> Result<(PredictorState, RolloutCache)> {
        if actions.len() > max_delay {
            return Err(DrlError::contract(format!(
                "rollout of {} steps exceeds delay {}",
                actions.len(),
                max_delay
            )));
        }
        let mut ps = PredictorState {
            dist: lift(state, &self.schema)?,
            hidden: hidden.to_vec(),
        };
        let mut steps = Vec::with_capacity(actions.len());
        let mut hiddens = vec![ps.hidden.clone()];
        for &a in actions {
            let (next, cache) = self.predict_one(&ps, a)?;
            steps.push(cache);
            hiddens.push(next.hidden.clone());
            ps = next;
        }
        Ok((ps, RolloutCache { steps, hiddens }))
    }

    /// Backward through a rollout. `d_final` is the gradient with respect to
    /// the final distribution (value-vector layout). Gradients with respect
    /// to the initial state and hidden are dropped: both are recorded
    /// trajectory data, not parameters.
    pub fn rollout_backward(
        &self,
        cache: &RolloutCache,
        d_final: &[f64],
        grad: &mut PredictorGrad,
    ) {
        let mut d_dist = d_final.to_vec();
        let mut d_hidden = vec![0.0; self.gru.hidden_dim()];
        for step in cache.steps.iter().rev() {
            let (dp, dh) = self.backward_one(step, &d_dist, &d_hidden, grad);
            d_dist = dp;
            d_hidden = dh;
        }
    }
}

/// Loss statistics for one model-regression call.
#[derive(Debug, Clone, Default)]
pub struct ModelLossStats {
    /// Mean per-(anchor, step) loss: summed squared error over continuous
    /// components plus summed cross-entropy over categorical slots.
    pub loss: f64,
    pub continuous_loss: f64,
    pub categorical_loss: f64,
    pub anchors: usize,
    /// One-step diagnostics: argmax accuracy over slots and continuous RMSE.
    pub accuracy_step1: f64,
    pub rmse_step1: f64,
    /// Raw counters behind the step-1 diagnostics, for exact aggregation
    /// across batches.
    pub acc_hits: usize,
    pub acc_total: usize,
    pub se_sum: f64,
    pub se_count: usize,
}

impl PredictiveModel {
    /// Regression loss over a trajectory segment: from every anchor t the
    /// model is unrolled K steps through the *executed* actions and each
    /// predicted state is regressed onto its true counterpart (L2 on
    /// continuous components, cross-entropy on categorical slots in logit
    /// space). Gradients through the full unroll are accumulated into `grad`
    /// scaled by `scale / K` per anchor; pass `scale` = 1/total_anchors for
    /// a mean over a batch.
    ///
    /// `states` has one more entry than `executed` and `hiddens`: the state
    /// reached after the last executed action.
    pub fn model_loss(
        &self,
        states: &[MixedState],
        hiddens: &[Vec<f64>],
        executed: &[Action],
        k: usize,
        grad: &mut PredictorGrad,
        scale: f64,
    ) -> Result<ModelLossStats> {
        let l = executed.len();
        if states.len() != l + 1 || hiddens.len() != l {
            return Err(DrlError::contract(
                "model_loss: states must be one longer than executed/hiddens".to_string(),
            ));
        }
        if k == 0 || l < k {
            return Err(DrlError::contract(format!(
                "model_loss: unroll {k} needs at least {k} transitions, got {l}"
            )));
        }
        let n_cont = self.schema.n_continuous;
        let n_slots = self.schema.categorical_cards.len();
        let mut stats = ModelLossStats::default();
        let mut acc_hits = 0usize;
        let mut acc_total = 0usize;
        let mut se_step1 = 0.0;
        let mut se_n = 0usize;

        for t in 0..=(l - k) {
            let per_step = scale / k as f64;
            let mut ps = PredictorState {
                dist: lift(&states[t], &self.schema)?,
                hidden: hiddens[t].clone(),
            };
            let mut caches = Vec::with_capacity(k);
            let mut d_losses: Vec<Vec<f64>> = Vec::with_capacity(k);
            for i in 1..=k {
                let (next, cache) = self.predict_one(&ps, executed[t + i - 1])?;
                let target = &states[t + i];

                let mut d_loss = vec![0.0; self.schema.encoded_len()];
                for c in 0..n_cont {
                    let diff = next.dist.continuous_mean[c] - target.continuous[c];
                    stats.continuous_loss += per_step * diff * diff;
                    d_loss[c] = per_step * 2.0 * diff;
                    if i == 1 {
                        se_step1 += diff * diff;
                        se_n += 1;
                    }
                }
                let mut off = n_cont;
                for slot in 0..n_slots {
                    let logits = &next.dist.categorical_logits[slot];
                    let logp = crate::nn::log_softmax(logits);
                    let truth = target.categorical[slot].index;
                    stats.categorical_loss -= per_step * logp[truth];
                    let p = softmax(logits);
                    for (j, pj) in p.iter().enumerate() {
                        let onehot = if j == truth { 1.0 } else { 0.0 };
                        d_loss[off + j] = per_step * (pj - onehot);
                    }
                    if i == 1 {
                        let argmax = logits
                            .iter()
                            .enumerate()
                            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                            .map(|(j, _)| j)
                            .unwrap();
                        if argmax == truth {
                            acc_hits += 1;
                        }
                        acc_total += 1;
                    }
                    off += logits.len();
                }
                caches.push(cache);
                d_losses.push(d_loss);
                ps = next;
            }

            // BPTT: each step's distribution feeds both its loss and the
            // next step, so gradients accumulate along the unroll.
            let mut d_dist = vec![0.0; self.schema.encoded_len()];
            let mut d_hidden = vec![0.0; self.gru.hidden_dim()];
            for i in (0..k).rev() {
                for (acc, dl) in d_dist.iter_mut().zip(&d_losses[i]) {
                    *acc += dl;
                }
                let (dp, dh) = self.backward_one(&caches[i], &d_dist, &d_hidden, grad);
                d_dist = dp;
                d_hidden = dh;
            }
            stats.anchors += 1;
        }

        stats.loss = stats.continuous_loss + stats.categorical_loss;
        if !stats.loss.is_finite() {
            return Err(DrlError::Training(
                "model regression loss diverged (non-finite)".to_string(),
            ));
        }
        stats.accuracy_step1 = if acc_total > 0 {
            acc_hits as f64 / acc_total as f64
        } else {
            1.0
        };
        stats.rmse_step1 = if se_n > 0 {
            (se_step1 / se_n as f64).sqrt()
        } else {
            0.0
        };
        stats.acc_hits = acc_hits;
        stats.acc_total = acc_total;
        stats.se_sum = se_step1;
        stats.se_count = se_n;
        Ok(stats)
    }
}

impl Flatten for PredictiveModel {
    fn flat_len(&self) -> usize {
        self.gru.flat_len()
            + self.delta_head.flat_len()
            + self.new_head.flat_len()
            + self.forget_head.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.gru.write_flat(out);
        self.delta_head.write_flat(out);
        self.new_head.write_flat(out);
        self.forget_head.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.gru.read_flat(src, pos);
        self.delta_head.read_flat(src, pos);
        self.new_head.read_flat(src, pos);
        self.forget_head.read_flat(src, pos);
    }
}

impl Flatten for PredictorGrad {
    fn flat_len(&self) -> usize {
        self.gru.flat_len()
            + self.delta_head.flat_len()
            + self.new_head.flat_len()
            + self.forget_head.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.gru.write_flat(out);
        self.delta_head.write_flat(out);
        self.new_head.write_flat(out);
        self.forget_head.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.gru.read_flat(src, pos);
        self.delta_head.read_flat(src, pos);
        self.new_head.read_flat(src, pos);
        self.forget_head.read_flat(src, pos);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::state::CatValue;

    fn schema() -> StateSchema {
        StateSchema::new(2, vec![3])
    }

    fn tiny_model(seed: u64) -> PredictiveModel {
        let mut rng = RngStream::new(seed, 0).rng();
        PredictiveModel::init(schema(), 2, 4, 5, &mut rng)
    }

    fn sample_state() -> MixedState {
        MixedState::new(vec![0.4, -0.8], vec![CatValue::new(3, 1)])
    }

    /// Forces the heads so F ≡ 1 (sigmoid saturated) and D ≡ N ≡ 0.
    fn force_identity(model: &mut PredictiveModel) {
        for head in [&mut model.delta_head, &mut model.new_head] {
            for l in &mut head.layers {
                l.w.data.iter_mut().for_each(|v| *v = 0.0);
                l.b.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        for l in &mut model.forget_head.layers {
            l.w.data.iter_mut().for_each(|v| *v = 0.0);
            l.b.iter_mut().for_each(|v| *v = 0.0);
        }
        let last = model.forget_head.layers.last_mut().unwrap();
        last.b.iter_mut().for_each(|v| *v = 40.0);
    }

    #[test]
    fn identity_parameters_exist() {
        // Constructive check: F saturated to 1 and D at 0 makes the model
        // the identity on states.
        let mut model = tiny_model(1);
        force_identity(&mut model);
        let s = sample_state();
        let ps = PredictorState {
            dist: lift(&s, &schema()).unwrap(),
            hidden: model.zero_hidden(),
        };
        let (next, _) = model.predict_one(&ps, Action(1)).unwrap();
        let sv = ps.dist.value_vec();
        let nv = next.dist.value_vec();
        for (a, b) in sv.iter().zip(&nv) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(
            crate::state::decode_hard(&next.dist, &schema()).unwrap(),
            s
        );
    }

    #[test]
    fn forget_zero_returns_new_head_output() {
        let mut model = tiny_model(2);
        let last = model.forget_head.layers.last_mut().unwrap();
        last.b.iter_mut().for_each(|v| *v = -40.0);
        let ps = PredictorState {
            dist: lift(&sample_state(), &schema()).unwrap(),
            hidden: model.zero_hidden(),
        };
        let (next, cache) = model.predict_one(&ps, Action(0)).unwrap();
        let nv = next.dist.value_vec();
        for (a, b) in nv.iter().zip(&cache.n_out) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forget_outputs_stay_in_unit_interval() {
        let model = tiny_model(3);
        let mut state = sample_state();
        state.continuous = vec![1e3, -1e3];
        let ps = PredictorState {
            dist: lift(&state, &schema()).unwrap(),
            hidden: model.zero_hidden(),
        };
        let (_, cache) = model.predict_one(&ps, Action(1)).unwrap();
        assert!(cache.f_out.iter().all(|&f| (0.0..=1.0).contains(&f)));
    }

    #[test]
    fn rollout_zero_steps_is_lift() {
        let model = tiny_model(4);
        let s = sample_state();
        let h = vec![0.3, -0.2, 0.1, 0.0];
        let (ps, cache) = model.rollout(&s, &h, &[], 3).unwrap();
        assert_eq!(ps.dist, lift(&s, &schema()).unwrap());
        assert_eq!(ps.hidden, h);
        assert!(cache.steps.is_empty());
    }

    #[test]
    fn rollout_past_delay_rejected() {
        let model = tiny_model(5);
        let s = sample_state();
        let h = model.zero_hidden();
        let acts = [Action(0), Action(1), Action(0)];
        assert!(model.rollout(&s, &h, &acts, 2).is_err());
        assert!(model.rollout(&s, &h, &acts, 3).is_ok());
    }

    #[test]
    fn rollout_extends_one_step_at_a_time() {
        let model = tiny_model(6);
        let s = sample_state();
        let h = vec![0.05; 4];
        let acts = [Action(1), Action(0), Action(1)];
        let (full, _) = model.rollout(&s, &h, &acts, 3).unwrap();
        let (two, _) = model.rollout(&s, &h, &acts[..2], 3).unwrap();
        let (manual, _) = model.predict_one(&two, acts[2]).unwrap();
        assert_eq!(full.dist, manual.dist);
        assert_eq!(full.hidden, manual.hidden);
    }

    #[test]
    fn model_loss_minimal_shapes() {
        let model = tiny_model(7);
        let states = vec![sample_state(), sample_state()];
        let hiddens = vec![model.zero_hidden()];
        let executed = vec![Action(0)];
        let mut grad = model.zero_grad();
        let stats = model
            .model_loss(&states, &hiddens, &executed, 1, &mut grad, 1.0)
            .unwrap();
        assert_eq!(stats.anchors, 1);
        assert!(model
            .model_loss(&states, &hiddens, &executed, 2, &mut grad, 1.0)
            .is_err());
    }

    #[test]
    fn loss_at_optimum_hits_saturation_floor() {
        // An identity model on a constant trajectory predicts perfectly:
        // continuous term 0, cross-entropy bounded by the lift saturation.
        let mut model = tiny_model(8);
        force_identity(&mut model);
        let s = sample_state();
        let states = vec![s.clone(), s.clone(), s.clone(), s];
        let hiddens = vec![model.zero_hidden(); 3];
        let executed = vec![Action(0); 3];
        let mut grad = model.zero_grad();
        let stats = model
            .model_loss(&states, &hiddens, &executed, 3, &mut grad, 1.0)
            .unwrap();
        assert!(stats.continuous_loss < 1e-20);
        assert!(stats.categorical_loss < 1e-3, "{}", stats.categorical_loss);
        assert_eq!(stats.accuracy_step1, 1.0);
    }
}
