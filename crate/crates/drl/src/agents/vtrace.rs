//! Delayed returns and V-trace target computation, as pure functions over
//! slices. The delay alignment happens before these are called: the reward
//! and value sequences passed in are already shifted so that index j refers
//! to the step where decision j was executed.

use crate::error::{DrlError, Result};

/// Discounted n-step returns with a terminal bootstrap:
/// returns[j] = Σ_k γ^k rewards[j+k] + γ^(m−j) bootstrap.
pub fn n_step_returns(rewards: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for j in (0..rewards.len()).rev() {
        acc = rewards[j] + gamma * acc;
        out[j] = acc;
    }
    out
}

/// Returns aligned to decisions under d steps of delay: the decision at step
/// t is credited with the discounted sum starting at t+d, where its action
/// actually executes. Rewards r_t..r_{t+d−1} contribute nothing to decision
/// t. Only the first T−d decisions have computable returns; the tail is
/// bootstrapped from `value_at_end`.
pub fn delayed_returns(
    rewards: &[f64],
    value_at_end: f64,
    d: usize,
    gamma: f64,
) -> Result<Vec<f64>> {
    if rewards.len() <= d {
        return Err(DrlError::contract(format!(
            "trajectory of {} rewards is too short to train with delay {d}",
            rewards.len()
        )));
    }
    Ok(n_step_returns(&rewards[d..], value_at_end, gamma))
}

#[derive(Debug, Clone)]
pub struct VtraceOut {
    /// Value targets v_s.
    pub vs: Vec<f64>,
    /// Policy-gradient advantages ρ_s (r_s + γ v_{s+1} − V(x_s)).
    pub advantages: Vec<f64>,
    /// Clipped importance weights ρ_s (diagnostic).
    pub rhos: Vec<f64>,
}

/// V-trace over an m-step sequence. `values` holds V(x_0)..V(x_m): one more
/// entry than rewards, the last being the bootstrap. With behavior == target
/// and clips ≥ 1 the targets collapse to the n-step returns exactly.
pub fn vtrace_targets(
    behavior_logp: &[f64],
    target_logp: &[f64],
    values: &[f64],
    rewards: &[f64],
    gamma: f64,
    rho_bar: f64,
    c_bar: f64,
) -> Result<VtraceOut> {
    let m = rewards.len();
    if behavior_logp.len() != m || target_logp.len() != m || values.len() != m + 1 {
        return Err(DrlError::contract(
            "vtrace: behavior/target/rewards must have equal length and values one more"
                .to_string(),
        ));
    }
    if !(rho_bar >= c_bar && c_bar > 0.0) {
        return Err(DrlError::contract(format!(
            "vtrace clips must satisfy rho_bar >= c_bar > 0, got ({rho_bar}, {c_bar})"
        )));
    }
    let mut rhos = vec![0.0; m];
    let mut cs = vec![0.0; m];
    for j in 0..m {
        let ratio = (target_logp[j] - behavior_logp[j]).exp();
        if !ratio.is_finite() {
            return Err(DrlError::Training(format!(
                "non-finite importance ratio at step {j}"
            )));
        }
        rhos[j] = ratio.min(rho_bar);
        cs[j] = ratio.min(c_bar);
    }

    // v_s = V(x_s) + δ_s + γ c_s (v_{s+1} − V(x_{s+1})), backward recursion.
    let mut vs = vec![0.0; m + 1];
    vs[m] = values[m];
    for j in (0..m).rev() {
        let delta = rhos[j] * (rewards[j] + gamma * values[j + 1] - values[j]);
        vs[j] = values[j] + delta + gamma * cs[j] * (vs[j + 1] - values[j + 1]);
    }

    let advantages = (0..m)
        .map(|j| rhos[j] * (rewards[j] + gamma * vs[j + 1] - values[j]))
        .collect();
    vs.truncate(m);
    Ok(VtraceOut {
        vs,
        advantages,
        rhos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rewards_zero_bootstrap() {
        let r = delayed_returns(&[0.0; 6], 0.0, 2, 0.9).unwrap();
        assert_eq!(r, vec![0.0; 4]);
    }

    #[test]
    fn gamma_zero_picks_single_reward() {
        let rewards = [1.0, 2.0, 3.0, 4.0];
        let r = delayed_returns(&rewards, 5.0, 1, 0.0).unwrap();
        assert_eq!(r, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn hand_computed_geometric() {
        // d = 2, γ = 0.5, rewards all 1, zero bootstrap:
        // R_0 = 1 + 0.5 + 0.25 = 1.75.
        let r = delayed_returns(&[1.0; 5], 0.0, 2, 0.5).unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[0] - 1.75).abs() < 1e-15);
    }

    #[test]
    fn too_short_is_contract_violation() {
        assert!(delayed_returns(&[1.0, 1.0], 0.0, 2, 0.9).is_err());
    }

    #[test]
    fn on_policy_collapse_to_n_step() {
        let rewards = [0.3, -1.0, 2.0, 0.5];
        let values = [0.1, 0.2, 0.3, 0.4, 0.5];
        let logp = [-0.5, -1.2, -0.3, -2.0];
        let out = vtrace_targets(&logp, &logp, &values, &rewards, 0.9, 1.0, 1.0).unwrap();
        let ns = n_step_returns(&rewards, 0.5, 0.9);
        for (a, b) in out.vs.iter().zip(&ns) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_td_errors_give_vs_equal_values() {
        // Rewards chosen so r + γV' − V = 0 everywhere.
        let gamma = 0.8;
        let values = [1.0, 2.0, -1.0, 0.5];
        let rewards: Vec<f64> = (0..3)
            .map(|j| values[j] - gamma * values[j + 1])
            .collect();
        let logp = [-1.0, -1.0, -1.0];
        let behavior = [-2.0, -0.5, -1.5]; // off-policy on purpose
        let out =
            vtrace_targets(&behavior, &logp, &values, &rewards, gamma, 1.0, 1.0).unwrap();
        for (v, t) in out.vs.iter().zip(&values) {
            assert!((v - t).abs() < 1e-12);
        }
    }

    // Hand-evaluated 3-step recursion with ratios [2, 0.5, 1] clipped at 1:
    // γ = 0.9, rewards [1, 2, 3], values [0.5, 1.0, 1.5, 2.0].
    //   δ = [1.4, 1.175, 3.3]
    //   v = [4.294, 3.66, 4.8], adv_0 = 3.794
    #[test]
    fn hand_computed_offpolicy_recursion() {
        let behavior = [0.0, 0.0, 0.0];
        let target = [2.0f64.ln(), 0.5f64.ln(), 0.0];
        let values = [0.5, 1.0, 1.5, 2.0];
        let rewards = [1.0, 2.0, 3.0];
        let out =
            vtrace_targets(&behavior, &target, &values, &rewards, 0.9, 1.0, 1.0).unwrap();
        assert!((out.vs[0] - 4.294).abs() < 1e-12, "{}", out.vs[0]);
        assert!((out.vs[1] - 3.66).abs() < 1e-12);
        assert!((out.vs[2] - 4.8).abs() < 1e-12);
        assert!((out.advantages[0] - 3.794).abs() < 1e-12);
        assert_eq!(out.rhos, vec![1.0, 0.5, 1.0]);
    }

    #[test]
    fn bad_clips_rejected() {
        let l = [-1.0];
        let v = [0.0, 0.0];
        let r = [1.0];
        assert!(vtrace_targets(&l, &l, &v, &r, 0.9, 0.5, 1.0).is_err());
        assert!(vtrace_targets(&l, &l, &v, &r, 0.9, 1.0, 0.0).is_err());
    }
}
