//! Exact oracles on small MDPs: augmented-state construction over the
//! pending-action queue, value iteration, and tabular Model-Based Simulation.
//! These are the ground truth the neural pipeline is checked against.

use crate::error::{DrlError, Result};
use serde::Serialize;

/// Hard cap on augmented state counts. |A|^d grows fast enough that a guard
/// is kinder than an allocation failure.
pub const MAX_AUGMENTED_STATES: u64 = 10_000_000;

/// A finite MDP with explicit transition lists. `transitions[s][a]` holds
/// (next state, probability) pairs summing to 1.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
    pub rewards: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl TabularMdp {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(DrlError::contract(format!(
                "gamma {} outside [0, 1)",
                self.gamma
            )));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let total: f64 = self.transitions[s][a].iter().map(|t| t.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(DrlError::contract(format!(
                        "T[{s}][{a}] sums to {total}, not 1"
                    )));
                }
                if !self.rewards[s][a].is_finite() {
                    return Err(DrlError::contract(format!("R[{s}][{a}] not finite")));
                }
            }
        }
        Ok(())
    }

    /// Most likely successor of (s, a); ties break to the lowest state index.
    pub fn mode_next(&self, s: usize, a: usize) -> usize {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for &(next, p) in &self.transitions[s][a] {
            if p > best.1 || (p == best.1 && next < best.0) {
                best = (next, p);
            }
        }
        best.0
    }
}

/// Anything value iteration can run on.
pub trait Mdp {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn gamma(&self) -> f64;
    fn reward(&self, s: usize, a: usize) -> f64;
    fn for_each_transition(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64));
}

impl Mdp for TabularMdp {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s][a]
    }

    fn for_each_transition(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64)) {
        for &(next, p) in &self.transitions[s][a] {
            f(next, p);
        }
    }
}

/// The base MDP augmented with a d-deep pending-action queue. States are
/// (s, a₁…a_d) tuples enumerated as s·|A|^d + Σ aᵢ·|A|^(d−i); a₁ is the
/// oldest pending action (next to execute). Transitions are generated on the
/// fly from the base MDP, so the augmented MDP is never materialized.
pub struct AugmentedMdp<'a> {
    pub base: &'a TabularMdp,
    pub d: usize,
    queue_count: usize,
}

/// Builds the augmented MDP, enforcing the tractability guard with
/// saturating arithmetic (|A|^d overflows u64 long before it overflows
/// patience).
pub fn augment(base: &TabularMdp, d: usize) -> Result<AugmentedMdp<'_>> {
    let mut count: u64 = base.n_states as u64;
    for _ in 0..d {
        count = count.saturating_mul(base.n_actions as u64);
        if count > MAX_AUGMENTED_STATES {
            return Err(DrlError::Resource(format!(
                "augmented state count exceeds {MAX_AUGMENTED_STATES} (|A|^d blows up)"
            )));
        }
    }
    Ok(AugmentedMdp {
        base,
        d,
        queue_count: (count / base.n_states as u64) as usize,
    })
}

impl<'a> AugmentedMdp<'a> {
    pub fn queue_count(&self) -> usize {
        self.queue_count
    }

    pub fn encode(&self, s: usize, queue: &[usize]) -> usize {
        debug_assert_eq!(queue.len(), self.d);
        let mut code = 0;
        for &a in queue {
            code = code * self.base.n_actions + a;
        }
        s * self.queue_count + code
    }

    pub fn decode(&self, idx: usize) -> (usize, Vec<usize>) {
        let s = idx / self.queue_count;
        let mut code = idx % self.queue_count;
        let mut queue = vec![0; self.d];
        for i in (0..self.d).rev() {
            queue[i] = code % self.base.n_actions;
            code /= self.base.n_actions;
        }
        (s, queue)
    }
}

impl<'a> Mdp for AugmentedMdp<'a> {
    fn n_states(&self) -> usize {
        self.base.n_states * self.queue_count
    }

    fn n_actions(&self) -> usize {
        self.base.n_actions
    }

    fn gamma(&self) -> f64 {
        self.base.gamma
    }

    fn reward(&self, idx: usize, a: usize) -> f64 {
        if self.d == 0 {
            return self.base.rewards[idx][a];
        }
        let (s, queue) = self.decode(idx);
        // The executed action is the oldest queued one; `a` only enters the
        // queue.
        let _ = a;
        self.base.rewards[s][queue[0]]
    }

    fn for_each_transition(&self, idx: usize, a: usize, f: &mut dyn FnMut(usize, f64)) {
        if self.d == 0 {
            self.base.for_each_transition(idx, a, f);
            return;
        }
        let (s, queue) = self.decode(idx);
        let executed = queue[0];
        let mut next_queue = queue[1..].to_vec();
        next_queue.push(a);
        for &(next_s, p) in &self.base.transitions[s][executed] {
            f(self.encode(next_s, &next_queue), p);
        }
    }
}

/// Value iteration to a sup-norm Bellman residual below `tol`. Returns
/// (V*, greedy policy); greedy ties break to the lowest action index.
pub fn value_iteration(mdp: &dyn Mdp, tol: f64) -> (Vec<f64>, Vec<usize>) {
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    let gamma = mdp.gamma();
    loop {
        let mut residual: f64 = 0.0;
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions() {
                let mut q = mdp.reward(s, a);
                mdp.for_each_transition(s, a, &mut |next, p| {
                    q += gamma * p * v[next];
                });
                if q > best {
                    best = q;
                }
            }
            residual = residual.max((best - v[s]).abs());
            v[s] = best;
        }
        if residual < tol {
            break;
        }
    }
    let policy = greedy_policy(mdp, &v);
    (v, policy)
}

/// Greedy policy with respect to a value function; ties to lowest action.
pub fn greedy_policy(mdp: &dyn Mdp, v: &[f64]) -> Vec<usize> {
    let gamma = mdp.gamma();
    (0..mdp.n_states())
        .map(|s| {
            let mut best_a = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions() {
                let mut q = mdp.reward(s, a);
                mdp.for_each_transition(s, a, &mut |next, p| {
                    q += gamma * p * v[next];
                });
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            best_a
        })
        .collect()
}

/// Exact evaluation of a deterministic policy by iterating its Bellman
/// operator to `tol` (default callers use 1e-12).
pub fn policy_evaluation(mdp: &dyn Mdp, policy: &[usize], tol: f64) -> Vec<f64> {
    let n = mdp.n_states();
    assert_eq!(policy.len(), n, "policy length mismatch");
    let gamma = mdp.gamma();
    let mut v = vec![0.0; n];
    loop {
        let mut residual: f64 = 0.0;
        for s in 0..n {
            let a = policy[s];
            let mut q = mdp.reward(s, a);
            mdp.for_each_transition(s, a, &mut |next, p| {
                q += gamma * p * v[next];
            });
            residual = residual.max((q - v[s]).abs());
            v[s] = q;
        }
        if residual < tol {
            break;
        }
    }
    v
}

/// Model-Based Simulation: solve the undelayed MDP once, then act at the
/// state reached by simulating the queued actions forward through the
/// most-likely transition at each step.
pub struct MbsPolicy {
    pub undelayed_values: Vec<f64>,
    pub undelayed_policy: Vec<usize>,
}

pub fn mbs_policy(base: &TabularMdp, tol: f64) -> MbsPolicy {
    let (v, policy) = value_iteration(base, tol);
    MbsPolicy {
        undelayed_values: v,
        undelayed_policy: policy,
    }
}

impl MbsPolicy {
    /// Action for the augmented state (s, queue).
    pub fn act(&self, base: &TabularMdp, s: usize, queue: &[usize]) -> usize {
        let mut cur = s;
        for &a in queue {
            cur = base.mode_next(cur, a);
        }
        self.undelayed_policy[cur]
    }

    /// Materializes the policy over all augmented states.
    pub fn table(&self, aug: &AugmentedMdp<'_>) -> Vec<usize> {
        (0..aug.n_states())
            .map(|idx| {
                let (s, queue) = aug.decode(idx);
                self.act(aug.base, s, &queue)
            })
            .collect()
    }
}

/// Builders for the oracle test environments. The dynamics are shared with
/// the interactive environments in `envs`.
pub fn chain_mdp(n: usize, gamma: f64) -> TabularMdp {
    let goal = n - 1;
    let mut transitions = vec![vec![Vec::new(); 2]; n];
    let mut rewards = vec![vec![0.0; 2]; n];
    for s in 0..n {
        for a in 0..2 {
            if s == goal {
                // Absorbing goal: no further reward.
                transitions[s][a] = vec![(goal, 1.0)];
            } else {
                let (next, r, _) = crate::envs::chain_transition(n, s, a);
                transitions[s][a] = vec![(next, 1.0)];
                rewards[s][a] = r;
            }
        }
    }
    TabularMdp {
        n_states: n,
        n_actions: 2,
        transitions,
        rewards,
        gamma,
    }
}

pub fn gridworld_mdp(w: usize, h: usize, slip: f64, gamma: f64) -> TabularMdp {
    let n = w * h;
    let goal = n - 1;
    let mut transitions = vec![vec![Vec::new(); 4]; n];
    let mut rewards = vec![vec![0.0; 4]; n];
    for s in 0..n {
        for a in 0..4 {
            if s == goal {
                transitions[s][a] = vec![(goal, 1.0)];
                continue;
            }
            // Merge duplicate successors (wall bumps) into a canonical list.
            let mut by_next: std::collections::BTreeMap<usize, (f64, f64)> =
                std::collections::BTreeMap::new();
            for (p, next, r, _) in crate::envs::gridworld_transition_dist(w, h, slip, s, a) {
                let e = by_next.entry(next).or_insert((0.0, 0.0));
                e.0 += p;
                e.1 += p * r;
            }
            let mut expected_reward = 0.0;
            for (next, (p, pr)) in by_next {
                transitions[s][a].push((next, p));
                expected_reward += pr;
            }
            rewards[s][a] = expected_reward;
        }
    }
    TabularMdp {
        n_states: n,
        n_actions: 4,
        transitions,
        rewards,
        gamma,
    }
}

/// Comparison of the MBS policy against the augmented-state optimum, as
/// written to the oracle JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub env: String,
    pub d: usize,
    pub n_augmented_states: usize,
    pub policies_identical: bool,
    pub n_policy_mismatches: usize,
    pub max_value_diff: f64,
    /// V*(init) for the augmented optimum and the MBS policy, where init is
    /// the start state with a queue of no-ops.
    pub optimal_return_at_init: f64,
    pub mbs_return_at_init: f64,
}

/// Runs the full comparison for one (mdp, d) pair.
pub fn compare_mbs_vs_augmented(
    name: &str,
    base: &TabularMdp,
    init_state: usize,
    d: usize,
    tol: f64,
) -> Result<OracleComparison> {
    base.validate()?;
    let aug = augment(base, d)?;
    let (v_star, greedy) = value_iteration(&aug, tol);
    let mbs = mbs_policy(base, tol);
    let mbs_table = mbs.table(&aug);
    let n_policy_mismatches = greedy
        .iter()
        .zip(&mbs_table)
        .filter(|(a, b)| a != b)
        .count();
    let v_mbs = policy_evaluation(&aug, &mbs_table, tol);
    let max_value_diff = v_star
        .iter()
        .zip(&v_mbs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let init = aug.encode(init_state, &vec![0; d]);
    Ok(OracleComparison {
        env: name.to_string(),
        d,
        n_augmented_states: aug.n_states(),
        policies_identical: n_policy_mismatches == 0,
        n_policy_mismatches,
        max_value_diff,
        optimal_return_at_init: v_star[init],
        mbs_return_at_init: v_mbs[init],
    })
}
