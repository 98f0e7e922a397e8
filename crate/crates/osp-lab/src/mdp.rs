//! Finite tabular MDPs: the data model and its JSON schema, policy
//! enumeration, exact per-policy analysis, environment simulation, and a
//! seeded generator of uniformly ergodic instances.
//!
//! A deterministic stationary policy is a map state → action, canonically
//! indexed by mixed-radix encoding with state 0 least significant, so the
//! policy space is exactly `0..A^S`. Analysis is brute force over that
//! space; anything above [`ENUMERATION_LIMIT`] policies is refused rather
//! than silently running forever.

use crate::chain::{
    analyze_chain, validate_uniform_ergodicity, ChainAnalysis, ChainError, ErgodicityViolation,
    TransitionMatrix,
};
use crate::rng::{categorical, RngStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Refuse to enumerate more policies than this.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Canonical policy index in `0..A^S`.
pub type PolicyId = u64;

const TRANSITION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("{path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("invalid action {action} in state {state}")]
    InvalidAction { state: usize, action: usize },
    #[error("policy space A^S = {count} exceeds enumeration limit {ENUMERATION_LIMIT}")]
    EnumerationLimit { count: u128 },
    #[error("smoothing must lie in (0,1), got {value}")]
    InvalidSmoothing { value: f64 },
    #[error("policy {policy}: {source}")]
    PolicyChain {
        policy: PolicyId,
        #[source]
        source: ChainError,
    },
    #[error("invalid MDP JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Bernoulli,
    Deterministic,
}

/// On-disk schema; the validated model is constructed from it.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    mean_rewards: Vec<Vec<f64>>,
    reward_kind: RewardKind,
}

/// A finite MDP with kernel `p(s'|s,a)`, mean rewards `r(s,a) ∈ [0,1]`, and
/// a reward-noise kind. Construction validates shape and stochasticity;
/// ergodicity of the induced chains is a separate, more expensive check
/// ([`validate_mdp`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp", into = "RawMdp")]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    mean_rewards: Vec<Vec<f64>>,
    reward_kind: RewardKind,
}

impl TryFrom<RawMdp> for MdpModel {
    type Error = MdpError;

    fn try_from(raw: RawMdp) -> Result<Self, MdpError> {
        MdpModel::new(
            raw.num_states,
            raw.num_actions,
            raw.transitions,
            raw.mean_rewards,
            raw.reward_kind,
        )
    }
}

impl From<MdpModel> for RawMdp {
    fn from(m: MdpModel) -> RawMdp {
        RawMdp {
            num_states: m.num_states,
            num_actions: m.num_actions,
            transitions: m.transitions,
            mean_rewards: m.mean_rewards,
            reward_kind: m.reward_kind,
        }
    }
}

fn schema_err(path: impl Into<String>, reason: impl Into<String>) -> MdpError {
    MdpError::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

impl MdpModel {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<Vec<Vec<f64>>>,
        mean_rewards: Vec<Vec<f64>>,
        reward_kind: RewardKind,
    ) -> Result<Self, MdpError> {
        if num_states == 0 {
            return Err(schema_err("num_states", "must be at least 1"));
        }
        if num_actions == 0 {
            return Err(schema_err("num_actions", "must be at least 1"));
        }
        if transitions.len() != num_states {
            return Err(schema_err(
                "transitions",
                format!("expected {num_states} state slices, got {}", transitions.len()),
            ));
        }
        for (s, per_action) in transitions.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(schema_err(
                    format!("transitions[{s}]"),
                    format!("expected {num_actions} action rows, got {}", per_action.len()),
                ));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != num_states {
                    return Err(schema_err(
                        format!("transitions[{s}][{a}]"),
                        format!("expected {num_states} probabilities, got {}", row.len()),
                    ));
                }
                let mut sum = 0.0;
                for (s_next, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(schema_err(
                            format!("transitions[{s}][{a}][{s_next}]"),
                            format!("probability {p} outside [0,1]"),
                        ));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > TRANSITION_TOL {
                    return Err(schema_err(
                        format!("transitions[{s}][{a}]"),
                        format!("row sums to {sum}, not 1"),
                    ));
                }
            }
        }
        if mean_rewards.len() != num_states {
            return Err(schema_err(
                "mean_rewards",
                format!("expected {num_states} rows, got {}", mean_rewards.len()),
            ));
        }
        for (s, row) in mean_rewards.iter().enumerate() {
            if row.len() != num_actions {
                return Err(schema_err(
                    format!("mean_rewards[{s}]"),
                    format!("expected {num_actions} entries, got {}", row.len()),
                ));
            }
            for (a, &r) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&r) {
                    return Err(schema_err(
                        format!("mean_rewards[{s}][{a}]"),
                        format!("mean reward {r} outside [0,1]"),
                    ));
                }
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            transitions,
            mean_rewards,
            reward_kind,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transitions[s][a]
    }

    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        self.mean_rewards[s][a]
    }

    pub fn from_json_str(json: &str) -> Result<Self, MdpError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("MDP serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn policy_count(&self) -> u128 {
        (self.num_actions as u128).pow(self.num_states as u32)
    }
}

/// Deterministic stationary policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    actions: Vec<usize>,
    num_actions: usize,
}

impl Policy {
    pub fn new(actions: Vec<usize>, num_actions: usize) -> Result<Self, MdpError> {
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(MdpError::InvalidAction { state: s, action: a });
            }
        }
        Ok(Self {
            actions,
            num_actions,
        })
    }

    /// Decode a canonical index: state 0 is the least-significant digit in
    /// base `num_actions`.
    pub fn from_id(id: PolicyId, num_states: usize, num_actions: usize) -> Self {
        let mut rest = id;
        let base = num_actions as PolicyId;
        let actions = (0..num_states)
            .map(|_| {
                let a = (rest % base) as usize;
                rest /= base;
                a
            })
            .collect();
        Self {
            actions,
            num_actions,
        }
    }

    pub fn id(&self) -> PolicyId {
        let base = self.num_actions as PolicyId;
        self.actions
            .iter()
            .rev()
            .fold(0, |acc, &a| acc * base + a as PolicyId)
    }

    pub fn action(&self, s: usize) -> usize {
        self.actions[s]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }
}

/// All `A^S` policies in id order; refused above [`ENUMERATION_LIMIT`].
pub fn enumerate_policies(m: &MdpModel) -> Result<Vec<Policy>, MdpError> {
    let count = m.policy_count();
    if count > ENUMERATION_LIMIT {
        return Err(MdpError::EnumerationLimit { count });
    }
    Ok((0..count as PolicyId)
        .map(|id| Policy::from_id(id, m.num_states, m.num_actions))
        .collect())
}

/// Chain induced by a policy: row `s` of the kernel is `p(·|s, π(s))`, and
/// the reward vector is `r_π(s) = r(s, π(s))`.
pub fn induced_chain(m: &MdpModel, policy: &Policy) -> (TransitionMatrix, Vec<f64>) {
    let rows = (0..m.num_states)
        .map(|s| m.transitions[s][policy.action(s)].clone())
        .collect();
    let rewards = (0..m.num_states)
        .map(|s| m.mean_rewards[s][policy.action(s)])
        .collect();
    let matrix = TransitionMatrix::new(rows)
        .expect("rows of a validated MDP are stochastic by construction");
    (matrix, rewards)
}

/// Checks that every policy induces a uniformly ergodic chain. The returned
/// list is empty iff the MDP is acceptable; otherwise it names each
/// offending policy and its violation.
pub fn validate_mdp(m: &MdpModel) -> Result<Vec<(PolicyId, ErgodicityViolation)>, MdpError> {
    let policies = enumerate_policies(m)?;
    Ok(policies
        .par_iter()
        .map(|policy| {
            let (matrix, _) = induced_chain(m, policy);
            validate_uniform_ergodicity(&matrix)
                .err()
                .map(|v| (policy.id(), v))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

/// Exhaustive per-policy analysis plus the MDP-level aggregates.
#[derive(Debug, Clone)]
pub struct MdpAnalysis {
    /// Indexed by `PolicyId`.
    pub per_policy: Vec<ChainAnalysis>,
    /// `max_π t_mix^π`.
    pub mdp_mixing_time: usize,
    /// Best average reward over all policies.
    pub rho_star: f64,
    /// Smallest `PolicyId` attaining `rho_star`.
    pub optimal_policy: PolicyId,
    /// Smallest strictly positive stationary mass over all policies/states.
    pub mu_min: f64,
}

/// Brute-force analysis of every policy's induced chain. Requires a
/// validated MDP; mixing-time searches are capped at `cap` steps.
pub fn analyze_mdp(m: &MdpModel, cap: usize) -> Result<MdpAnalysis, MdpError> {
    let policies = enumerate_policies(m)?;
    let per_policy: Vec<ChainAnalysis> = policies
        .par_iter()
        .map(|policy| {
            let (matrix, rewards) = induced_chain(m, policy);
            analyze_chain(&matrix, &rewards, cap).map_err(|source| MdpError::PolicyChain {
                policy: policy.id(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut rho_star = f64::NEG_INFINITY;
    let mut optimal_policy = 0;
    let mut mdp_mixing_time = 1;
    let mut mu_min = 1.0f64;
    for (id, analysis) in per_policy.iter().enumerate() {
        if analysis.avg_reward > rho_star {
            rho_star = analysis.avg_reward;
            optimal_policy = id as PolicyId;
        }
        mdp_mixing_time = mdp_mixing_time.max(analysis.mixing_time);
        for &mass in analysis.stationary.mass() {
            if mass > 0.0 {
                mu_min = mu_min.min(mass);
            }
        }
    }
    Ok(MdpAnalysis {
        per_policy,
        mdp_mixing_time,
        rho_star,
        optimal_policy,
        mu_min,
    })
}

/// Environment cursor: current state plus the deterministic draw stream.
/// Single-owner mutable; concurrent trials each own one with its own seed.
#[derive(Debug, Clone)]
pub struct EnvState {
    current_state: usize,
    stream: RngStream,
}

impl EnvState {
    pub fn new(start_state: usize, seed: u64) -> Self {
        Self {
            current_state: start_state,
            stream: RngStream::new(seed),
        }
    }

    pub fn current_state(&self) -> usize {
        self.current_state
    }

    pub fn draws_taken(&self) -> u64 {
        self.stream.counter()
    }
}

/// One environment step under action `a`: samples the successor state, then
/// the reward. The stream advances by exactly two draws per step, in
/// deterministic-reward mode too, so trajectories stay aligned across
/// reward kinds.
pub fn env_step(m: &MdpModel, env: &mut EnvState, a: usize) -> Result<(f64, usize), MdpError> {
    if a >= m.num_actions {
        return Err(MdpError::InvalidAction {
            state: env.current_state,
            action: a,
        });
    }
    let s = env.current_state;
    let u_transition = env.stream.next_f64();
    let u_reward = env.stream.next_f64();
    let next_state = categorical(&m.transitions[s][a], u_transition);
    let mean = m.mean_rewards[s][a];
    let reward = match m.reward_kind {
        RewardKind::Bernoulli => {
            if u_reward < mean {
                1.0
            } else {
                0.0
            }
        }
        RewardKind::Deterministic => mean,
    };
    env.current_state = next_state;
    Ok((reward, next_state))
}

/// Seeded generator of uniformly ergodic MDPs. Kernel rows are sampled from
/// the uniform simplex (normalized exponentials), then mixed with the
/// uniform distribution by weight `smoothing`, so every entry is strictly
/// positive and every policy's chain is irreducible and aperiodic.
///
/// Draw order per (s,a), states outer, actions inner: S transition draws,
/// then one reward draw. Fixed forever; generated fixtures depend on it.
pub fn generate_ergodic_mdp(
    num_states: usize,
    num_actions: usize,
    seed: u64,
    smoothing: f64,
) -> Result<MdpModel, MdpError> {
    if num_states == 0 {
        return Err(schema_err("num_states", "must be at least 1"));
    }
    if num_actions == 0 {
        return Err(schema_err("num_actions", "must be at least 1"));
    }
    if !(smoothing > 0.0 && smoothing < 1.0) {
        return Err(MdpError::InvalidSmoothing { value: smoothing });
    }
    let mut stream = RngStream::new(seed);
    let uniform = 1.0 / num_states as f64;
    let mut transitions = Vec::with_capacity(num_states);
    let mut mean_rewards = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let mut per_action = Vec::with_capacity(num_actions);
        let mut rewards = Vec::with_capacity(num_actions);
        for _ in 0..num_actions {
            let raw: Vec<f64> = (0..num_states)
                .map(|_| -(1.0 - stream.next_f64()).ln())
                .collect();
            let total: f64 = raw.iter().sum();
            let row = raw
                .iter()
                .map(|&x| (1.0 - smoothing) * (x / total) + smoothing * uniform)
                .collect();
            per_action.push(row);
            rewards.push(stream.next_f64());
        }
        transitions.push(per_action);
        mean_rewards.push(rewards);
    }
    MdpModel::new(
        num_states,
        num_actions,
        transitions,
        mean_rewards,
        RewardKind::Bernoulli,
    )
}
