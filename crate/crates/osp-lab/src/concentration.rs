//! Monte-Carlo verification of Markov-chain concentration bounds.
//!
//! Each check simulates many independent length-n trajectories of a fixed
//! chain, measures how often (or how far) an empirical quantity deviates,
//! and compares against the stated theoretical bound:
//!
//! - reward tail: `P{|μ̂ⁿᵀr − μᵀr| ≥ ε} ≤ 2·exp(−2ε²n/(9·t_mix))`,
//! - reward confidence interval: violation of the radius
//!   `√(9·t_mix·ln(2/δ)/(2n))` happens with frequency ≤ δ,
//! - total-variation tail: `d_TV(μ, μ̂ⁿ)` exceeds
//!   `√(38·S·t_mix·ln(2/δ)/n)` with frequency ≤ δ,
//! - total-variation mean: `E[d_TV(μ, μ̂ⁿ)] ≤ Σ_s min(√(8μ(s)/(nβ)), μ(s))`
//!   with β the pseudo-spectral gap.
//!
//! Trajectories index from the first transition: X_1 is the state one step
//! after the start state, so a chain whose rows all equal μ produces exact
//! i.i.d. μ-samples and the "mixes in one step" cases are exact.
//!
//! Monte-Carlo rates are never compared exactly: every pass verdict allows
//! a 99% Wilson half-width (rates) or Hoeffding half-width (means) on top
//! of the bound. Bounds that are vacuous for probabilities (≥ 1) are
//! reported and flagged, not failed; small-n cases are vacuous by design.
//! Checks run from the worst start state by default (max over starts),
//! since the bounds quantify over arbitrary starts.

use crate::chain::{
    mixing_time, pseudo_spectral_gap, stationary_distribution, tv_slices, ChainError,
    TransitionMatrix, DEFAULT_MIXING_CAP,
};
use crate::rng::{categorical, RngStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 99.5th percentile of the standard normal: two-sided 99% Wilson score.
const Z_99: f64 = 2.5758293035489004;
/// Confidence level shared by the mean-check margin.
const MEAN_CONFIDENCE_DELTA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid check spec: {reason}")]
    InvalidSpec { reason: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn bad_spec(reason: impl Into<String>) -> LabError {
    LabError::InvalidSpec {
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    Fixed(usize),
    /// Evaluate every start state and report the worst (largest) statistic.
    WorstCase,
}

/// One Monte-Carlo tail check: a chain with per-state rewards, a trajectory
/// length, a deviation parameter (ε or δ depending on the check), and the
/// number of trials. Per-trial streams are seeded `seed ⊕ trial`, so trials
/// are independent and the whole battery replays bit-exactly.
#[derive(Debug, Clone)]
pub struct TailCheckSpec {
    pub chain: TransitionMatrix,
    pub rewards: Vec<f64>,
    pub start: StartMode,
    pub n: usize,
    pub epsilon_or_delta: f64,
    pub trials: usize,
    pub seed: u64,
}

impl TailCheckSpec {
    fn validate(&self) -> Result<(), LabError> {
        if self.n == 0 {
            return Err(bad_spec("trajectory length n must be at least 1"));
        }
        if self.trials == 0 {
            return Err(bad_spec("trials must be at least 1"));
        }
        if self.epsilon_or_delta <= 0.0 || self.epsilon_or_delta.is_nan() {
            return Err(bad_spec(format!(
                "deviation parameter must be positive, got {}",
                self.epsilon_or_delta
            )));
        }
        if self.rewards.len() != self.chain.n() {
            return Err(bad_spec(format!(
                "{} rewards for {} states",
                self.rewards.len(),
                self.chain.n()
            )));
        }
        if let StartMode::Fixed(s) = self.start {
            if s >= self.chain.n() {
                return Err(bad_spec(format!("start state {s} out of range")));
            }
        }
        Ok(())
    }

    fn start_states(&self) -> Vec<usize> {
        match self.start {
            StartMode::Fixed(s) => vec![s],
            StartMode::WorstCase => (0..self.chain.n()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    RewardMcdiarmid,
    RewardCi,
    TvConcentration,
    TvExpectation,
}

/// Outcome of one check, serializable as the report JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCheckReport {
    pub bound_kind: BoundKind,
    pub n: usize,
    pub epsilon_or_delta: f64,
    pub trials: usize,
    /// Violation rate, or mean deviation for the expectation check;
    /// worst-start mode reports the max over start states.
    pub empirical: f64,
    /// The bound (tail checks: probability; CI/TV checks: the target δ;
    /// expectation check: the mean bound).
    pub theoretical: f64,
    /// Monte-Carlo slack added to the bound in the pass comparison.
    pub margin: f64,
    pub vacuous: bool,
    pub pass: bool,
}

impl TailCheckReport {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }
}

/// `2·exp(−2ε²n/(9·t_mix))`.
pub fn reward_tail_bound(epsilon: f64, n: usize, t_mix: usize) -> f64 {
    2.0 * (-2.0 * epsilon * epsilon * n as f64 / (9.0 * t_mix as f64)).exp()
}

/// `√(9·t_mix·ln(2/δ)/(2n))`.
pub fn reward_ci_radius(delta: f64, n: usize, t_mix: usize) -> f64 {
    (9.0 * t_mix as f64 * (2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// `√(38·S·t_mix·ln(2/δ)/n)`.
pub fn tv_radius(delta: f64, n: usize, num_states: usize, t_mix: usize) -> f64 {
    (38.0 * (num_states * t_mix) as f64 * (2.0 / delta).ln() / n as f64).sqrt()
}

/// `Σ_s min(√(8μ(s)/(n·β)), μ(s))`.
pub fn mean_tv_bound(mu: &[f64], n: usize, beta: f64) -> f64 {
    mu.iter()
        .map(|&m| (8.0 * m / (n as f64 * beta)).sqrt().min(m))
        .sum()
}

/// Half the width of the 99% Wilson score interval at the observed rate.
pub fn wilson_half_width(rate: f64, trials: usize) -> f64 {
    let m = trials as f64;
    let z2 = Z_99 * Z_99;
    Z_99 * (rate * (1.0 - rate) / m + z2 / (4.0 * m * m)).sqrt() / (1.0 + z2 / m)
}

/// Hoeffding 99% half-width `√(ln(2/0.01)/(2·trials))` for means of
/// [0,1]-bounded variables.
pub fn hoeffding_half_width(trials: usize) -> f64 {
    ((2.0 / MEAN_CONFIDENCE_DELTA).ln() / (2.0 * trials as f64)).sqrt()
}

/// Empirical state distribution of X_1..X_n started at `start`; one
/// transition draw per step.
fn empirical_distribution(
    chain: &TransitionMatrix,
    start: usize,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let mut stream = RngStream::new(seed);
    let mut counts = vec![0u64; chain.n()];
    let mut state = start;
    for _ in 0..n {
        state = categorical(chain.row(state), stream.next_f64());
        counts[state] += 1;
    }
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

/// Per-trial statistics, one f64 per trial, in trial order (deterministic
/// reduction afterwards regardless of scheduling).
fn per_trial<F: Fn(&[f64]) -> f64 + Sync>(
    spec: &TailCheckSpec,
    start: usize,
    statistic: F,
) -> Vec<f64> {
    (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let mu_hat =
                empirical_distribution(&spec.chain, start, spec.n, spec.seed ^ trial as u64);
            statistic(&mu_hat)
        })
        .collect()
}

/// Worst-start violation rate of `violation` over the spec's trials.
fn worst_rate<F: Fn(&[f64]) -> bool + Sync>(spec: &TailCheckSpec, violation: F) -> f64 {
    spec.start_states()
        .into_iter()
        .map(|start| {
            let hits = per_trial(spec, start, |mu_hat| violation(mu_hat) as u64 as f64);
            hits.iter().sum::<f64>() / spec.trials as f64
        })
        .fold(0.0, f64::max)
}

fn rate_report(
    spec: &TailCheckSpec,
    bound_kind: BoundKind,
    empirical: f64,
    theoretical: f64,
    vacuous: bool,
) -> TailCheckReport {
    let margin = wilson_half_width(empirical, spec.trials);
    TailCheckReport {
        bound_kind,
        n: spec.n,
        epsilon_or_delta: spec.epsilon_or_delta,
        trials: spec.trials,
        empirical,
        theoretical,
        margin,
        vacuous,
        pass: vacuous || empirical <= theoretical + margin,
    }
}

/// Tail check for the trajectory reward mean: frequency of
/// `|μ̂ⁿᵀr − ρ| ≥ ε` against `2·exp(−2ε²n/(9·t_mix))`.
pub fn check_reward_concentration(spec: &TailCheckSpec) -> Result<TailCheckReport, LabError> {
    spec.validate()?;
    let mu = stationary_distribution(&spec.chain)?;
    let t_mix = mixing_time(&spec.chain, &mu, DEFAULT_MIXING_CAP)?;
    let rho: f64 = mu.mass().iter().zip(&spec.rewards).map(|(m, r)| m * r).sum();
    let epsilon = spec.epsilon_or_delta;

    let rate = worst_rate(spec, |mu_hat| {
        let mean: f64 = mu_hat.iter().zip(&spec.rewards).map(|(m, r)| m * r).sum();
        (mean - rho).abs() >= epsilon
    });
    let bound = reward_tail_bound(epsilon, spec.n, t_mix);
    Ok(rate_report(
        spec,
        BoundKind::RewardMcdiarmid,
        rate,
        bound,
        bound >= 1.0,
    ))
}

/// Confidence-interval check: the radius `√(9·t_mix·ln(2/δ)/(2n))` is
/// violated with frequency ≤ δ.
pub fn check_reward_ci(spec: &TailCheckSpec) -> Result<TailCheckReport, LabError> {
    spec.validate()?;
    let mu = stationary_distribution(&spec.chain)?;
    let t_mix = mixing_time(&spec.chain, &mu, DEFAULT_MIXING_CAP)?;
    let rho: f64 = mu.mass().iter().zip(&spec.rewards).map(|(m, r)| m * r).sum();
    let delta = spec.epsilon_or_delta;
    let radius = reward_ci_radius(delta, spec.n, t_mix);

    let rate = worst_rate(spec, |mu_hat| {
        let mean: f64 = mu_hat.iter().zip(&spec.rewards).map(|(m, r)| m * r).sum();
        (mean - rho).abs() > radius
    });
    // Rewards live in [0,1], so a radius ≥ 1 can never be violated.
    Ok(rate_report(
        spec,
        BoundKind::RewardCi,
        rate,
        delta,
        radius >= 1.0 || delta >= 1.0,
    ))
}

/// Total-variation checks, returned as (tail, mean):
/// the frequency of `d_TV(μ, μ̂ⁿ)` exceeding `√(38·S·t_mix·ln(2/δ)/n)` is
/// ≤ δ, and the mean of `d_TV(μ, μ̂ⁿ)` is below the pseudo-spectral-gap
/// bound `Σ_s min(√(8μ(s)/(nβ)), μ(s))`.
pub fn check_tv_concentration(
    spec: &TailCheckSpec,
) -> Result<(TailCheckReport, TailCheckReport), LabError> {
    spec.validate()?;
    let mu = stationary_distribution(&spec.chain)?;
    let t_mix = mixing_time(&spec.chain, &mu, DEFAULT_MIXING_CAP)?;
    let beta = pseudo_spectral_gap(&spec.chain, &mu, 2 * t_mix)?;
    let delta = spec.epsilon_or_delta;
    let radius = tv_radius(delta, spec.n, spec.chain.n(), t_mix);

    let tail_rate = worst_rate(spec, |mu_hat| tv_slices(mu_hat, mu.mass()) > radius);
    let tail = rate_report(
        spec,
        BoundKind::TvConcentration,
        tail_rate,
        delta,
        radius >= 1.0 || delta >= 1.0,
    );

    let worst_mean = spec
        .start_states()
        .into_iter()
        .map(|start| {
            let tvs = per_trial(spec, start, |mu_hat| tv_slices(mu_hat, mu.mass()));
            tvs.iter().sum::<f64>() / spec.trials as f64
        })
        .fold(0.0, f64::max);
    let mean_bound = mean_tv_bound(mu.mass(), spec.n, beta);
    let margin = hoeffding_half_width(spec.trials);
    let vacuous = mean_bound >= 1.0;
    let mean = TailCheckReport {
        bound_kind: BoundKind::TvExpectation,
        n: spec.n,
        epsilon_or_delta: spec.epsilon_or_delta,
        trials: spec.trials,
        empirical: worst_mean,
        theoretical: mean_bound,
        margin,
        vacuous,
        pass: vacuous || worst_mean <= mean_bound + margin,
    };
    Ok((tail, mean))
}
