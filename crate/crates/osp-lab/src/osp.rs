//! Phase-based optimistic control over sample paths, with the analytic
//! quantities used to judge runs (regret bound, horizon threshold,
//! phase-count bound).
//!
//! Each phase evaluates every policy on its own non-extendible sample path
//! through the shared observation log: the optimistic value is the path's
//! mean reward plus the confidence radius `√(8·t_mix·ln(8tT/δ)/n)`, infinite
//! while the path is empty. The best optimistic policy runs for
//! `n_k = max(n_{<k}, ⌈√(T/(S·A))⌉)` steps (truncated at the horizon), its
//! observations are appended to the log, and the loop repeats. Regret is
//! accounted against the best stationary policy's average reward; the true
//! analysis is never shown to the algorithm, which sees only the mixing-time
//! bound it is configured with.

use crate::mdp::{
    enumerate_policies, env_step, EnvState, MdpAnalysis, MdpError, MdpModel, PolicyId,
};
use crate::sample_path::{
    construct_path, extend_path_trusted, path_reward_estimate, Observation, ObservationLog,
    SamplePath,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OspError {
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },
    #[error("phase-count bound needs T > S*A, got T = {t} with S*A = {sa}")]
    PhaseCountDomain { t: f64, sa: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

fn bad_config(reason: impl Into<String>) -> OspError {
    OspError::InvalidConfig {
        reason: reason.into(),
    }
}

/// Where each policy's sample path starts when first constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartStateMode {
    /// The environment's current state at first construction (phase 1,
    /// before any step, so the run's initial state). Paths persist across
    /// phases, so the start is pinned then and extension stays valid.
    Env,
    /// A fixed state, for reproducible unit fixtures.
    Fixed(usize),
}

/// Incremental extension is the production mode; from-scratch
/// reconstruction every phase is the oracle it must match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reconstruction {
    Incremental,
    Scratch,
}

#[derive(Debug, Clone)]
pub struct OspConfig {
    /// Confidence parameter δ ∈ (0,1).
    pub delta: f64,
    /// Horizon T: exact number of environment steps to take.
    pub horizon: usize,
    /// Mixing-time upper bound fed to the confidence radius.
    pub t_mix_bound: usize,
    pub seed: u64,
    /// Environment's physical start state.
    pub initial_state: usize,
    pub path_start: StartStateMode,
    pub reconstruction: Reconstruction,
}

impl OspConfig {
    pub fn new(delta: f64, horizon: usize, t_mix_bound: usize, seed: u64) -> Self {
        Self {
            delta,
            horizon,
            t_mix_bound,
            seed,
            initial_state: 0,
            path_start: StartStateMode::Env,
            reconstruction: Reconstruction::Incremental,
        }
    }

    fn validate(&self, m: &MdpModel) -> Result<(), OspError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(bad_config(format!("delta {} outside (0,1)", self.delta)));
        }
        if self.horizon == 0 {
            return Err(bad_config("horizon must be at least 1"));
        }
        if self.t_mix_bound == 0 {
            return Err(bad_config("t_mix_bound must be at least 1"));
        }
        if self.initial_state >= m.num_states() {
            return Err(bad_config(format!(
                "initial state {} out of range for {} states",
                self.initial_state,
                m.num_states()
            )));
        }
        if let StartStateMode::Fixed(s) = self.path_start {
            if s >= m.num_states() {
                return Err(bad_config(format!(
                    "path start state {s} out of range for {} states",
                    m.num_states()
                )));
            }
        }
        Ok(())
    }
}

/// Bookkeeping for one phase.
#[derive(Debug, Clone)]
pub struct PhaseRecord {
    /// 1-based phase index.
    pub k: usize,
    pub policy: PolicyId,
    /// Path length of the chosen policy at selection time (n_{<k}).
    pub n_prev: usize,
    /// Planned length n_k = max(n_prev, ⌈√(T/(S·A))⌉).
    pub n_planned: usize,
    /// Actually executed steps (n_planned unless the horizon intervenes).
    pub n_executed: usize,
    /// Path mean of the chosen policy; NaN while the path is empty.
    pub rho_hat: f64,
    /// Optimistic value of the chosen policy; +∞ iff n_prev = 0.
    pub rho_tilde: f64,
    /// Global time of the phase's first step, 1-based.
    pub start_t: usize,
}

/// Full trajectory and phase record of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub rewards: Vec<f64>,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    /// Phase index of each step, parallel to `rewards`.
    pub phase_of_step: Vec<usize>,
    pub phases: Vec<PhaseRecord>,
    /// Cumulative regret t·ρ* − Σ_{i≤t} r_i at each t.
    pub regret_curve: Vec<f64>,
    pub k_total: usize,
    /// Phases that lengthened their policy's path: n_planned > n_prev.
    pub k_minus: usize,
    pub k_plus: usize,
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        *self.regret_curve.last().expect("runs take at least one step")
    }
}

/// Optimistic value `ρ̂ + √(8·t_mix·ln(8tT/δ)/n)`, natural log; +∞ while the
/// path is empty. `t` is the 1-based global step count at evaluation.
pub fn optimistic_value(rho_hat: f64, n: usize, t: usize, cfg: &OspConfig) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let radius = (8.0 * cfg.t_mix_bound as f64
        * (8.0 * t as f64 * cfg.horizon as f64 / cfg.delta).ln()
        / n as f64)
        .sqrt();
    rho_hat + radius
}

/// Argmax over policy ids; ties, including among +∞, go to the smallest id.
pub fn select_policy(values: &[f64]) -> PolicyId {
    debug_assert!(!values.is_empty());
    let mut best = f64::NEG_INFINITY;
    let mut best_id = 0;
    for (id, &v) in values.iter().enumerate() {
        debug_assert!(!v.is_nan());
        if v > best {
            best = v;
            best_id = id;
        }
    }
    best_id as PolicyId
}

/// Smallest n ≥ 1 with n²·S·A ≥ T, i.e. ⌈√(T/(S·A))⌉ without float-boundary
/// surprises.
fn ceil_sqrt_ratio(t: u64, denom: u64) -> usize {
    let mut n = ((t as f64 / denom as f64).sqrt().floor() as u64).max(1);
    while n > 1 && (n - 1) as u128 * (n - 1) as u128 * denom as u128 >= t as u128 {
        n -= 1;
    }
    while (n as u128) * (n as u128) * (denom as u128) < t as u128 {
        n += 1;
    }
    n as usize
}

/// Planned phase length `max(n_prev, ⌈√(T/(S·A))⌉)`.
pub fn phase_length(n_prev: usize, cfg: &OspConfig, num_states: usize, num_actions: usize) -> usize {
    n_prev.max(ceil_sqrt_ratio(
        cfg.horizon as u64,
        (num_states * num_actions) as u64,
    ))
}

/// Runs the full phase loop for exactly `cfg.horizon` environment steps.
/// `analysis` is used only to account regret against ρ*; the algorithm's
/// decisions depend on the log, the config, and nothing else.
pub fn run_osp(
    m: &MdpModel,
    analysis: &MdpAnalysis,
    cfg: &OspConfig,
) -> Result<RunResult, OspError> {
    cfg.validate(m)?;
    let policies = enumerate_policies(m)?;
    let num_states = m.num_states();
    let num_actions = m.num_actions();
    let horizon = cfg.horizon;

    let mut env = EnvState::new(cfg.initial_state, cfg.seed);
    let mut log = ObservationLog::new(num_states, num_actions);
    let pinned_start = match cfg.path_start {
        StartStateMode::Env => env.current_state(),
        StartStateMode::Fixed(s) => s,
    };
    let mut paths: Vec<SamplePath> = policies
        .par_iter()
        .map(|p| construct_path(&log, p, pinned_start))
        .collect();

    let mut rewards = Vec::with_capacity(horizon);
    let mut states = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut phase_of_step = Vec::with_capacity(horizon);
    let mut phases = Vec::new();

    let mut steps_taken = 0usize;
    let mut k = 0usize;
    while steps_taken < horizon {
        k += 1;
        if k > 1 {
            match cfg.reconstruction {
                Reconstruction::Incremental => {
                    paths
                        .par_iter_mut()
                        .for_each(|path| extend_path_trusted(path, &log));
                }
                Reconstruction::Scratch => {
                    paths = policies
                        .par_iter()
                        .map(|p| construct_path(&log, p, pinned_start))
                        .collect();
                }
            }
        }

        let t = steps_taken + 1;
        let estimates: Vec<(f64, usize)> = paths.iter().map(path_reward_estimate).collect();
        let values: Vec<f64> = estimates
            .iter()
            .map(|&(rho_hat, n)| optimistic_value(rho_hat, n, t, cfg))
            .collect();
        let chosen = select_policy(&values);
        let (rho_hat, n_prev) = estimates[chosen as usize];
        let rho_tilde = values[chosen as usize];
        let n_planned = phase_length(n_prev, cfg, num_states, num_actions);
        let n_executed = n_planned.min(horizon - steps_taken);

        let policy = &policies[chosen as usize];
        for _ in 0..n_executed {
            let s = env.current_state();
            let a = policy.action(s);
            let (r, s_next) = env_step(m, &mut env, a)?;
            steps_taken += 1;
            log.append(Observation {
                s,
                a,
                r,
                s_next,
                t: steps_taken,
            });
            rewards.push(r);
            states.push(s);
            actions.push(a);
            phase_of_step.push(k);
        }

        phases.push(PhaseRecord {
            k,
            policy: chosen,
            n_prev,
            n_planned,
            n_executed,
            rho_hat,
            rho_tilde,
            start_t: t,
        });
    }

    let mut regret_curve = Vec::with_capacity(horizon);
    let mut cumulative = 0.0;
    for (i, &r) in rewards.iter().enumerate() {
        cumulative += r;
        regret_curve.push((i + 1) as f64 * analysis.rho_star - cumulative);
    }

    let k_minus = phases.iter().filter(|p| p.n_planned > p.n_prev).count();
    Ok(RunResult {
        rewards,
        states,
        actions,
        phase_of_step,
        k_total: phases.len(),
        k_minus,
        k_plus: phases.len() - k_minus,
        phases,
        regret_curve,
    })
}

/// Regret bound `4·ln(8T²/δ)·√(t_mix·S·A·T)`.
pub fn regret_bound(horizon: usize, t_mix: usize, num_states: usize, num_actions: usize, delta: f64) -> f64 {
    let t = horizon as f64;
    4.0 * (8.0 * t * t / delta).ln() * ((t_mix * num_states * num_actions) as f64 * t).sqrt()
}

/// The horizon threshold under which the regret bound is proven:
/// `T ≥ S³·A·(152·t_mix·ln(8T²/δ)/μ_min²)²`.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdCheck {
    pub satisfied: bool,
    /// The right-hand side the horizon is compared against.
    pub rhs: f64,
}

pub fn t_threshold(
    m: &MdpModel,
    analysis: &MdpAnalysis,
    horizon: usize,
    delta: f64,
) -> ThresholdCheck {
    let t = horizon as f64;
    let s = m.num_states() as f64;
    let a = m.num_actions() as f64;
    let inner = 152.0 * analysis.mdp_mixing_time as f64 * (8.0 * t * t / delta).ln()
        / (analysis.mu_min * analysis.mu_min);
    let rhs = s.powi(3) * a * inner * inner;
    ThresholdCheck {
        satisfied: t >= rhs,
        rhs,
    }
}

/// Phase-count bound `S·A·log_{4/3}(T/(S·A))`; defined only for T > S·A.
pub fn phase_count_bound(num_states: usize, num_actions: usize, horizon: f64) -> Result<f64, OspError> {
    let sa = num_states * num_actions;
    if horizon <= sa as f64 {
        return Err(OspError::PhaseCountDomain { t: horizon, sa });
    }
    Ok(sa as f64 * (horizon / sa as f64).ln() / (4.0f64 / 3.0).ln())
}

fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        // f64 Display renders infinity as "inf" and finite values in
        // shortest-roundtrip form; both are part of the file contract.
        x.to_string()
    }
}

/// Per-phase CSV: `k,policy_id,n_prev,n_planned,n_executed,rho_hat,rho_tilde,start_t`.
pub fn phases_csv(result: &RunResult) -> String {
    let mut out = String::from("k,policy_id,n_prev,n_planned,n_executed,rho_hat,rho_tilde,start_t\n");
    for p in &result.phases {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.k,
            p.policy,
            p.n_prev,
            p.n_planned,
            p.n_executed,
            fmt_real(p.rho_hat),
            fmt_real(p.rho_tilde),
            p.start_t
        ));
    }
    out
}

/// Per-step CSV: `t,s,a,r,cumulative_regret,phase_k`.
pub fn trajectory_csv(result: &RunResult) -> String {
    let mut out = String::from("t,s,a,r,cumulative_regret,phase_k\n");
    for i in 0..result.rewards.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i + 1,
            result.states[i],
            result.actions[i],
            fmt_real(result.rewards[i]),
            fmt_real(result.regret_curve[i]),
            result.phase_of_step[i]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::DEFAULT_MIXING_CAP;
    use crate::mdp::{analyze_mdp, generate_ergodic_mdp, MdpModel, RewardKind};

    fn cfg(delta: f64, horizon: usize, t_mix: usize, seed: u64) -> OspConfig {
        OspConfig::new(delta, horizon, t_mix, seed)
    }

    #[test]
    fn optimistic_value_is_infinite_on_empty_paths() {
        assert_eq!(optimistic_value(f64::NAN, 0, 1, &cfg(0.05, 10, 1, 0)), f64::INFINITY);
    }

    #[test]
    fn optimistic_value_zero_log_corner() {
        // delta = 8 makes ln(8tT/delta) = ln 1 = 0; permissible only here.
        let c = cfg(8.0, 1, 1, 0);
        assert_eq!(optimistic_value(0.4, 5, 1, &c), 0.4);
    }

    #[test]
    fn optimistic_value_unit_radius_case() {
        // ln(8*1*1/(8/e)) = 1 and sqrt(8*1*1/8) = 1.
        let c = cfg(8.0 / std::f64::consts::E, 1, 1, 0);
        let v = optimistic_value(0.25, 8, 1, &c);
        assert!((v - 1.25).abs() < 1e-12, "{v}");
    }

    #[test]
    fn select_policy_breaks_ties_low() {
        assert_eq!(select_policy(&[f64::INFINITY, f64::INFINITY]), 0);
        assert_eq!(select_policy(&[0.3, 0.7, 0.7]), 1);
        assert_eq!(select_policy(&[0.9]), 0);
    }

    #[test]
    fn phase_length_examples() {
        assert_eq!(phase_length(0, &cfg(0.05, 4, 1, 0), 2, 2), 1);
        assert_eq!(phase_length(7, &cfg(0.05, 4, 1, 0), 2, 2), 7);
        assert_eq!(phase_length(3, &cfg(0.05, 400, 1, 0), 2, 2), 10);
        assert_eq!(phase_length(50, &cfg(0.05, 400, 1, 0), 2, 2), 50);
        // ceil(sqrt(10000/3)) = ceil(57.73...) = 58.
        assert_eq!(phase_length(0, &cfg(0.05, 10_000, 1, 0), 1, 3), 58);
        // Perfect square boundary: ceil(sqrt(10000/4)) = 50 exactly.
        assert_eq!(phase_length(0, &cfg(0.05, 10_000, 1, 0), 2, 2), 50);
    }

    #[test]
    fn regret_bound_arithmetic_and_monotonicity() {
        let b = regret_bound(10_000, 1, 2, 2, 0.05);
        let direct = 4.0 * (8.0 * 1e8 / 0.05f64).ln() * 200.0;
        assert!((b - direct).abs() < 1e-9);
        assert!((b - 18_796.0).abs() < 10.0, "{b}");

        // Quadrupling T doubles the sqrt factor; the log factor grows, so
        // the ratio sits at 2·ln(8·16T²/δ)/ln(8T²/δ) exactly.
        let b4 = regret_bound(40_000, 1, 2, 2, 0.05);
        let ratio = b4 / b;
        assert!(ratio > 2.0);
        let log_ratio = 2.0 * (8.0 * 16e8 / 0.05f64).ln() / (8.0 * 1e8 / 0.05f64).ln();
        assert!((ratio - log_ratio).abs() < 1e-12);
        assert!(regret_bound(10_000, 1, 2, 2, 0.01) > b);
    }

    #[test]
    fn phase_count_bound_examples() {
        assert!((phase_count_bound(1, 1, 4.0 / 3.0).unwrap() - 1.0).abs() < 1e-12);
        let b = phase_count_bound(2, 2, 400.0).unwrap();
        let direct = 4.0 * (100.0f64).ln() / (4.0f64 / 3.0).ln();
        assert!((b - direct).abs() < 1e-12);
        assert!((b - 64.03).abs() < 0.01, "{b}");
        assert!(phase_count_bound(2, 2, 800.0).unwrap() > b);
        assert!(matches!(
            phase_count_bound(2, 2, 4.0),
            Err(OspError::PhaseCountDomain { .. })
        ));
    }

    #[test]
    fn threshold_fails_at_desk_scale_and_substitutes_cleanly() {
        let m = generate_ergodic_mdp(2, 2, 7, 0.1).unwrap();
        let analysis = analyze_mdp(&m, DEFAULT_MIXING_CAP).unwrap();
        let check = t_threshold(&m, &analysis, 10, 0.05);
        assert!(!check.satisfied);
        assert!(check.rhs > 10.0);

        // S = 1 forces mu_min = 1, so rhs = A * (152 * t_mix * ln(8T^2/d))^2.
        let bandit = generate_ergodic_mdp(1, 3, 1, 0.1).unwrap();
        let bandit_analysis = analyze_mdp(&bandit, DEFAULT_MIXING_CAP).unwrap();
        assert_eq!(bandit_analysis.mu_min, 1.0);
        let check = t_threshold(&bandit, &bandit_analysis, 1000, 0.1);
        let inner = 152.0 * (8.0 * 1e6 / 0.1f64).ln();
        assert!((check.rhs - 3.0 * inner * inner).abs() < 1e-6);
    }

    fn tiny_fixture() -> (MdpModel, MdpAnalysis) {
        let m = generate_ergodic_mdp(2, 2, 7, 0.1).unwrap();
        let analysis = analyze_mdp(&m, DEFAULT_MIXING_CAP).unwrap();
        (m, analysis)
    }

    #[test]
    fn single_action_mdp_has_no_choice() {
        let m = MdpModel::new(
            2,
            1,
            vec![vec![vec![0.3, 0.7]], vec![vec![0.6, 0.4]]],
            vec![vec![1.0], vec![0.0]],
            RewardKind::Deterministic,
        )
        .unwrap();
        let analysis = analyze_mdp(&m, DEFAULT_MIXING_CAP).unwrap();
        let result = run_osp(&m, &analysis, &cfg(0.05, 500, analysis.mdp_mixing_time, 3)).unwrap();
        assert!(result.phases.iter().all(|p| p.policy == 0));
        let total: f64 = result.rewards.iter().sum();
        assert_eq!(result.final_regret(), 500.0 * analysis.rho_star - total);
    }

    #[test]
    fn phase_accounting_invariants_hold() {
        let (m, analysis) = tiny_fixture();
        let c = cfg(0.05, 2000, analysis.mdp_mixing_time, 11);
        let result = run_osp(&m, &analysis, &c).unwrap();

        let executed: usize = result.phases.iter().map(|p| p.n_executed).sum();
        assert_eq!(executed, 2000);
        assert_eq!(result.k_total, result.k_minus + result.k_plus);

        let floor = phase_length(0, &c, 2, 2);
        for (i, p) in result.phases.iter().enumerate() {
            assert_eq!(p.k, i + 1);
            assert_eq!(p.n_planned, p.n_prev.max(floor));
            assert_eq!(p.rho_tilde.is_infinite(), p.n_prev == 0);
            assert_eq!(p.rho_hat.is_nan(), p.n_prev == 0);
            if p.n_prev > 0 {
                assert!(p.rho_tilde >= p.rho_hat);
            }
            let is_last = i + 1 == result.phases.len();
            if !is_last {
                assert_eq!(p.n_executed, p.n_planned);
            }
        }

        // First phase: empty log, every value infinite, smallest id wins.
        assert_eq!(result.phases[0].policy, 0);
        assert_eq!(result.phases[0].start_t, 1);
    }

    #[test]
    fn incremental_extension_matches_scratch_rebuilds() {
        let (m, analysis) = tiny_fixture();
        let mut c = cfg(0.05, 3000, analysis.mdp_mixing_time, 5);
        let fast = run_osp(&m, &analysis, &c).unwrap();
        c.reconstruction = Reconstruction::Scratch;
        let slow = run_osp(&m, &analysis, &c).unwrap();
        assert_eq!(format!("{fast:?}"), format!("{slow:?}"));
    }

    #[test]
    fn runs_are_deterministic() {
        let (m, analysis) = tiny_fixture();
        let c = cfg(0.05, 1500, analysis.mdp_mixing_time, 9);
        let a = run_osp(&m, &analysis, &c).unwrap();
        let b = run_osp(&m, &analysis, &c).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(phases_csv(&a), phases_csv(&b));
        assert_eq!(trajectory_csv(&a), trajectory_csv(&b));
    }

    #[test]
    fn regret_identity_is_exact() {
        let (m, analysis) = tiny_fixture();
        let result = run_osp(&m, &analysis, &cfg(0.1, 800, analysis.mdp_mixing_time, 2)).unwrap();
        let total: f64 = result.rewards.iter().sum();
        assert_eq!(result.final_regret(), 800.0 * analysis.rho_star - total);
        assert_eq!(result.regret_curve.len(), 800);
    }

    #[test]
    fn csv_headers_and_infinity_rendering() {
        let (m, analysis) = tiny_fixture();
        let result = run_osp(&m, &analysis, &cfg(0.05, 60, analysis.mdp_mixing_time, 1)).unwrap();
        let phases = phases_csv(&result);
        let mut lines = phases.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,policy_id,n_prev,n_planned,n_executed,rho_hat,rho_tilde,start_t"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,0,0,"), "{first}");
        assert!(first.contains(",nan,inf,"), "{first}");

        let trajectory = trajectory_csv(&result);
        assert_eq!(
            trajectory.lines().next().unwrap(),
            "t,s,a,r,cumulative_regret,phase_k"
        );
        assert_eq!(trajectory.lines().count(), 61);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let (m, analysis) = tiny_fixture();
        assert!(run_osp(&m, &analysis, &cfg(0.0, 10, 1, 0)).is_err());
        assert!(run_osp(&m, &analysis, &cfg(1.0, 10, 1, 0)).is_err());
        assert!(run_osp(&m, &analysis, &cfg(0.05, 0, 1, 0)).is_err());
        assert!(run_osp(&m, &analysis, &cfg(0.05, 10, 0, 0)).is_err());
        let mut c = cfg(0.05, 10, 1, 0);
        c.initial_state = 2;
        assert!(run_osp(&m, &analysis, &c).is_err());
        let mut c = cfg(0.05, 10, 1, 0);
        c.path_start = StartStateMode::Fixed(5);
        assert!(run_osp(&m, &analysis, &c).is_err());
    }
}
