//! Multi-seed experiment sweeps and their on-disk artifacts.
//!
//! A sweep runs one algorithm (the optimistic learner, the oracle that
//! plays the best stationary policy throughout, or a uniform-random
//! baseline) on one MDP for a list of seeds, in parallel, and reduces the
//! results into a summary comparable against the theory-side numbers.
//! Baselines share the environment stream discipline (two draws per step,
//! same seed derivation), so their curves are comparable step for step;
//! the random baseline draws its actions from a separate stream to keep
//! the environment draws aligned.
//!
//! Artifacts are plain CSV/JSON, byte-reproducible from (MDP, spec, seed):
//! per-seed trajectory and phase CSVs plus one `summary.json`.

use crate::mdp::{env_step, EnvState, MdpAnalysis, MdpModel, Policy};
use crate::osp::{
    phase_count_bound, phases_csv, regret_bound, run_osp, t_threshold, trajectory_csv, OspConfig,
    OspError, Reconstruction, RunResult, StartStateMode,
};
use crate::rng::RngStream;
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Salt for the random baseline's action stream; keeps action draws off
/// the environment stream so trajectories stay aligned across algorithms.
const ACTION_STREAM_SALT: u64 = 0x5EED_AC71_0A5A_17ED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Osp,
    Oracle,
    UniformRandom,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Osp => "osp",
            Algorithm::Oracle => "oracle",
            Algorithm::UniformRandom => "uniform_random",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "osp" => Ok(Algorithm::Osp),
            "oracle" => Ok(Algorithm::Oracle),
            "uniform_random" => Ok(Algorithm::UniformRandom),
            other => Err(format!(
                "unknown algorithm '{other}' (expected osp, oracle, or uniform_random)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmixMode {
    /// Feed the algorithm the true MDP mixing time from the analysis.
    Auto,
    /// Feed a caller-chosen value, e.g. to study misspecification.
    Override(usize),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub delta: f64,
    pub t_mix: TmixMode,
    pub seeds: Vec<u64>,
    pub initial_state: usize,
    pub path_start: StartStateMode,
    pub reconstruction: Reconstruction,
}

impl ExperimentSpec {
    pub fn new(algorithm: Algorithm, horizon: usize, delta: f64, seeds: Vec<u64>) -> Self {
        Self {
            algorithm,
            horizon,
            delta,
            t_mix: TmixMode::Auto,
            seeds,
            initial_state: 0,
            path_start: StartStateMode::Env,
            reconstruction: Reconstruction::Incremental,
        }
    }
}

/// Sweep reduction, serialized as `summary.json`. All statistics are
/// recomputable from the per-seed CSVs.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub algorithm: &'static str,
    pub horizon: usize,
    pub delta: f64,
    pub t_mix_used: usize,
    pub seeds: Vec<u64>,
    pub final_regrets: Vec<f64>,
    pub mean_final_regret: f64,
    /// Sample standard deviation (n − 1); zero for a single seed.
    pub stddev_final_regret: f64,
    pub regret_bound: f64,
    pub t_threshold_satisfied: bool,
    pub t_threshold_rhs: f64,
    /// Largest phase count over the sweep; absent for baselines.
    pub max_phase_count: Option<usize>,
    /// Phase-count bound; absent for baselines and for T ≤ S·A where it
    /// is undefined.
    pub phase_count_bound: Option<f64>,
}

impl SweepSummary {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serialization cannot fail");
        s.push('\n');
        s
    }
}

#[derive(Debug)]
pub struct Sweep {
    /// Per-seed results, in `seeds` order.
    pub runs: Vec<RunResult>,
    pub summary: SweepSummary,
}

fn finish_baseline(
    analysis: &MdpAnalysis,
    rewards: Vec<f64>,
    states: Vec<usize>,
    actions: Vec<usize>,
) -> RunResult {
    let mut regret_curve = Vec::with_capacity(rewards.len());
    let mut cumulative = 0.0;
    for (i, &r) in rewards.iter().enumerate() {
        cumulative += r;
        regret_curve.push((i + 1) as f64 * analysis.rho_star - cumulative);
    }
    let phase_of_step = vec![0; rewards.len()];
    RunResult {
        rewards,
        states,
        actions,
        phase_of_step,
        phases: Vec::new(),
        regret_curve,
        k_total: 0,
        k_minus: 0,
        k_plus: 0,
    }
}

/// Plays one fixed policy for the whole horizon.
pub fn run_fixed_policy(
    m: &MdpModel,
    analysis: &MdpAnalysis,
    policy: &Policy,
    horizon: usize,
    seed: u64,
    initial_state: usize,
) -> Result<RunResult, OspError> {
    let mut env = EnvState::new(initial_state, seed);
    let mut rewards = Vec::with_capacity(horizon);
    let mut states = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let s = env.current_state();
        let a = policy.action(s);
        let (r, _) = env_step(m, &mut env, a)?;
        rewards.push(r);
        states.push(s);
        actions.push(a);
    }
    Ok(finish_baseline(analysis, rewards, states, actions))
}

/// Picks a uniformly random action each step, from a stream salted away
/// from the environment's.
pub fn run_uniform_random(
    m: &MdpModel,
    analysis: &MdpAnalysis,
    horizon: usize,
    seed: u64,
    initial_state: usize,
) -> Result<RunResult, OspError> {
    let mut env = EnvState::new(initial_state, seed);
    let mut action_stream = RngStream::new(seed ^ ACTION_STREAM_SALT);
    let mut rewards = Vec::with_capacity(horizon);
    let mut states = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let s = env.current_state();
        let a = action_stream.next_index(m.num_actions());
        let (r, _) = env_step(m, &mut env, a)?;
        rewards.push(r);
        states.push(s);
        actions.push(a);
    }
    Ok(finish_baseline(analysis, rewards, states, actions))
}

/// Runs the sweep: one job per seed, in parallel, reduced in seed order.
pub fn run_experiment(
    m: &MdpModel,
    analysis: &MdpAnalysis,
    spec: &ExperimentSpec,
) -> Result<Sweep, OspError> {
    if spec.seeds.is_empty() {
        return Err(OspError::InvalidConfig {
            reason: "seed list must be nonempty".to_string(),
        });
    }
    let t_mix_used = match spec.t_mix {
        TmixMode::Auto => analysis.mdp_mixing_time,
        TmixMode::Override(v) => v,
    };

    let runs: Vec<RunResult> = spec
        .seeds
        .par_iter()
        .map(|&seed| match spec.algorithm {
            Algorithm::Osp => {
                let cfg = OspConfig {
                    delta: spec.delta,
                    horizon: spec.horizon,
                    t_mix_bound: t_mix_used,
                    seed,
                    initial_state: spec.initial_state,
                    path_start: spec.path_start,
                    reconstruction: spec.reconstruction,
                };
                run_osp(m, analysis, &cfg)
            }
            Algorithm::Oracle => {
                let policy = Policy::from_id(
                    analysis.optimal_policy,
                    m.num_states(),
                    m.num_actions(),
                );
                run_fixed_policy(m, analysis, &policy, spec.horizon, seed, spec.initial_state)
            }
            Algorithm::UniformRandom => {
                run_uniform_random(m, analysis, spec.horizon, seed, spec.initial_state)
            }
        })
        .collect::<Result<_, _>>()?;

    let final_regrets: Vec<f64> = runs.iter().map(|r| r.final_regret()).collect();
    let mean = final_regrets.iter().sum::<f64>() / final_regrets.len() as f64;
    let stddev = if final_regrets.len() < 2 {
        0.0
    } else {
        (final_regrets.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / (final_regrets.len() - 1) as f64)
            .sqrt()
    };
    let threshold = t_threshold(m, analysis, spec.horizon, spec.delta);
    let is_osp = spec.algorithm == Algorithm::Osp;
    let summary = SweepSummary {
        algorithm: spec.algorithm.name(),
        horizon: spec.horizon,
        delta: spec.delta,
        t_mix_used,
        seeds: spec.seeds.clone(),
        final_regrets,
        mean_final_regret: mean,
        stddev_final_regret: stddev,
        regret_bound: regret_bound(
            spec.horizon,
            t_mix_used,
            m.num_states(),
            m.num_actions(),
            spec.delta,
        ),
        t_threshold_satisfied: threshold.satisfied,
        t_threshold_rhs: threshold.rhs,
        max_phase_count: is_osp.then(|| runs.iter().map(|r| r.k_total).max().unwrap_or(0)),
        phase_count_bound: if is_osp {
            phase_count_bound(m.num_states(), m.num_actions(), spec.horizon as f64).ok()
        } else {
            None
        },
    };
    Ok(Sweep { runs, summary })
}

/// Writes `summary.json` plus per-seed `trajectory_seed<seed>.csv` and
/// `phases_seed<seed>.csv` (header-only for baselines) into `dir`,
/// creating it if needed. Returns the written paths in a fixed order.
pub fn write_sweep_artifacts(dir: &Path, sweep: &Sweep) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, sweep.summary.to_json_pretty())?;
    written.push(summary_path);
    for (seed, run) in sweep.summary.seeds.iter().zip(&sweep.runs) {
        let trajectory_path = dir.join(format!("trajectory_seed{seed}.csv"));
        fs::write(&trajectory_path, trajectory_csv(run))?;
        written.push(trajectory_path);
        let phases_path = dir.join(format!("phases_seed{seed}.csv"));
        fs::write(&phases_path, phases_csv(run))?;
        written.push(phases_path);
    }
    Ok(written)
}
