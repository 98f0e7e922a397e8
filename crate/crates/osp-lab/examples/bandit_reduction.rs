//! With a single state the learner collapses to a batched UCB rule on a
//! multi-armed bandit: sample paths become per-arm reward histories, the
//! optimistic value becomes mean + exploration bonus, and phases become
//! pull batches. This example replays both on the same reward stream and
//! checks the pull sequences match step for step.
//!
//! Run with: cargo run --release --example bandit_reduction

use osp_lab::chain::DEFAULT_MIXING_CAP;
use osp_lab::mdp::{analyze_mdp, MdpModel, RewardKind};
use osp_lab::osp::{run_osp, OspConfig};
use osp_lab::rng::RngStream;

const ARM_MEANS: [f64; 3] = [0.3, 0.55, 0.5];
const HORIZON: usize = 10_000;
const DELTA: f64 = 0.05;
const SEED: u64 = 21;

/// Plain bandit implementation: no chains, no paths, just per-arm pull
/// counts and reward sums, batched like the phase loop. Rewards come from
/// the same two-draws-per-step stream the environment uses, first draw
/// discarded (it would pick the next state, but there is only one).
fn batched_ucb() -> Vec<usize> {
    let mut stream = RngStream::new(SEED);
    let mut pulls = [0usize; 3];
    let mut sums = [0.0f64; 3];
    let mut sequence = Vec::with_capacity(HORIZON);
    let batch_floor = (HORIZON as f64 / 3.0).sqrt().ceil() as usize;

    while sequence.len() < HORIZON {
        let t = sequence.len() + 1;
        // Strict comparison keeps the earliest maximizer on ties, matching
        // the learner's selection rule.
        let mut best = f64::NEG_INFINITY;
        let mut arm = 0;
        for a in 0..3 {
            let v = index_value(sums[a], pulls[a], t);
            if v > best {
                best = v;
                arm = a;
            }
        }
        let batch = pulls[arm].max(batch_floor).min(HORIZON - sequence.len());
        for _ in 0..batch {
            let _ = stream.next_f64();
            let reward = if stream.next_f64() < ARM_MEANS[arm] { 1.0 } else { 0.0 };
            pulls[arm] += 1;
            sums[arm] += reward;
            sequence.push(arm);
        }
    }
    sequence
}

fn index_value(sum: f64, pulls: usize, t: usize) -> f64 {
    if pulls == 0 {
        return f64::INFINITY;
    }
    let bonus = (8.0 * (8.0 * t as f64 * HORIZON as f64 / DELTA).ln() / pulls as f64).sqrt();
    sum / pulls as f64 + bonus
}

fn main() {
    // The same bandit dressed up as a one-state MDP: arms are actions,
    // the chain under every arm is the trivial loop.
    let m = MdpModel::new(
        1,
        3,
        vec![vec![vec![1.0]; 3]],
        vec![ARM_MEANS.to_vec()],
        RewardKind::Bernoulli,
    )
    .unwrap();
    let analysis = analyze_mdp(&m, DEFAULT_MIXING_CAP).unwrap();
    assert_eq!(analysis.mdp_mixing_time, 1);
    assert_eq!(analysis.rho_star, 0.55);

    let cfg = OspConfig::new(DELTA, HORIZON, 1, SEED);
    let result = run_osp(&m, &analysis, &cfg).unwrap();
    let ucb_sequence = batched_ucb();

    assert_eq!(result.actions, ucb_sequence, "pull sequences diverged");
    println!("pull sequences identical over {HORIZON} steps");

    let mut counts = [0usize; 3];
    for &arm in &result.actions {
        counts[arm] += 1;
    }
    for (arm, (count, mean)) in counts.iter().zip(ARM_MEANS).enumerate() {
        println!("arm {arm}: mean {mean:.2}, pulled {count} times");
    }
    println!("final regret: {:.2}", result.final_regret());
    println!("phases: {}", result.k_total);
}
