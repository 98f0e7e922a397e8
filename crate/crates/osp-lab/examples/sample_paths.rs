//! Virtual sample paths: stitch one policy's trajectory out of a shared
//! observation log, reusing data gathered while running other policies.
//!
//! The walk starts at a chosen state and repeatedly consumes the earliest
//! unused log entry matching (current state, policy's action); it stops
//! when no such entry remains. The result is distributed exactly like a
//! fresh rollout of that policy, even though most steps were recorded
//! under different behavior.
//!
//! Run with: cargo run --example sample_paths

use osp_lab::mdp::{generate_ergodic_mdp, env_step, EnvState, Policy};
use osp_lab::sample_path::{
    construct_path, extend_path, path_reward_estimate, Observation, ObservationLog,
};

fn main() {
    let m = generate_ergodic_mdp(2, 2, 3, 0.15).unwrap();

    // Record 40 steps of round-robin behavior: whatever the environment
    // serves, actions alternate 0,1,0,1,...
    let mut log = ObservationLog::new(2, 2);
    let mut env = EnvState::new(0, 99);
    for t in 0..40 {
        let s = env.current_state();
        let a = t % 2;
        let (r, s_next) = env_step(&m, &mut env, a).unwrap();
        log.append(Observation { s, a, r, s_next, t });
    }

    // Now replay two different policies against the same log.
    for id in [0u64, 3] {
        let policy = Policy::from_id(id, 2, 2);
        let path = construct_path(&log, &policy, 0);
        path.verify_invariants(&log).unwrap();
        let (rho_hat, len) = path_reward_estimate(&path);
        println!(
            "policy {:?}: path length {len}, used log positions {:?}, rho_hat = {rho_hat:.3}",
            policy.actions(),
            path.used_positions()
        );
    }

    // Append more data and extend: the result is identical to rebuilding
    // from scratch, but only the new suffix of the log is scanned.
    let policy = Policy::from_id(3, 2, 2);
    let path = construct_path(&log, &policy, 0);
    for t in 40..80 {
        let s = env.current_state();
        let a = (t / 3) % 2;
        let (r, s_next) = env_step(&m, &mut env, a).unwrap();
        log.append(Observation { s, a, r, s_next, t });
    }
    let extended = extend_path(&path, &log).unwrap();
    let rebuilt = construct_path(&log, &policy, 0);
    assert_eq!(extended.used_positions(), rebuilt.used_positions());
    println!(
        "after 40 more observations: path grew {} -> {} steps (extension == rebuild)",
        path.len(),
        extended.len()
    );

    // The first steps of the path came from interleaved positions in the
    // log: virtual time and wall-clock time disagree.
    for obs in extended.steps().iter().take(5) {
        println!("  virtual step: s={} a={} r={} s_next={} (logged at t={})",
            obs.s, obs.a, obs.r, obs.s_next, obs.t);
    }
}
