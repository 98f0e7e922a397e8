//! Enumerate every deterministic stationary policy of a small MDP, analyze
//! each induced chain exactly, and pick the best average reward.
//!
//! Run with: cargo run --example policy_enumeration

use osp_lab::chain::DEFAULT_MIXING_CAP;
use osp_lab::mdp::{analyze_mdp, enumerate_policies, generate_ergodic_mdp, MdpError, Policy};

fn main() {
    let m = generate_ergodic_mdp(3, 3, 11, 0.2).unwrap();
    let analysis = analyze_mdp(&m, DEFAULT_MIXING_CAP).unwrap();

    // Policy ids are base-A encodings of the action map with state 0 as
    // the least significant digit, so enumeration order is id order.
    println!("id  actions   rho       t_mix  beta");
    for policy in enumerate_policies(&m).unwrap() {
        let chain = &analysis.per_policy[policy.id() as usize];
        println!(
            "{:>2}  {:?}  {:.6}  {:>5}  {:.6}",
            policy.id(),
            policy.actions(),
            chain.avg_reward,
            chain.mixing_time,
            chain.pseudo_spectral_gap
        );
    }
    println!("optimal policy: {} with rho* = {:.6}", analysis.optimal_policy, analysis.rho_star);
    println!("mdp mixing time (max over policies): {}", analysis.mdp_mixing_time);
    println!("mu_min (min stationary mass): {:.6}", analysis.mu_min);

    // Round trip: id -> actions -> id.
    let p = Policy::from_id(analysis.optimal_policy, 3, 3);
    assert_eq!(p.id(), analysis.optimal_policy);

    // Exhaustive enumeration is refused once A^S passes a million; that
    // regime needs structure, not brute force.
    let huge = generate_ergodic_mdp(21, 2, 0, 0.5).unwrap();
    match enumerate_policies(&huge) {
        Err(MdpError::EnumerationLimit { count }) => {
            println!("21 states, 2 actions refused: {count} policies");
        }
        other => panic!("expected the enumeration guard, got {other:?}"),
    }
}
