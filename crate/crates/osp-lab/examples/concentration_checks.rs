//! Monte-Carlo verification of the finite-sample bounds the learner's
//! bonus rests on: reward-mean tails, the CI radius, and empirical-measure
//! TV concentration, all from single trajectories of a mixing chain.
//!
//! Run with: cargo run --release --example concentration_checks

use osp_lab::chain::TransitionMatrix;
use osp_lab::concentration::{
    check_reward_ci, check_reward_concentration, check_tv_concentration, StartMode, TailCheckSpec,
};

fn spec(n: usize, epsilon_or_delta: f64) -> TailCheckSpec {
    TailCheckSpec {
        chain: TransitionMatrix::new(vec![vec![0.7, 0.3], vec![0.1, 0.9]]).unwrap(),
        rewards: vec![0.9, 0.2],
        start: StartMode::WorstCase,
        n,
        epsilon_or_delta,
        trials: 20_000,
        seed: 12,
    }
}

fn main() {
    // Tail of the empirical average reward around its stationary value.
    // At n = 200 the bound is vacuous (>= 1); at n = 4000 it bites.
    for n in [200, 4000] {
        let report = check_reward_concentration(&spec(n, 0.1)).unwrap();
        println!(
            "reward tail   n={n:<5} empirical={:.4} bound={:.4} vacuous={} pass={}",
            report.empirical, report.theoretical, report.vacuous, report.pass
        );
    }

    // The same inequality inverted into a confidence radius: the miss rate
    // must stay below delta. In practice it is far below; the constants
    // are worst-case over all chains with this mixing time.
    let report = check_reward_ci(&spec(2000, 0.05)).unwrap();
    println!(
        "reward CI     n=2000  miss rate={:.4} <= delta={:.2} (+{:.4} MC margin)",
        report.empirical, report.theoretical, report.margin
    );
    assert!(report.pass);

    // Empirical state-occupancy measure: tail of its TV distance to the
    // stationary distribution, and the mean-TV bound.
    let (tail, mean) = check_tv_concentration(&spec(2000, 0.05)).unwrap();
    println!(
        "tv tail       n=2000  miss rate={:.4} <= delta={:.2} (radius vacuous: {})",
        tail.empirical, tail.theoretical, tail.vacuous
    );
    println!(
        "tv mean       n=2000  worst-start mean={:.4} <= bound={:.4}",
        mean.empirical, mean.theoretical
    );
    assert!(tail.pass && mean.pass);

    // Serialized report, as written by the CLI's concentration verb.
    println!("\n{}", mean.to_json_pretty());
}
