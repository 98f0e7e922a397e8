//! Multi-seed regret sweep: learner vs oracle vs uniform-random, with the
//! analytic bounds alongside for scale. Writes the same artifacts as the
//! CLI's `run` verb into ./out-regret-sweep/.
//!
//! Run with: cargo run --release --example regret_sweep

use osp_lab::chain::DEFAULT_MIXING_CAP;
use osp_lab::experiment::{run_experiment, write_sweep_artifacts, Algorithm, ExperimentSpec};
use osp_lab::mdp::{analyze_mdp, generate_ergodic_mdp};
use std::path::Path;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = generate_ergodic_mdp(2, 2, 7, 0.1)?;
    let analysis = analyze_mdp(&m, DEFAULT_MIXING_CAP)?;
    let seeds: Vec<u64> = (0..10).collect();
    let horizon = 50_000;

    println!("{:<15} {:>14} {:>14}", "algorithm", "mean regret", "stddev");
    for algorithm in [Algorithm::Osp, Algorithm::Oracle, Algorithm::UniformRandom] {
        let spec = ExperimentSpec::new(algorithm, horizon, 0.05, seeds.clone());
        let sweep = run_experiment(&m, &analysis, &spec)?;
        println!(
            "{:<15} {:>14.2} {:>14.2}",
            sweep.summary.algorithm,
            sweep.summary.mean_final_regret,
            sweep.summary.stddev_final_regret
        );
        if algorithm == Algorithm::Osp {
            println!(
                "{:<15} {:>14.2}   (per-seed high-probability bound)",
                "", sweep.summary.regret_bound
            );
            let files = write_sweep_artifacts(Path::new("out-regret-sweep"), &sweep)?;
            println!("wrote {} artifact files to out-regret-sweep/", files.len());
        }
    }

    // Scaling picture: the learner's regret should grow like sqrt(T), the
    // random baseline's linearly.
    println!("\n{:<10} {:>12} {:>14}", "horizon", "osp mean", "random mean");
    for horizon in [10_000, 40_000, 160_000] {
        let osp = run_experiment(
            &m,
            &analysis,
            &ExperimentSpec::new(Algorithm::Osp, horizon, 0.05, seeds.clone()),
        )?;
        let random = run_experiment(
            &m,
            &analysis,
            &ExperimentSpec::new(Algorithm::UniformRandom, horizon, 0.05, seeds.clone()),
        )?;
        println!(
            "{:<10} {:>12.2} {:>14.2}",
            horizon, osp.summary.mean_final_regret, random.summary.mean_final_regret
        );
    }
    Ok(())
}
