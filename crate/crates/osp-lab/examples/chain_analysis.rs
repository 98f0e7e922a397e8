//! Exact analysis of a two-state chain: stationary distribution, mixing
//! time, pseudo-spectral gap, and the relation 1/beta <= 2*t_mix.
//!
//! Run with: cargo run --example chain_analysis

use osp_lab::chain::{analyze_chain, tv_distance, Distribution, TransitionMatrix, DEFAULT_MIXING_CAP};

fn main() {
    // P = [[0.7, 0.3], [0.1, 0.9]]: flip to the other state w.p. 0.3 / 0.1.
    // The stationary distribution has the closed form (b, a)/(a+b).
    let p = TransitionMatrix::new(vec![vec![0.7, 0.3], vec![0.1, 0.9]]).unwrap();
    let analysis = analyze_chain(&p, &[1.0, 0.0], DEFAULT_MIXING_CAP).unwrap();

    let mu = analysis.stationary.mass();
    println!("stationary      = [{:.12}, {:.12}]", mu[0], mu[1]);
    assert!((mu[0] - 0.25).abs() < 1e-12 && (mu[1] - 0.75).abs() < 1e-12);

    // Average reward is the stationary mass on state 0 because the reward
    // vector is the indicator of state 0.
    println!("avg reward      = {:.12}", analysis.avg_reward);

    println!("mixing time     = {}", analysis.mixing_time);
    println!("pseudo gap beta = {:.12}", analysis.pseudo_spectral_gap);
    assert!(1.0 / analysis.pseudo_spectral_gap <= 2.0 * analysis.mixing_time as f64 + 1e-9);
    println!(
        "1/beta = {:.4} <= 2*t_mix = {}",
        1.0 / analysis.pseudo_spectral_gap,
        2 * analysis.mixing_time
    );

    // The mixing time is the first n where the worst-start TV distance to
    // stationarity drops to 1/4; watch it decay.
    let mut dist = Distribution::point_mass(2, 0);
    for n in 1..=analysis.mixing_time + 2 {
        let next: Vec<f64> = (0..2)
            .map(|j| (0..2).map(|i| dist.mass()[i] * p.row(i)[j]).sum())
            .collect();
        dist = Distribution::new(next).unwrap();
        let d = tv_distance(&dist, &analysis.stationary).unwrap();
        println!("  n={n}: tv from start 0 = {d:.6}");
    }

    // Same chain family, nearly periodic: a = b = 0.9 flips almost every
    // step, so TV decay is slow in absolute terms but still geometric.
    let flip = TransitionMatrix::new(vec![vec![0.1, 0.9], vec![0.9, 0.1]]).unwrap();
    let flip_analysis = analyze_chain(&flip, &[1.0, 0.0], DEFAULT_MIXING_CAP).unwrap();
    println!(
        "flip chain: t_mix = {}, beta = {:.4}",
        flip_analysis.mixing_time, flip_analysis.pseudo_spectral_gap
    );
    assert_eq!(flip_analysis.mixing_time, 4);
}
