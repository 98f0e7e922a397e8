//! Thin command-line front end over the library. Four verbs: `generate`
//! (make and validate a random MDP), `analyze` (exact per-policy chain
//! analysis), `run` (single runs or multi-seed sweeps of the learner and
//! baselines), and `concentration` (Monte-Carlo tail checks).
//!
//! Exit codes are a stable contract for CI: 0 success, 1 usage error,
//! 2 validation failure, 3 a non-vacuous concentration check failed.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use osp_lab::chain::DEFAULT_MIXING_CAP;
use osp_lab::concentration::{
    check_reward_ci, check_reward_concentration, check_tv_concentration, StartMode,
    TailCheckReport, TailCheckSpec,
};
use osp_lab::experiment::{
    run_experiment, write_sweep_artifacts, Algorithm, ExperimentSpec, TmixMode,
};
use osp_lab::mdp::{
    analyze_mdp, enumerate_policies, generate_ergodic_mdp, induced_chain, validate_mdp, MdpModel,
};
use osp_lab::osp::{regret_bound, t_threshold, Reconstruction, StartStateMode};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "osp-lab",
    version,
    about = "Tabular average-reward RL laboratory: exact chain analysis, an optimistic sample-path learner, and Monte-Carlo concentration checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random uniformly ergodic MDP and write it as JSON.
    Generate(GenerateArgs),
    /// Validate an MDP file and print the exact per-policy analysis.
    Analyze(AnalyzeArgs),
    /// Run the learner or a baseline over one or more seeds.
    Run(RunArgs),
    /// Monte-Carlo tail checks on the MDP's optimal-policy chain.
    Concentration(ConcentrationArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of states.
    #[arg(long)]
    states: usize,
    /// Number of actions.
    #[arg(long)]
    actions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mixing weight toward the uniform kernel, in (0, 1].
    #[arg(long, default_value_t = 0.1)]
    smoothing: f64,
    /// Output file for the MDP JSON.
    #[arg(long, default_value = "mdp.json")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// MDP JSON file.
    #[arg(long)]
    mdp: PathBuf,
    /// Horizon used for the regret bound and horizon threshold.
    #[arg(long, default_value_t = 100_000)]
    horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Optional file for the analysis report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// MDP JSON file.
    #[arg(long)]
    mdp: PathBuf,
    /// osp, oracle, or uniform_random.
    #[arg(long, default_value = "osp", value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long, default_value_t = 100_000)]
    horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Mixing-time bound fed to the learner: "auto" or an integer.
    #[arg(long, default_value = "auto", value_parser = parse_tmix)]
    tmix: TmixMode,
    /// Single seed; exclusive with --seeds.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory for per-seed CSVs and summary.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// "env" starts sample paths from the run's initial state; "fixed:<s>"
    /// pins them to state s.
    #[arg(long, default_value = "env", value_parser = parse_start_state)]
    start_state: StartStateMode,
    /// "incremental" extends stored paths; "scratch" rebuilds each phase.
    #[arg(long, default_value = "incremental", value_parser = parse_reconstruction)]
    reconstruct_paths: Reconstruction,
}

#[derive(Args)]
struct ConcentrationArgs {
    /// MDP JSON file; checks run on its optimal policy's chain.
    #[arg(long)]
    mdp: PathBuf,
    /// Trajectory length per trial.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Deviation for the reward tail check.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Failure probability for the CI and TV checks.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// "env" sweeps every start state (worst case); "fixed:<s>" checks one.
    #[arg(long, default_value = "env", value_parser = parse_concentration_start)]
    start_state: StartMode,
    /// Output directory for the report JSONs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_tmix(s: &str) -> Result<TmixMode, String> {
    if s == "auto" {
        return Ok(TmixMode::Auto);
    }
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(TmixMode::Override(v)),
        _ => Err(format!("expected \"auto\" or an integer >= 1, got '{s}'")),
    }
}

fn parse_fixed(s: &str) -> Option<usize> {
    s.strip_prefix("fixed:").and_then(|rest| rest.parse().ok())
}

fn parse_start_state(s: &str) -> Result<StartStateMode, String> {
    if s == "env" {
        return Ok(StartStateMode::Env);
    }
    parse_fixed(s)
        .map(StartStateMode::Fixed)
        .ok_or_else(|| format!("expected \"env\" or \"fixed:<state>\", got '{s}'"))
}

fn parse_concentration_start(s: &str) -> Result<StartMode, String> {
    if s == "env" {
        return Ok(StartMode::WorstCase);
    }
    parse_fixed(s)
        .map(StartMode::Fixed)
        .ok_or_else(|| format!("expected \"env\" or \"fixed:<state>\", got '{s}'"))
}

fn parse_reconstruction(s: &str) -> Result<Reconstruction, String> {
    match s {
        "incremental" => Ok(Reconstruction::Incremental),
        "scratch" => Ok(Reconstruction::Scratch),
        other => Err(format!(
            "expected \"incremental\" or \"scratch\", got '{other}'"
        )),
    }
}

/// Post-parse failures: 2 for anything wrong with inputs, 3 for a failed
/// non-vacuous concentration check.
struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }

    fn check(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 3,
        }
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::validation(e.to_string())
    }
}

fn load_mdp(path: &Path) -> Result<MdpModel, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
    MdpModel::from_json_str(&text)
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

/// Loads, then rejects the MDP unless every policy's chain is uniquely
/// ergodic and aperiodic.
fn load_validated_mdp(path: &Path) -> Result<MdpModel, Failure> {
    let m = load_mdp(path)?;
    let violations = validate_mdp(&m)?;
    if let Some((policy, violation)) = violations.first() {
        return Err(Failure::validation(format!(
            "{}: policy {policy}: {violation}",
            path.display()
        )));
    }
    Ok(m)
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let m = generate_ergodic_mdp(args.states, args.actions, args.seed, args.smoothing)?;
    fs::write(&args.out, m.to_json_pretty())
        .map_err(|e| Failure::validation(format!("cannot write {}: {e}", args.out.display())))?;
    println!(
        "wrote {} ({} states, {} actions, seed {}, smoothing {})",
        args.out.display(),
        args.states,
        args.actions,
        args.seed,
        args.smoothing
    );
    let violations = validate_mdp(&m)?;
    if violations.is_empty() {
        println!(
            "validation: all {} policies uniquely ergodic and aperiodic",
            m.policy_count()
        );
        Ok(())
    } else {
        for (policy, violation) in &violations {
            eprintln!("policy {policy}: {violation}");
        }
        Err(Failure::validation(format!(
            "{} of {} policies violate uniform ergodicity",
            violations.len(),
            m.policy_count()
        )))
    }
}

fn analyze_text(m: &MdpModel, horizon: usize, delta: f64) -> Result<String, Failure> {
    let analysis = analyze_mdp(m, DEFAULT_MIXING_CAP)?;
    let policies = enumerate_policies(m)?;
    let mut out = String::new();
    out.push_str("policy_id\tactions\trho\tt_mix\tbeta\n");
    for (policy, chain) in policies.iter().zip(&analysis.per_policy) {
        let actions = policy
            .actions()
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(
            out,
            "{}\t{}\t{:.10}\t{}\t{:.10}",
            policy.id(),
            actions,
            chain.avg_reward,
            chain.mixing_time,
            chain.pseudo_spectral_gap
        )
        .unwrap();
    }
    let threshold = t_threshold(m, &analysis, horizon, delta);
    writeln!(out, "mdp_mixing_time: {}", analysis.mdp_mixing_time).unwrap();
    writeln!(out, "rho_star: {:.10}", analysis.rho_star).unwrap();
    writeln!(out, "optimal_policy: {}", analysis.optimal_policy).unwrap();
    writeln!(out, "mu_min: {:.10}", analysis.mu_min).unwrap();
    writeln!(
        out,
        "regret_bound(T={horizon}, delta={delta}): {:.6}",
        regret_bound(horizon, analysis.mdp_mixing_time, m.num_states(), m.num_actions(), delta)
    )
    .unwrap();
    writeln!(out, "t_threshold_rhs: {:.6e}", threshold.rhs).unwrap();
    writeln!(out, "t_threshold_satisfied: {}", threshold.satisfied).unwrap();
    Ok(out)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let m = load_validated_mdp(&args.mdp)?;
    let text = analyze_text(&m, args.horizon, args.delta)?;
    print!("{text}");
    if let Some(out) = &args.out {
        fs::write(out, &text)
            .map_err(|e| Failure::validation(format!("cannot write {}: {e}", out.display())))?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let m = load_validated_mdp(&args.mdp)?;
    let analysis = analyze_mdp(&m, DEFAULT_MIXING_CAP)?;
    let seeds = match (args.seed, args.seeds) {
        (Some(seed), None) => vec![seed],
        (None, Some(seeds)) => seeds,
        (None, None) => vec![0],
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let spec = ExperimentSpec {
        algorithm: args.algo,
        horizon: args.horizon,
        delta: args.delta,
        t_mix: args.tmix,
        seeds,
        initial_state: 0,
        path_start: args.start_state,
        reconstruction: args.reconstruct_paths,
    };
    let sweep = run_experiment(&m, &analysis, &spec)?;
    let written = write_sweep_artifacts(&args.out, &sweep)
        .map_err(|e| Failure::validation(format!("cannot write {}: {e}", args.out.display())))?;
    let s = &sweep.summary;
    println!("algorithm: {}", s.algorithm);
    println!("seeds: {}", s.seeds.len());
    println!("t_mix_used: {}", s.t_mix_used);
    println!("mean_final_regret: {:.6}", s.mean_final_regret);
    println!("stddev_final_regret: {:.6}", s.stddev_final_regret);
    println!("regret_bound: {:.6}", s.regret_bound);
    if let Some(k) = s.max_phase_count {
        match s.phase_count_bound {
            Some(bound) => println!("max_phase_count: {k} (bound {bound:.2})"),
            None => println!("max_phase_count: {k}"),
        }
    }
    println!("t_threshold_satisfied: {}", s.t_threshold_satisfied);
    println!("wrote {} files to {}", written.len(), args.out.display());
    Ok(())
}

fn print_report(report: &TailCheckReport) {
    let kind = serde_json::to_value(report.bound_kind).expect("enum serializes");
    println!(
        "{}: empirical={:.6} theoretical={:.6} margin={:.6} vacuous={} pass={}",
        kind.as_str().expect("bound kind is a string"),
        report.empirical,
        report.theoretical,
        report.margin,
        report.vacuous,
        report.pass
    );
}

fn cmd_concentration(args: ConcentrationArgs) -> Result<(), Failure> {
    let m = load_validated_mdp(&args.mdp)?;
    let analysis = analyze_mdp(&m, DEFAULT_MIXING_CAP)?;
    let policies = enumerate_policies(&m)?;
    let (chain, rewards) = induced_chain(&m, &policies[analysis.optimal_policy as usize]);
    let spec = |epsilon_or_delta: f64| TailCheckSpec {
        chain: chain.clone(),
        rewards: rewards.clone(),
        start: args.start_state,
        n: args.n,
        epsilon_or_delta,
        trials: args.trials,
        seed: args.seed,
    };

    let reward_tail = check_reward_concentration(&spec(args.epsilon))?;
    let reward_ci = check_reward_ci(&spec(args.delta))?;
    let (tv_tail, tv_mean) = check_tv_concentration(&spec(args.delta))?;

    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::validation(format!("cannot create {}: {e}", args.out.display())))?;
    let reports = [
        ("reward_tail.json", &reward_tail),
        ("reward_ci.json", &reward_ci),
        ("tv_tail.json", &tv_tail),
        ("tv_mean.json", &tv_mean),
    ];
    for (name, report) in &reports {
        let path = args.out.join(name);
        fs::write(&path, report.to_json_pretty())
            .map_err(|e| Failure::validation(format!("cannot write {}: {e}", path.display())))?;
        print_report(report);
    }
    let failed = reports.iter().filter(|(_, r)| !r.pass).count();
    if failed > 0 {
        return Err(Failure::check(format!(
            "{failed} of {} checks failed non-vacuously",
            reports.len()
        )));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Run(args) => cmd_run(args),
        Command::Concentration(args) => cmd_concentration(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage error, remapped from clap's default exit code 2 to
            // keep 2 reserved for validation failures.
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                ExitCode::SUCCESS
            } else {
                eprint!("{e}");
                ExitCode::from(1)
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
