//! ris-lab: configuration-driven CLI for reflectarray profile synthesis,
//! far-field analysis, brute-force suppression search, and DQN training.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ris_core::analysis::{intended_intensity, unwanted_intensity};
use ris_core::config::RunConfig;
use ris_core::dqn::{argmax, load_checkpoint, save_checkpoint};
use ris_core::env::{features, run_training, Env, Scenario};
use ris_core::farfield::pattern;
use ris_core::io::{
    assignment_csv, atomic_write, detection_csv, oracle_csv, pattern_csv, profile_csv,
    training_log_csv,
};
use ris_core::oracle::grid_search;
use ris_core::suppression::apply_suppression;
use ris_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ris-lab",
    version,
    about = "Multi-focus reflectarray synthesis and sidelobe suppression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to RIS_LAB_THREADS or all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Overrides the configured episode budget.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by the train command.
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize profiles and export pattern and detection CSVs.
    Pattern(CommonArgs),
    /// Train the DQN suppression agent.
    Train(TrainArgs),
    /// Exhaustive coarse-grid suppression search.
    Oracle(CommonArgs),
    /// Greedy rollout of a trained checkpoint.
    Eval(EvalArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Checkpoint(_) => 4,
        _ => 2,
    }
}

fn init_threads(requested: Option<usize>) {
    let from_env = std::env::var("RIS_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = requested.or(from_env) {
        if n > 0 {
            // Ignore failure: the global pool can only be set once.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn load(common: &CommonArgs) -> Result<RunConfig> {
    init_threads(common.threads);
    let mut cfg = RunConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pattern(args) => cmd_pattern(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Eval(args) => cmd_eval(&args),
    }
}

fn write(out_dir: &Path, name: &str, text: &str) -> Result<()> {
    atomic_write(&out_dir.join(name), text.as_bytes())
}

fn cmd_pattern(args: &CommonArgs) -> Result<()> {
    let cfg = load(args)?;
    let scenario = Scenario::from_config(&cfg)?;
    write(&args.out, "profile.csv", &profile_csv(&scenario.multi_focus))?;
    write(
        &args.out,
        "pattern.csv",
        &pattern_csv(&scenario.baseline_pattern),
    )?;
    write(&args.out, "detection.csv", &detection_csv(&scenario.sidelobes))?;
    let intended = intended_intensity(&scenario.baseline_pattern, &scenario.beams);
    let unwanted = unwanted_intensity(&scenario.baseline_pattern, &scenario.beams);
    println!(
        "pattern: intended {intended:.3} dB, unwanted {unwanted:.3} dB, objective {:.3} dB",
        scenario.baseline_objective
    );
    println!("pattern: {} sidelobes detected", scenario.m());
    for (m, lobe) in scenario.sidelobes.lobes.iter().enumerate() {
        println!(
            "pattern: sidelobe {} at ({:.1}, {:.1}) deg, {:.3} dB",
            m + 1,
            lobe.direction.theta_deg,
            lobe.direction.phi_deg,
            lobe.db
        );
    }
    Ok(())
}

/// Linear magnitude of the strongest intended-beam cell, used as the 0 dB
/// reference of exported suppressed patterns.
fn intended_peak_magnitude(
    scenario: &Scenario,
    pat: &ris_core::farfield::FarFieldPattern,
) -> f64 {
    let grid = pat.grid();
    let mut peak = 0.0_f64;
    for i in 0..grid.n_theta() {
        for j in 0..grid.n_phi() {
            let d = grid.direction(i, j);
            let inside = scenario
                .beams
                .targets
                .iter()
                .any(|&t| ris_core::geometry::angular_distance(d, t) <= scenario.beams.radius_deg);
            if inside {
                peak = peak.max(pat.magnitude(i, j));
            }
        }
    }
    peak
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = load(&args.common)?;
    let scenario = Scenario::from_config(&cfg)?;
    let episodes = args.episodes.unwrap_or(cfg.agent.episodes);
    let agent = cfg.agent.agent_config();
    let started = Instant::now();
    let result = run_training(&scenario, &agent, episodes, cfg.seed)?;

    write(
        &args.common.out,
        "training_log.csv",
        &training_log_csv(&result.rows),
    )?;
    save_checkpoint(
        &args.common.out.join("checkpoint.bin"),
        &result.net,
        &result.adam,
    )?;
    write(
        &args.common.out,
        "profile.csv",
        &profile_csv(&result.final_profile),
    )?;
    let mut export = result.final_pattern.clone();
    let reference = intended_peak_magnitude(&scenario, &export);
    if reference > 0.0 {
        export.set_reference(reference)?;
    }
    write(&args.common.out, "pattern.csv", &pattern_csv(&export))?;
    write(
        &args.common.out,
        "assignment.csv",
        &assignment_csv(&result.best_assignment, scenario.mask_seed),
    )?;

    println!(
        "train: baseline {:.3} dB, best {:.3} dB at episode {} ({} episodes, {:.1} s)",
        result.baseline_objective,
        result.best_objective,
        result.best_episode,
        episodes,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_oracle(args: &CommonArgs) -> Result<()> {
    let cfg = load(args)?;
    let scenario = Scenario::from_config(&cfg)?;
    let coarse = ris_core::env::ActionGrid::default_coarse();
    let started = Instant::now();
    let result = grid_search(&scenario, &coarse, cfg.seed)?;

    write(&args.out, "oracle.csv", &oracle_csv(&result, scenario.m()))?;
    let best_profile = apply_suppression(
        &scenario.array,
        &scenario.target_profiles,
        &scenario.sidelobe_profiles,
        &result.best_assignment,
        cfg.seed,
    )?;
    let best_pattern = pattern(&scenario.array, &best_profile, &scenario.grid)?;
    write(&args.out, "pattern.csv", &pattern_csv(&best_pattern))?;

    let mut spread = result.seed_spread.clone();
    spread.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "oracle: baseline {:.3} dB, best {:.3} dB (gain {:+.3} dB), {} evaluations, {:.1} s",
        result.baseline_objective,
        result.best_objective,
        result.best_objective - result.baseline_objective,
        result.evaluations,
        started.elapsed().as_secs_f64()
    );
    if !spread.is_empty() {
        println!(
            "oracle: best assignment over 10 mask seeds: min {:.3}, median {:.3}, max {:.3} dB",
            spread[0],
            spread[spread.len() / 2],
            spread[spread.len() - 1]
        );
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let cfg = load(&args.common)?;
    let scenario = Scenario::from_config(&cfg)?;
    let (net, _adam) = load_checkpoint(&args.checkpoint)?;
    let expected_in = scenario.state_len();
    let expected_out = scenario.actions.action_count();
    if net.input_len() != expected_in || net.output_len() != expected_out {
        return Err(Error::Checkpoint(format!(
            "network is {}x{} but the scenario needs {}x{}",
            net.input_len(),
            net.output_len(),
            expected_in,
            expected_out
        )));
    }

    // Greedy rollout, timing only the network inferences.
    let mut env = Env::reset(&scenario, scenario.mask_seed)?;
    let mut inference = std::time::Duration::ZERO;
    while !env.is_done() {
        let state = features(&scenario, env.state());
        let t0 = Instant::now();
        let action = argmax(&net.forward(&state));
        inference += t0.elapsed();
        env.step(action)?;
    }
    let assignment = env.assignment()?;
    let profile = apply_suppression(
        &scenario.array,
        &scenario.target_profiles,
        &scenario.sidelobe_profiles,
        &assignment,
        scenario.mask_seed,
    )?;
    let pat = pattern(&scenario.array, &profile, &scenario.grid)?;
    let objective = ris_core::analysis::objective_db(&pat, &scenario.beams);

    let mut export = pat.clone();
    let reference = intended_peak_magnitude(&scenario, &export);
    if reference > 0.0 {
        export.set_reference(reference)?;
    }
    write(&args.common.out, "pattern.csv", &pattern_csv(&export))?;
    write(
        &args.common.out,
        "assignment.csv",
        &assignment_csv(&assignment, scenario.mask_seed),
    )?;

    println!(
        "eval: objective {objective:.3} dB (baseline {:.3} dB), policy inference {} us",
        scenario.baseline_objective,
        inference.as_micros()
    );
    Ok(())
}
