//! Experiment CLI: runs the benchmark studies from a plain-text config and
//! writes CSV files. The library does the work; this binary only dispatches.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dgode::experiments::{
    self, conservation_study, efficiency_study, largest_admissible_h, order_study,
    phase_trajectory_export, simulate_run, stepsize_criterion_study,
};
use dgode::integrators::uniform_samples;
use dgode::theoretical_step_bound;
use dgode::{BoundEstimates, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "dgode", version, about = "Integral-preserving ODE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Plain-text key=value config file; defaults reproduce the benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV files (overrides the config's out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the sampled constant estimates printed by `stepcrit`; the
    /// studies and their CSVs are fully deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one method over [0, t_end] and dump the trajectory.
    Simulate,
    /// Error at t_sample vs step size, with a log-log order fit per method.
    Order,
    /// Integral drift over a long window for every configured method.
    Conserve,
    /// Error and exact cost counters per method over the h grid.
    Efficiency,
    /// Skew denominator, condition number and one-step error near a critical
    /// point, across start scales and step sizes.
    Stepcrit,
    /// Phase-portrait trajectories at the benchmark step sizes.
    Phase,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file_or_defaults(cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Simulate => {
            let (method, traj) = simulate_run(&cfg)?;
            let path = experiments::write_simulate_csv(&out, &method, &traj)?;
            let i0 = traj.integral_values[0];
            println!(
                "simulate: {} steps of {} (h={}), max |I - I0| = {:.3e} -> {}",
                traj.cost.steps,
                method,
                cfg.h,
                traj.max_integral_drift() / (1.0 + i0.abs()),
                path.display()
            );
        }
        Command::Order => {
            for result in order_study(&cfg)? {
                let path = experiments::write_order_csv(&out, &result)?;
                println!(
                    "order: {}: slope {:.4} (reliable: {}) -> {}",
                    result.method,
                    result.fit.slope,
                    result.fit.reliable,
                    path.display()
                );
                for (h, msg) in &result.failures {
                    println!("order: {}: run at h={h} failed: {msg}", result.method);
                }
            }
        }
        Command::Conserve => {
            for series in conservation_study(&cfg)? {
                let path = experiments::write_conserve_csv(&out, &series)?;
                println!(
                    "conserve: {}: max relative drift {:.3e} -> {}",
                    series.method,
                    series.max_relative_drift,
                    path.display()
                );
            }
        }
        Command::Efficiency => {
            let rows = efficiency_study(&cfg)?;
            for method in &cfg.methods {
                let path = experiments::write_efficiency_csv(&out, method.as_str(), &rows)?;
                println!("efficiency: {} -> {}", method.as_str(), path.display());
            }
        }
        Command::Stepcrit => {
            let rows = stepsize_criterion_study(&cfg)?;
            let path = experiments::write_stepcrit_csv(&out, &rows)?;
            for &r in &cfg.r_scales {
                match largest_admissible_h(&rows, r, cfg.denom_floor) {
                    Some(h) => println!("stepcrit: R={r}: largest admissible h = {h:.6}"),
                    None => println!("stepcrit: R={r}: start is a critical point"),
                }
            }
            // the sampled sufficiency bound, for contrast with the measured
            // thresholds above (it is deliberately conservative)
            let problem = cfg.build_problem()?;
            let samples = uniform_samples(problem.dim(), 100, -2.0, 2.0, cfg.seed);
            let est = BoundEstimates::estimate_from_samples(&problem, &samples, 1.0, 10.0)?;
            let (r_prime, h_prime) = theoretical_step_bound(&est)?;
            println!(
                "stepcrit: sampled bound (seed {}): L = {:.3}, C1 = {:.3}, R' = {:.3}, H' = {:.3e}",
                cfg.seed, est.lipschitz, est.c1, r_prime, h_prime
            );
            println!("stepcrit: table -> {}", path.display());
        }
        Command::Phase => {
            for (k, run) in phase_trajectory_export(&cfg)?.iter().enumerate() {
                let idx = k % cfg.phase_h_list.len();
                let path = experiments::write_phase_csv(&out, idx, run)?;
                println!(
                    "phase: {} at h={:.6}: max |x| = {:.6} -> {}",
                    run.method,
                    run.h,
                    run.trajectory.max_state_norm(),
                    path.display()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
