//! Command-line front end: run experiments, plot traces, compute reference
//! solutions, validate parameter schedules, and demonstrate the
//! unstabilized-alternation failure mode.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sorel::baselines::oscillation_demo;
use sorel::harness::experiment::{load_or_compute_reference, prepare_problem, ExperimentConfig};
use sorel::harness::plot::{emit_plots, PlotOptions, XAxis};
use sorel::harness::run_experiment;
use sorel::schedule::{validate_coupling_conditions, PracticalSchedule, TheoreticalSchedule};
use sorel::Error;

#[derive(Parser)]
#[command(
    name = "sorel",
    version,
    about = "Spectral risk minimization: stabilized primal-dual optimizer, baselines, and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, seed) combination of an experiment config.
    Run {
        /// TOML experiment configuration.
        config: PathBuf,
        /// Recompute runs even when cached trace files exist.
        #[arg(long)]
        force: bool,
    },
    /// Aggregate trace files into a long-format table and SVG charts.
    Plot {
        /// Directory holding manifest-*.json and trace files.
        trace_dir: PathBuf,
        /// Horizontal axis of the charts.
        #[arg(long, value_enum, default_value_t = XAxisArg::Passes)]
        x: XAxisArg,
        /// Log-scale floor for clamping nonpositive suboptimality.
        #[arg(long, default_value_t = 1e-12)]
        floor: f64,
    },
    /// Compute (and cache) the high-accuracy reference solution for a
    /// config's problem.
    Reference {
        config: PathBuf,
    },
    /// Check the five parameter-coupling inequalities for the schedule a
    /// config implies.
    ValidateSchedule {
        config: PathBuf,
        /// Largest outer index to check.
        #[arg(long, default_value_t = 100_000)]
        horizon: usize,
    },
    /// Run the unstabilized alternation on the two-quadratics toy and print
    /// the oscillating outer iterates.
    DemoOscillation {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        w0: f64,
        #[arg(long, default_value_t = 500)]
        inner_steps: usize,
        #[arg(long, default_value_t = 12)]
        outer: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum XAxisArg {
    Passes,
    Seconds,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run { config, force } => {
            let config = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&config, force)?;
            println!(
                "{}: {} computed, {} cached, {} failed",
                summary.manifest_path.display(),
                summary.computed,
                summary.cached,
                summary.failed
            );
            if summary.failed > 0 {
                eprintln!("error: {} run(s) failed; see the manifest", summary.failed);
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { trace_dir, x, floor } => {
            let opts = PlotOptions {
                x: match x {
                    XAxisArg::Passes => XAxis::Passes,
                    XAxisArg::Seconds => XAxis::Seconds,
                },
                floor,
            };
            let written = emit_plots(&trace_dir, &opts)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reference { config } => {
            let config = ExperimentConfig::load(&config)?;
            let problem = prepare_problem(&config)?;
            let out_dir = config.output_dir();
            std::fs::create_dir_all(&out_dir)?;
            let data = load_or_compute_reference(&config, &problem, &out_dir, false)?;
            println!(
                "reference objective {:.12e} (start {:.12e}), |w| = {:.6}",
                data.objective_at_ref,
                data.objective_at_w0,
                data.w.iter().map(|v| v * v).sum::<f64>().sqrt()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateSchedule { config, horizon } => {
            let config = ExperimentConfig::load(&config)?;
            let problem = prepare_problem(&config)?;
            let model = &problem.model;
            // Validate the schedule of the first optimizer method entry.
            let sorel_method = config.methods.iter().find_map(|m| match m {
                sorel::harness::experiment::MethodConfig::Sorel { mode, c, alpha, .. } => {
                    Some((mode.clone(), *c, *alpha))
                }
                _ => None,
            });
            let (mode, c, alpha) = sorel_method.ok_or_else(|| {
                Error::Config("config has no [[method]] name = \"sorel\" entry".to_string())
            })?;
            let report = if matches!(mode.as_deref(), Some("theoretical")) {
                let s = TheoreticalSchedule::new(model.reg_mu(), model.lipschitz(), model.smoothness())?;
                validate_coupling_conditions(&s, model.lipschitz(), model.reg_mu(), horizon)
            } else {
                let s = PracticalSchedule::new(
                    model.n(),
                    c.unwrap_or(1.0),
                    alpha.unwrap_or(1.0 / (12.0 * model.smoothness())),
                )?;
                validate_coupling_conditions(&s, model.lipschitz(), model.reg_mu(), horizon)
            };
            println!(
                "schedule check up to k = {} (G = {:.4e}, mu = {:.4e}):",
                report.horizon,
                model.lipschitz(),
                model.reg_mu()
            );
            for check in &report.checks {
                match check.first_violation {
                    None => println!("  ({}) holds: {}", check.id, check.statement),
                    Some(k) => {
                        println!("  ({}) FAILS at k = {k}: {}", check.id, check.statement)
                    }
                }
            }
            println!(
                "result: {}",
                if report.all_hold() { "all inequalities hold" } else { "violations found" }
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::DemoOscillation {
            alpha,
            w0,
            inner_steps,
            outer,
        } => {
            let iterates = oscillation_demo(alpha, w0, inner_steps, outer)?;
            println!("outer iterates (alpha = {alpha}, w0 = {w0}, T = {inner_steps}):");
            for (k, w) in iterates.iter().enumerate() {
                println!("  k = {k:>3}  w = {w:+.6}");
            }
            println!("the sequence alternates instead of converging to the minimizer at 0");
            Ok(ExitCode::SUCCESS)
        }
    }
}
