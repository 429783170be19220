use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use secnoma::asm::{self, AsmMode, AsmOptions};
use secnoma::experiment::{self, ExperimentSpec};
use secnoma::polyblock::{global_optimum, GlobalOptions};
use secnoma::robust::solve_robust;
use secnoma::{generate, Error, Gains, NetworkConfig, NetworkInstance, RateModel};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "secnoma", version, about = "Secure resource allocation for PD-NOMA heterogeneous networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a network instance and write it as JSON.
    Generate {
        /// Network configuration (TOML or JSON); defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Solve one instance and print a JSON report.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Solver::Asm)]
        solver: Solver,
        /// Stopping threshold on the power change, watts.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Evaluation budget of the subcarrier search.
        #[arg(long)]
        budget: Option<usize>,
        /// Error bound used by the robust solver.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Eavesdropper gain table seen by the non-robust solvers.
        #[arg(long, value_enum, default_value_t = GainsArg::True)]
        gains: GainsArg,
        /// Also write the full report here.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep described by a TOML spec.
    Experiment {
        spec: PathBuf,
        /// Override the spec's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Relative gap (A - B) / A between two solvers in detail CSVs.
    Compare {
        #[arg(required = true)]
        detail: Vec<PathBuf>,
        #[arg(long, short = 'a')]
        solver_a: String,
        #[arg(long, short = 'b')]
        solver_b: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Asm,
    AsmBaselineSic,
    Robust,
    Uniform,
    Polyblock,
}

#[derive(Clone, Copy, ValueEnum)]
enum GainsArg {
    True,
    Est,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Schema { .. }
        | Error::Index(_)
        | Error::Alignment(_)
        | Error::Io { .. }
        | Error::Csv(_) => EXIT_DATA,
        _ => EXIT_SOLVER,
    }
}

fn read_config(path: &Path) -> secnoma::Result<NetworkConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let config: NetworkConfig = if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.message().to_string()))?
    };
    config.validate()?;
    Ok(config)
}

fn write(path: &Path, text: &str) -> secnoma::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn solve(
    inst: &NetworkInstance,
    solver: Solver,
    options: &AsmOptions,
    epsilon: Option<f64>,
    gains: Gains,
) -> secnoma::Result<serde_json::Value> {
    let value = match solver {
        Solver::Asm | Solver::Uniform => {
            let mut options = *options;
            if let Solver::Uniform = solver {
                options.mode = AsmMode::UniformPower;
            }
            let r = asm::run(inst, &options, gains)?;
            json!({
                "solver": if options.mode == AsmMode::Joint { "asm" } else { "uniform" },
                "objective_bps_hz": r.objective,
                "iterations": r.iterations,
                "residual": r.residuals.max(),
                "terminated_by_theta": r.terminated_by_theta,
                "report": r,
            })
        }
        Solver::AsmBaselineSic => {
            let r = asm::run_baseline_sic_eve(inst, options)?;
            json!({
                "solver": "asm_baseline_sic",
                "objective_bps_hz": r.objective,
                "iterations": r.iterations,
                "residual": r.residuals.max(),
                "terminated_by_theta": r.terminated_by_theta,
                "report": r,
            })
        }
        Solver::Robust => {
            let mut inst = inst.clone();
            if let Some(e) = epsilon {
                if !(e >= 0.0) {
                    return Err(Error::Config(format!("epsilon must be non-negative, got {e}")));
                }
                inst.config.epsilon = e;
            }
            let r = solve_robust(&inst, options)?;
            json!({
                "solver": "robust",
                "epsilon": inst.config.epsilon,
                "objective_bps_hz": r.surrogate_objective,
                "realized_secrecy_bps_hz": r.realized_secrecy,
                "iterations": r.report.iterations,
                "residual": r.report.residuals.max(),
                "report": r,
            })
        }
        Solver::Polyblock => {
            let g = global_optimum(inst, &GlobalOptions::default())?;
            let model = RateModel::new(inst, Gains::True);
            json!({
                "solver": "polyblock",
                "objective_bps_hz": model.sum_secrecy(&g.power, &g.assignment),
                "upper_bound": g.upper_bound,
                "gap": g.gap,
                "iterations": g.iterations,
                "converged": g.converged,
                "report": g,
            })
        }
    };
    Ok(value)
}

fn run(cli: Cli) -> secnoma::Result<()> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let mut config = match config {
                Some(path) => read_config(&path)?,
                None => NetworkConfig::default(),
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            let inst = generate(&config)?;
            inst.save(&out)?;
            println!("{}", out.display());
        }
        Command::Solve {
            instance,
            solver,
            theta,
            max_iters,
            budget,
            epsilon,
            gains,
            out,
        } => {
            let inst = NetworkInstance::load(&instance)?;
            let mut options = AsmOptions {
                theta,
                ..AsmOptions::default()
            };
            if let Some(m) = max_iters {
                options.max_iters = m;
            }
            if let Some(b) = budget {
                options.budget.max_evals = b;
            }
            options.budget.seed = inst.config.seed;
            options.validate()?;
            let gains = match gains {
                GainsArg::True => Gains::True,
                GainsArg::Est => Gains::Est,
            };
            let mut value = solve(&inst, solver, &options, epsilon, gains)?;
            if let Some(path) = out {
                write(&path, &serde_json::to_string_pretty(&value).expect("report serializes"))?;
            }
            value.as_object_mut().expect("object").remove("report");
            println!("{}", serde_json::to_string_pretty(&value).expect("summary serializes"));
        }
        Command::Experiment {
            spec,
            output_dir,
            workers,
        } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(dir) = output_dir {
                spec.output_dir = dir;
            }
            if let Some(w) = workers {
                spec.workers = w;
            }
            let result = experiment::run_experiment(&spec)?;
            let failed = result.detail.iter().filter(|r| r.status != "ok").count();
            println!("{}", result.detail_path.display());
            println!("{}", result.summary_path.display());
            println!("{}", result.trace_path.display());
            if failed > 0 {
                eprintln!("{failed} of {} solver runs failed", result.detail.len());
            }
        }
        Command::Compare {
            detail,
            solver_a,
            solver_b,
            out,
        } => {
            let gaps = experiment::compare(&detail, &solver_a, &solver_b)?;
            match out {
                Some(path) => experiment::write_gaps(&path, &gaps)?,
                None => print!("{}", experiment::gaps_to_csv(&gaps)?),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
