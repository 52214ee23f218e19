use std::path::PathBuf;
use std::process::ExitCode;

use axprox_cli::validate::validate_errors;
use axprox_cli::{mpc_build, run_experiment, CliError, ExperimentConfig, Mode};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "axprox", version, about = "Approximate proximal solvers with probabilistic error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver for every seed and write its trace.
    Solve(Common),
    /// Evaluate the bound curves without running a solver.
    Bounds(Common),
    /// Run the solver and evaluate the bound curves along each trace.
    Compare(Common),
    /// Sample the configured error models and report statistical checks.
    ValidateErrors(Common),
    /// Write the condensed MPC matrices (H, q, lambda, F_a, Phi_a).
    MpcBuild(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Iteration count (overrides `solver.max_iter`).
    #[arg(long)]
    iters: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(k) = self.iters {
            cfg.solver.max_iter = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(c) => report(run_experiment(&c.load()?, Mode::Solve)?),
        Command::Compare(c) => report(run_experiment(&c.load()?, Mode::Compare)?),
        Command::Bounds(c) => report(run_experiment(&c.load()?, Mode::Bounds)?),
        Command::ValidateErrors(c) => {
            let r = validate_errors(&c.load()?)?;
            for (name, rep) in [("gradient", &r.gradient), ("prox", &r.prox)] {
                if let Some(rep) = rep {
                    for check in &rep.checks {
                        println!(
                            "{name:<8} {:<15} statistic={:<12.6e} threshold={:<12.6e} {}",
                            check.name,
                            check.statistic,
                            check.threshold,
                            if check.passed { "pass" } else { "FAIL" }
                        );
                    }
                }
            }
            println!("wrote {}", r.file.display());
            if r.all_passed() {
                Ok(())
            } else {
                Err(CliError::Numerical("error stream failed validation".into()))
            }
        }
        Command::MpcBuild(c) => {
            for f in mpc_build(&c.load()?)? {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn report(outcome: axprox_cli::ExperimentOutcome) -> Result<(), CliError> {
    for s in &outcome.summaries {
        match s.max_subopt_minus_bound {
            Some(m) => println!(
                "seed {}: final subopt {:.6e}, max(subopt - bound) {:.6e}, bound violations {}",
                s.seed, s.final_subopt, m, s.bound_violations
            ),
            None => println!("seed {}: final subopt {:.6e}", s.seed, s.final_subopt),
        }
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // malformed arguments count as a configuration error
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
