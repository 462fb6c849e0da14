use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crowd_mfg::cli::{load_config, run_experiment, run_gradient_check, CliError, ExperimentConfig};

/// Mean-field optimal control and Hughes-model crowd evacuation solvers.
#[derive(Debug, Parser)]
#[command(name = "crowd-mfg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run(Common),
    /// Compare the adjoint gradient with finite differences.
    CheckGradient(Common),
}

#[derive(Debug, Args)]
struct Common {
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps and particle simulation.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        if let Some(n) = self.threads {
            // fails only if a pool already exists, which cannot happen here
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        let mut cfg = load_config(&self.config)?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

/// Exit code for runs that finished but whose descent did not converge.
const NOT_CONVERGED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: &Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let report = run_experiment(&cfg, Some(&args.config))?;
            println!(
                "{}: {} files in {} ({:.1} s)",
                cfg.experiment.name(),
                report.files.len(),
                report.output_dir.display(),
                report.wall_time_seconds
            );
            if report.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("descent did not converge, see failure.json");
                Ok(ExitCode::from(NOT_CONVERGED))
            }
        }
        Command::CheckGradient(args) => {
            let cfg = args.load()?;
            let report = run_gradient_check(&cfg)?;
            println!(
                "{:>10} {:>22} {:>22} {:>12}",
                "epsilon", "finite difference", "adjoint", "rel. error"
            );
            for r in &report.rows {
                println!(
                    "{:>10.1e} {:>22.15e} {:>22.15e} {:>12.3e}",
                    r.epsilon, r.finite_difference, r.adjoint, r.relative_error
                );
            }
            let best = report
                .rows
                .iter()
                .map(|r| r.relative_error)
                .fold(f64::INFINITY, f64::min);
            println!("written to {}", report.csv.display());
            // the adjoint is exact for the discrete problem, so some step must agree closely
            if best < 1e-3 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
