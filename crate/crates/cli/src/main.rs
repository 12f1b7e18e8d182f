use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use near_cli::{commands, CliError, DataSpec, RunConfig};

#[derive(Parser)]
#[command(
    name = "near",
    version,
    about = "Neurosymbolic program synthesis by informed search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for programs as configured and write programs, traces and a summary.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for training children in parallel.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Generate a synthetic dataset from a generator program.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the test-split report of a program as JSON.
    Eval {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Measure how far the heuristic overestimates the cost-to-go.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn set_jobs(jobs: Option<usize>) -> Result<bool, CliError> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Input("--jobs must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(rayon::current_num_threads() > 1)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synthesize { config, jobs } => {
            let cfg = RunConfig::load(&config)?;
            let parallel = set_jobs(jobs)?;
            for s in commands::synthesize(&cfg, parallel)? {
                println!(
                    "{} λ={}: F1 {:.4} ± {:.4}, depth {:.2} ± {:.2}, path cost {:.4} ± {:.4}",
                    s.algorithm,
                    s.lambda,
                    s.f1.mean,
                    s.f1.stddev,
                    s.depth.mean,
                    s.depth.stddev,
                    s.path_cost.mean,
                    s.path_cost.stddev
                );
            }
        }
        Command::GenData { spec, out } => {
            let spec = DataSpec::load(&spec)?;
            let ceiling = commands::gen_data(&spec, &out)?;
            println!("wrote {} (generator test F1 {ceiling:.4})", out.display());
        }
        Command::Eval {
            program,
            params,
            data,
        } => {
            let report = commands::eval(&program, &params, &data)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("reports serialize")
            );
        }
        Command::Probe { config, jobs } => {
            let cfg = RunConfig::load(&config)?;
            let parallel = set_jobs(jobs)?;
            let out = commands::probe(&cfg, parallel)?;
            println!(
                "probed {} nodes: max gap {:.4}, epsilon_hat {:.4}",
                out.report.entries.len(),
                out.report.max_gap,
                out.report.epsilon_hat
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
