use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conical::cli::{self, ExperimentConfig, RunKind, RunReport};
use conical::Error;

#[derive(Parser)]
#[command(name = "conical", version, about = "Wave packets through conical crossings")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the pipeline named by the config's `kind`.
    Simulate,
    /// Error table over the config's ε list, with fitted slope.
    Sweep,
    /// Classical trajectories and crossing data only.
    Classical,
    /// Landau–Zener coefficients against the direct oracle.
    LzScatter,
    /// Profile evolution checks along the packet's trajectory.
    ProfileTest,
}

fn execute(args: &Args) -> Result<RunReport, Error> {
    let path = args.config.as_ref().ok_or_else(|| Error::Invalid("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    match args.command {
        Command::Classical => cfg.kind = RunKind::ClassicalOnly,
        Command::LzScatter => cfg.kind = RunKind::LzTable,
        _ => {}
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match args.command {
        Command::Sweep => cli::sweep(&cfg, &out),
        Command::ProfileTest => cli::profile_test(&cfg, &out),
        _ => cli::run(&cfg, &out),
    }
}

fn print_report(r: &RunReport) {
    for e in &r.entries {
        println!(
            "eps {:.4e}  error(T) {:.4e}  ref masses ({:.5}, {:.5})  {:.1}s",
            e.epsilon,
            e.final_error(),
            e.masses.reference.0,
            e.masses.reference.1,
            e.seconds
        );
    }
    for (k, v) in &r.summary {
        println!("{k} = {v:.6e}");
    }
    for f in &r.files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&args) {
        Ok(report) => {
            print_report(&report);
            if matches!(args.command, Command::Sweep) && report.monotone == Some(false) {
                eprintln!("error: final-time errors do not decrease with epsilon");
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
