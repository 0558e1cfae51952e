//! Command-line front end: parse and run experiment programs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use glf_calculus::averaging::FolnerSchedule;
use glf_calculus::dsl;
use glf_calculus::runner::{run, RunConfig};

#[derive(Parser)]
#[command(name = "glfcalc", about = "Bracket-linear function calculus and joint-ergodicity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a program and print its canonical form
    Parse { file: PathBuf },
    /// Run the experiments of a program
    Run {
        file: PathBuf,
        /// RNG seed for anything sampled
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the averaging horizon N for all experiments
        #[arg(long)]
        n: Option<u64>,
        /// Følner schedule: forward ([1..N]) or window ([N+1..2N])
        #[arg(long, default_value = "forward")]
        folner: String,
        /// Per-coordinate character cutoff for spectral checks
        #[arg(long)]
        freq_cutoff: Option<i64>,
        /// Directory for JSON/CSV artifacts
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Parse { file } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", file.display());
                    return ExitCode::from(1);
                }
            };
            match dsl::parse(&text) {
                Ok(program) => {
                    print!("{}", dsl::print_program(&program));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Run {
            file,
            seed,
            n,
            folner,
            freq_cutoff,
            out,
        } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", file.display());
                    return ExitCode::from(1);
                }
            };
            let program = match dsl::parse(&text) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    return ExitCode::from(1);
                }
            };
            let schedule = match folner.as_str() {
                "forward" => FolnerSchedule::Forward,
                "window" => FolnerSchedule::Window,
                other => {
                    eprintln!("error: unknown schedule `{other}` (use forward|window)");
                    return ExitCode::from(1);
                }
            };
            let cfg = RunConfig {
                seed,
                n_override: n,
                folner: schedule,
                freq_cutoff,
                out_dir: out,
            };
            match run(&program, &cfg) {
                Ok(outcome) => {
                    print!("{}", outcome.summary);
                    ExitCode::from(outcome.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
