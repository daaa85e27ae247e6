use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use freeconv_cli::{configure_threads, run, selfcheck, verify_pencil_file, CliError};

/// Spectral densities and Brown measures of polynomials in free variables.
#[derive(Parser)]
#[command(name = "freeconv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the problem described by a JSON config.
    Run { config: PathBuf },
    /// Run the built-in closed-form and oracle checks.
    Selfcheck {
        /// Multiply every tolerance by this factor.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// Check a pencil file against an expression on random matrices.
    VerifyPencil { pencil: PathBuf, expression: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("freeconv: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let result = match cli.command {
        Command::Run { config } => run(&config).map(|r| print!("{}", r.summary)),
        Command::Selfcheck { tolerance_scale } => {
            let checks = selfcheck::run(tolerance_scale);
            print!("{}", selfcheck::render(&checks));
            match checks.iter().filter(|c| !c.passed).count() {
                0 => Ok(()),
                n => Err(CliError::Checks(n)),
            }
        }
        Command::VerifyPencil { pencil, expression } => {
            verify_pencil_file(&pencil, &expression).and_then(|(line, ok)| {
                print!("{line}");
                if ok {
                    Ok(())
                } else {
                    Err(CliError::Checks(1))
                }
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freeconv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
