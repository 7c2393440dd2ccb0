use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use labo_harness::commands::{self, RunOutcome};
use labo_harness::error::CliError;

#[derive(Parser)]
#[command(name = "labo", version, about = "Latent-space BO of robot-hand designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured optimizer; any config key can be overridden
    /// with `--key value` (dotted for sections), `--resume` continues
    /// from the checkpoint in the output directory.
    Run {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// Aggregate finished runs into tables.
    Report {
        /// Run logs or run directories.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Write a reproducible set of object descriptions.
    Objects {
        kind: String,
        count: usize,
        seed: u64,
        out_dir: PathBuf,
    },
    /// Score one design (one real per line) on the train and test splits.
    Eval {
        theta: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, args } => match commands::run(&config, &args)? {
            RunOutcome::Finished(s) => {
                println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
            }
            RunOutcome::Stopped { evaluations } => {
                eprintln!("stopped after {evaluations} evaluations; continue with --resume");
            }
        },
        Command::Report { runs, out } => {
            let r = commands::report(&runs, &out)?;
            eprintln!(
                "{} method rows, {} finger rows written to {}",
                r.methods.len(),
                r.fingers.len(),
                out.display()
            );
        }
        Command::Objects {
            kind,
            count,
            seed,
            out_dir,
        } => {
            let files = commands::objects(&kind, count, seed, &out_dir)?;
            eprintln!("wrote {} objects to {}", files.len(), out_dir.display());
        }
        Command::Eval { theta, config, args } => {
            let r = commands::eval(&theta, config.as_deref(), &args)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("reports serialize"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Runtime(inner) = &e {
                for cause in inner.chain().skip(1) {
                    eprintln!("  caused by: {cause}");
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
