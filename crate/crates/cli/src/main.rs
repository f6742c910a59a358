use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use knotfit_cli::commands::{self, BenchArgs, FitArgs, PredictArgs};

/// Spline regression with automatically selected knots.
#[derive(Debug, Parser)]
#[command(name = "knotfit", version)]
struct Cli {
    /// Worker threads.
    #[arg(long, env = "KNOTFIT_THREADS", global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug). `RUST_LOG` takes precedence.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to observations in a CSV file.
    Fit(FitArgs),
    /// Evaluate a model at the points of a CSV file.
    Predict(PredictArgs),
    /// Run a synthetic benchmark.
    Bench(BenchArgs),
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    commands::configure_threads(cli.threads)?;
    match &cli.command {
        Command::Fit(args) => {
            commands::ensure_parent(&args.out)?;
            let summary = commands::fit(args)?;
            println!("{summary}");
        }
        Command::Predict(args) => {
            commands::ensure_parent(&args.out)?;
            let rows = commands::predict(args)?;
            println!("predicted {rows} point(s) -> {}", args.out.display());
        }
        Command::Bench(args) => {
            let path = commands::bench(args)?;
            println!("wrote {} and {}", path.display(), args.out.join(commands::SUMMARY_FILE).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
