use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deadcore_cli::run::write_error;
use deadcore_cli::{parse_config, run, Experiment, RunError};

#[derive(Parser)]
#[command(name = "deadcore", version, about = "Dead-core system solver and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the coupled system and decompose the result into regions.
    Solve(Common),
    /// Exponents, barrier constants and the sampled radial pair.
    Radial(Common),
    /// Growth exponent and non-degeneracy around a free-boundary point.
    FitExponent(Common),
    /// Density, porosity and box dimension of the free boundary.
    Measure(Common),
    /// Weak comparison of a super-pair against a sub-pair.
    Compare(Common),
    /// Sweep the source scale δ² and track the half-ball supremum.
    Flatten(Common),
    /// Growth of solutions on expanding domains.
    Liouville(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set problem.p=0.25`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn fail(err: &RunError, experiment: Experiment) -> ExitCode {
    eprintln!("{}", serde_json::to_string_pretty(&err.to_json(Some(experiment))).expect("json"));
    ExitCode::from(err.exit_code() as u8)
}

fn init_threads() -> Result<(), RunError> {
    let Ok(raw) = std::env::var("DEADCORE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RunError::Threads(raw.clone()))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|_| RunError::Threads(raw))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Solve(c) => (Experiment::Solve, c),
        Command::Radial(c) => (Experiment::Radial, c),
        Command::FitExponent(c) => (Experiment::FitExponent, c),
        Command::Measure(c) => (Experiment::Measure, c),
        Command::Compare(c) => (Experiment::Compare, c),
        Command::Flatten(c) => (Experiment::Flatten, c),
        Command::Liouville(c) => (Experiment::Liouville, c),
    };
    if let Err(e) = init_threads() {
        return fail(&e, experiment);
    }
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(source) => {
            return fail(
                &RunError::Io {
                    path: common.config,
                    source,
                },
                experiment,
            )
        }
    };
    let cfg = match parse_config(&text, experiment, &common.overrides) {
        Ok(c) => c,
        Err(e) => return fail(&e.into(), experiment),
    };
    match run(&cfg) {
        Ok(outcome) => {
            // A closed pipe on stdout is not a failed run.
            let _ = writeln!(
                std::io::stdout().lock(),
                "{}",
                serde_json::to_string_pretty(&outcome.report).expect("json")
            );
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            if let Err(io) = write_error(&cfg, &e) {
                eprintln!("could not write error.json: {io}");
            }
            fail(&e, experiment)
        }
    }
}
