use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latgas_cli::{
    execute, parse_config_with, Format, Mode, Overrides, RunError, EXIT_FAILURE, EXIT_INVALID, EXIT_OK, THREADS_ENV,
};

#[derive(Parser)]
#[command(name = "latgas", version, about = "Lattice-gas residence times: simulation, exact laws and closed forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mode named in the config file.
    Run(Common),
    /// Simulate replicas and report per-replica and pooled estimates.
    Simulate(Common),
    /// Solve the stationary law on the full state space.
    Exact(Common),
    /// Compare simulated estimates with the exact law.
    VerifyLaw(Common),
    /// TASEP density profile.
    Profile(Common),
    /// Closed-form Ising ring residence time.
    IsingTau(Common),
    /// TASEP tau / L against its limit over a grid of lattice sizes.
    Scan(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, conflicts_with = "max_time")]
    max_jumps: Option<u64>,
    #[arg(long)]
    max_time: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    ExitCode::from(dispatch(cli) as u8)
}

fn dispatch(cli: Cli) -> i32 {
    let (mode, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::Simulate(c) => (Some(Mode::Simulate), c),
        Command::Exact(c) => (Some(Mode::Exact), c),
        Command::VerifyLaw(c) => (Some(Mode::VerifyLaw), c),
        Command::Profile(c) => (Some(Mode::Profile), c),
        Command::IsingTau(c) => (Some(Mode::IsingTau), c),
        Command::Scan(c) => (Some(Mode::Scan), c),
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return EXIT_INVALID;
    }
    let text = match fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return EXIT_INVALID;
        }
    };
    let overrides = Overrides {
        mode,
        seed: common.seed,
        replicas: common.replicas,
        output: common.output,
        format: common.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        max_jumps: common.max_jumps,
        max_time: common.max_time,
    };
    let config = match parse_config_with(&text, &overrides) {
        Ok(c) => c,
        Err(errors) => {
            for e in &errors.0 {
                eprintln!("{}: {e}", common.config.display());
            }
            return EXIT_INVALID;
        }
    };
    let outcome = match execute(&config) {
        Ok(o) => o,
        Err(e @ RunError::Model(_)) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let bytes = outcome.report.to_bytes(config.format);
    let written = match &config.output {
        Some(path) => fs::write(path, &bytes).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => io::stdout().lock().write_all(&bytes).map_err(|e| format!("cannot write output: {e}")),
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return EXIT_FAILURE;
    }
    if !outcome.passed {
        eprintln!("verification failed: estimates are not within tolerance of the exact law");
        return EXIT_FAILURE;
    }
    EXIT_OK
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}
