use clap::{Parser, Subcommand};
use cns_cli::config::{read_config, Mode};
use cns_cli::run::{output_dir, run_mode, write_failure, Failure, EXIT_OK};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cns", version, about = "Free-boundary chemotaxis-Navier-Stokes slab solver")]
struct Cli {
    #[command(subcommand)]
    mode: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file, `-` for standard input.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set grid.N1=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Picard iteration of the coupled system.
    Simulate(Common),
    /// Chain-rule oracle for the flattened coefficients.
    VerifyTransform(Common),
    /// Manufactured-solution convergence studies.
    Mms(Common),
    /// Free Stokes relaxation and its energy report.
    EnergyReport(Common),
    /// Compatible random initial data.
    GenData(Common),
}

fn threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("CNS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::from(cns_core::CnsError::Config(format!("CNS_THREADS must be a positive integer, got {v:?}"))))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::from(cns_core::CnsError::Config(format!("thread pool: {e}"))))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.mode {
        Command::Simulate(c) => (Mode::Simulate, c),
        Command::VerifyTransform(c) => (Mode::VerifyTransform, c),
        Command::Mms(c) => (Mode::Mms, c),
        Command::EnergyReport(c) => (Mode::EnergyReport, c),
        Command::GenData(c) => (Mode::GenData, c),
    };
    let code = match execute(mode, common) {
        Ok(()) => EXIT_OK,
        Err((f, out)) => {
            eprintln!("error: {}", f.message);
            if let Some(dir) = out {
                if let Err(e) = write_failure(&dir, &f) {
                    eprintln!("could not write error.json: {e}");
                }
            } else {
                eprintln!("{}", f.to_json());
            }
            f.code
        }
    };
    ExitCode::from(code as u8)
}

fn execute(mode: Mode, c: Common) -> Result<(), (Failure, Option<PathBuf>)> {
    threads().map_err(|f| (f, c.out.clone()))?;
    let cfg = read_config(&c.config, &c.set).map_err(|e| (Failure::from(e), c.out.clone()))?;
    if let Some(m) = cfg.mode {
        if m != mode {
            let msg = format!("config mode is {} but the command is {}", m.name(), mode.name());
            let f = Failure::from(cns_core::CnsError::Config(msg));
            return Err((f, c.out.clone()));
        }
    }
    let out = output_dir(c.out.clone(), &cfg).map_err(|f| (f, None))?;
    run_mode(mode, &cfg, &out).map_err(|f| (f, Some(out)))
}
