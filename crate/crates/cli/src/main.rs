use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infospec_cli::{emit_csv, has_failures, run_with_workers, to_csv_string, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "infospec", version, about = "Information-spectrum experiments and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sup/inf spectral entropy or divergence estimates over block lengths.
    Spectrum(Args),
    /// Compression fidelity, best case and converse bounds at given rates.
    Compress(Args),
    /// Rates of a two-component mixed source.
    Mixed(Args),
    /// Classical capacity estimates and coding simulations.
    Capacity(Args),
    /// Dense-coding capacity estimates and protocol simulation.
    Densecode(Args),
    /// Built-in property and convergence suites.
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Compress(a) => (ExperimentKind::Compress, a),
        Command::Mixed(a) => (ExperimentKind::Mixed, a),
        Command::Capacity(a) => (ExperimentKind::Capacity, a),
        Command::Densecode(a) => (ExperimentKind::Densecode, a),
        Command::Verify(a) => (ExperimentKind::Verify, a),
    };
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if cfg.experiment != kind {
        eprintln!(
            "config error: {} describes a `{}` experiment, not `{}`",
            args.config.display(),
            cfg.experiment.as_str(),
            kind.as_str()
        );
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if args.workers == Some(0) {
        eprintln!("config error: --workers must be positive");
        return ExitCode::from(EXIT_CONFIG);
    }
    let rows = match run_with_workers(&cfg, args.workers) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let errors = rows.iter().filter(|r| r.is_error()).count();
    if errors > 0 {
        eprintln!("warning: {errors} row(s) carry error markers");
    }
    match args.out.or(cfg.output.clone()) {
        Some(path) => {
            if let Err(e) = emit_csv(&rows, &path) {
                eprintln!("{}: {e}", path.display());
                return ExitCode::from(EXIT_FAILED);
            }
        }
        None => print!("{}", to_csv_string(&rows)),
    }
    if has_failures(&rows) {
        ExitCode::from(EXIT_FAILED)
    } else {
        ExitCode::SUCCESS
    }
}
