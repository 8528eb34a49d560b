use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecmimo_cli::{run, CliError, ExperimentConfig, ExperimentKind};

/// Expectation-consistency MIMO detection experiments.
///
/// Output is CSV with `#` metadata lines; relative output paths are placed
/// under $ECMIMO_OUT_DIR when it is set.
#[derive(Parser)]
#[command(name = "ecmimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mutual information per detector over an SNR grid.
    Rate(Common),
    /// Per-iteration moment mismatch of EC variants.
    Converge(Common),
    /// LDPC-coded bit error rate.
    Ber(Common),
    /// Per-iteration EC energy and gradient norms.
    Energy(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML), or a previous output file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV; defaults to `output.path`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(kind: ExperimentKind, args: Common) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.experiment != kind {
        return Err(CliError::Config { field: "experiment".into(), reason: format!("is `{}`, but the `{}` command was used", cfg.experiment.as_str(), kind.as_str()) });
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    let out = args.out.or_else(|| cfg.output.path.clone());
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().expect("thread pool");
    let table = pool.install(|| run(&cfg))?;
    match out {
        Some(path) => {
            let path = match std::env::var_os("ECMIMO_OUT_DIR") {
                Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
                _ => path,
            };
            let io = |source| CliError::Io { path: path.display().to_string(), source };
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            let file = std::fs::File::create(&path).map_err(io)?;
            let mut w = std::io::BufWriter::new(file);
            table.write_csv(&cfg, &mut w)?;
            w.flush().map_err(io)?;
            log::info!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => table.write_csv(&cfg, std::io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (kind, args) = match Cli::parse().command {
        Command::Rate(a) => (ExperimentKind::RateSweep, a),
        Command::Converge(a) => (ExperimentKind::ConvergenceTrace, a),
        Command::Ber(a) => (ExperimentKind::CodedBer, a),
        Command::Energy(a) => (ExperimentKind::FreeEnergyTrace, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
