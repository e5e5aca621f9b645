use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybrid_swap_cli::emit::emit;
use hybrid_swap_cli::{run, CliError, Command, Config};

/// Entanglement and entanglement-swapping experiments on hybrid
/// optomechanical nodes. Writes CSV data files and a metadata snapshot.
#[derive(Parser)]
#[command(name = "hybrid-swap", version)]
struct Cli {
    #[command(subcommand)]
    command: Kind,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Kind {
    /// Drift eigenvalues of both nodes.
    Stability,
    /// Cavity output spectrum of node A.
    Spectrum,
    /// Single-node negativities versus the filter center.
    NodeEntanglement,
    /// Remote negativities after the swap versus the filter bandwidth.
    BandwidthSweep,
    /// Remote negativities on a grid of filter centers of both nodes.
    SwapMap,
    /// Remote negativities and spectra for several atomic collision rates.
    CollisionCompare,
}

#[derive(Args)]
struct Flags {
    /// TOML configuration, or the metadata file of an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Remote pair `label,label`; repeat for several. Replaces the configured pairs.
    #[arg(long = "pair", global = true)]
    pairs: Vec<String>,
}

impl From<Kind> for Command {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Stability => Command::Stability,
            Kind::Spectrum => Command::Spectrum,
            Kind::NodeEntanglement => Command::NodeEntanglement,
            Kind::BandwidthSweep => Command::BandwidthSweep,
            Kind::SwapMap => Command::SwapMap,
            Kind::CollisionCompare => Command::CollisionCompare,
        }
    }
}

fn config(flags: &Flags) -> Result<Config, CliError> {
    let mut c = match &flags.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = flags.seed {
        c.seed = s;
    }
    if let Some(t) = flags.tolerance {
        c.tolerance = t;
    }
    if !flags.pairs.is_empty() {
        c.swap.pairs = flags.pairs.clone();
    }
    Ok(c)
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    let config = config(&cli.flags)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.flags.workers)
        .build()
        .map_err(|e| {
            CliError::Config(format!("cannot start {} workers: {e}", cli.flags.workers))
        })?;
    let record = pool.install(|| run(cli.command.into(), &config))?;
    let written = emit(&record, &cli.flags.out)?;
    for p in &written {
        println!("{}", p.display());
    }
    if let Some(f) = &record.failure {
        eprintln!("hybrid-swap: {f}");
    } else if record.flagged > 0 {
        eprintln!(
            "hybrid-swap: {} of {} points flagged",
            record.flagged, record.points
        );
    }
    Ok(record.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hybrid-swap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
