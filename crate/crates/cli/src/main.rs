mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nfloc::pipeline::{self, HeatmapMode};

use config::{ConfigError, RunConfig};
use output::Table;

#[derive(Parser)]
#[command(name = "nfloc", version, about = "Near-field multi-user localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`, defaults to the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Replaces the base seed from the config.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// RMSE against SNR for every configured scheme.
    SnrSweep(Common),
    /// RMSE over a rectangle of single-user positions.
    Heatmap(Common),
    /// RMSE after every outer iteration.
    Converge(Common),
    /// RMSE against the number of RF chains at fixed aperture.
    RfSweep(Common),
    /// Estimate track of one realization.
    SingleRun(Common),
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<nfloc::Error> for Failure {
    fn from(e: nfloc::Error) -> Self {
        use nfloc::Error::*;
        match e {
            NonFiniteObjective | IllConditioned(_) | NotUnitModulus(..) | ZeroSignal => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<PathBuf, Failure> {
    let (common, name) = match &cli.command {
        Command::SnrSweep(c) => (c, "snr_sweep.csv"),
        Command::Heatmap(c) => (c, "heatmap.csv"),
        Command::Converge(c) => (c, "converge.csv"),
        Command::RfSweep(c) => (c, "rf_sweep.csv"),
        Command::SingleRun(c) => (c, "single_run.csv"),
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed_override {
        cfg.seed = seed;
    }
    let resolved = cfg.resolve()?;
    let mut spec = resolved.spec.clone();

    if let Some(n) = common.workers {
        if n == 0 {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let mut table = match &cli.command {
        Command::SnrSweep(_) => output::sweep_table(&pipeline::snr_sweep(&spec)?),
        Command::Converge(_) => output::convergence_table(&pipeline::convergence_track(&spec)?),
        Command::RfSweep(_) => output::rf_table(&pipeline::rf_sweep(&spec, &cfg.rf_counts()?)?),
        Command::SingleRun(_) => output::track_table(&pipeline::single_run(&spec)?),
        Command::Heatmap(_) => {
            let (region, mode, scheme, snr_db) = cfg.heatmap(&resolved)?;
            spec.snr_db = vec![snr_db];
            let mut t = output::heatmap_table(&pipeline::heatmap_sweep(&spec, &region, mode, scheme, 0)?);
            if let HeatmapMode::FixedFocus(f) = mode {
                let (x, y) = f.xy();
                t.comment(format!("focus_x_m = {x}"));
                t.comment(format!("focus_y_m = {y}"));
            }
            t
        }
    };
    prepend_header(&mut table, &cfg, &resolved);

    let dir = match (&common.out, &cfg.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    table.write(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    if cfg.output.verbosity > 0 {
        eprintln!("wrote {} rows to {}", table.len(), path.display());
    }
    Ok(path)
}

fn prepend_header(table: &mut Table, cfg: &RunConfig, resolved: &config::Resolved) {
    let mut head = Table::new(&[]);
    head.comment(format!("nfloc {}", env!("CARGO_PKG_VERSION")));
    head.comment(format!("seed = {}", cfg.seed));
    head.comment(format!("wavelength_m = {}", resolved.wavelength_m));
    head.comment(format!("fraunhofer_distance_m = {}", resolved.fraunhofer_distance_m));
    head.comment("resolved configuration:");
    head.comment_block(&cfg.to_toml());
    table.prepend_comments(head);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_map_to_exit_three() {
        assert!(matches!(Failure::from(nfloc::Error::NonFiniteObjective), Failure::Numerical(_)));
        assert!(matches!(Failure::from(nfloc::Error::IllConditioned(1e-20)), Failure::Numerical(_)));
        assert!(matches!(Failure::from(nfloc::Error::InvalidConfig("x".into())), Failure::Config(_)));
    }
}
