//! `flowpca`: PTDF, synthetic injections, PCA, injection/flow duality checks
//! and network size scans from the command line.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 when a
//! numerical check fails.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowpca::grid::LatticeSpec;

use commands::Target;
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "flowpca",
    version,
    about = "Principal injection and flow patterns of power grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// key = value run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Node table (id,x_km,y_km,country,mean_load_mw).
    #[arg(long)]
    nodes: Option<PathBuf>,
    /// Line table (id,from,to,reactance).
    #[arg(long)]
    lines: Option<PathBuf>,
    /// Injection time series; synthesized on the network when absent.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Explained-variance threshold for K.
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated network sizes for `scan`.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Hours of synthetic data.
    #[arg(long)]
    hours: Option<usize>,
    /// Network area used for the correlation length.
    #[arg(long)]
    area_km2: Option<f64>,
    /// Wind capacity factors to use instead of synthetic weather.
    #[arg(long)]
    wind: Option<PathBuf>,
    /// Solar capacity factors to use instead of synthetic weather.
    #[arg(long)]
    solar: Option<PathBuf>,
    /// Load series to use instead of the synthetic profile.
    #[arg(long)]
    load: Option<PathBuf>,
}

impl Common {
    fn resolve(self) -> flowpca::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(Overrides {
            nodes: self.nodes,
            lines: self.lines,
            series: self.series,
            wind: self.wind,
            solar: self.solar,
            load_series: self.load,
            out: self.out,
            seed: self.seed,
            threshold: self.threshold,
            sizes: self.sizes,
            hours: self.hours,
            area_km2: self.area_km2,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the PTDF matrix and check its rank.
    Ptdf(Common),
    /// Synthesize weather, load, shares and balanced injections.
    Synth(Common),
    /// Principal components of injections or flows.
    Pca {
        #[arg(long, value_enum, default_value = "injections")]
        target: Target,
        #[command(flatten)]
        common: Common,
    },
    /// Trace, eigenvector, majorization and overlap checks linking the
    /// injection and flow covariances.
    Duality(Common),
    /// K for injections and flows over coarsened network sizes.
    Scan(Common),
    /// Write a rectangular test network.
    Lattice(LatticeArgs),
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long, default_value_t = 16)]
    nx: usize,
    #[arg(long, default_value_t = 16)]
    ny: usize,
    #[arg(long, default_value_t = 100.0)]
    spacing_km: f64,
    #[arg(long, default_value_t = 2)]
    countries_x: usize,
    #[arg(long, default_value_t = 2)]
    countries_y: usize,
    #[arg(long, default_value_t = 100.0)]
    base_load_mw: f64,
    #[arg(long, default_value_t = 0.0)]
    load_spread: f64,
    /// 0 gives unit reactances.
    #[arg(long, default_value_t = 0.0)]
    reactance_spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn run(command: Command) -> flowpca::Result<Vec<String>> {
    match command {
        Command::Ptdf(c) => commands::cmd_ptdf(&c.resolve()?),
        Command::Synth(c) => commands::cmd_synth(&c.resolve()?),
        Command::Pca { target, common } => commands::cmd_pca(&common.resolve()?, target),
        Command::Duality(c) => commands::cmd_duality(&c.resolve()?),
        Command::Scan(c) => commands::cmd_scan(&c.resolve()?),
        Command::Lattice(a) => {
            let spec = LatticeSpec {
                nx: a.nx,
                ny: a.ny,
                spacing_km: a.spacing_km,
                countries_x: a.countries_x,
                countries_y: a.countries_y,
                base_load_mw: a.base_load_mw,
                load_spread: a.load_spread,
                reactance_spread: a.reactance_spread,
                seed: a.seed,
            };
            commands::cmd_lattice(&spec, &a.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(lines) => {
            let mut stdout = std::io::stdout().lock();
            for l in lines {
                // a closed pipe (e.g. `| head`) is not an error
                if writeln!(stdout, "{l}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
