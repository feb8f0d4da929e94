use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Parser;

use boson_sde::config::{parse_config, Mode};
use boson_sde::runner;

/// Open-boson / SDE correspondence simulator.
#[derive(Parser, Debug)]
#[command(name = "boson-sde", version, about)]
struct Cli {
    /// Run mode: meanfield | sde | lindblad | randomwalk | verify | dnse-demo | beta-check
    mode: String,

    /// Path to the TOML config file.
    #[arg(long)]
    config: PathBuf,

    /// Override the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for ensemble integration (default: all cores).
    /// Never changes the output bytes.
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory (default: [output] dir from the config, then ".").
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mode: Mode = cli.mode.parse().map_err(|e: String| anyhow!(e))?;
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("worker pool setup")?;
    }
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    let mut config = parse_config(&text, mode)?;
    if let Some(seed) = cli.seed {
        config.sde.seed = seed;
    }
    let out_dir = cli
        .out
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let output = runner::run(&config, &out_dir)?;
    println!("wrote {}", output.csv_path.display());
    println!("wrote {}", output.manifest_path.display());
    Ok(())
}
