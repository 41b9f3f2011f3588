use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use semgeo::config::OutputFormat;
use semgeo::{output, Command, Config, Error};

/// Geometry reports for hidden-state point clouds.
#[derive(Debug, Parser)]
#[command(name = "semgeo", version)]
struct Cli {
    /// TOML config; every key has a default
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Base seed for synthetic data and experiments
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Config override, e.g. `--set gap.fit_max=0.2`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

fn execute(cli: Cli) -> Result<(), Error> {
    let mut cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = Some(w as usize);
    }
    if let Some(o) = cli.out {
        cfg.run.out = o;
    }
    if let Some(f) = cli.format {
        cfg.run.format = f;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.run.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let reports = pool.install(|| semgeo::run(cli.command, &cfg))?;
    let written = output::write_reports(&cfg.run.out, cfg.run.format, &reports)?;
    output::write_manifest(&cfg.run.out, cli.command.name(), &cfg, &written)?;
    for name in &written {
        println!("{}", cfg.run.out.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semgeo: error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
