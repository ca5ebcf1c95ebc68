use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tsvpdn::config::{load_config, DesignSelect, RunConfig};
use tsvpdn::{Error, Result};
use tsvpdn_cli::{run_command, Command};

/// Clustered vs distributed TSV power delivery analysis for 3D DRAM.
#[derive(Parser, Debug)]
#[command(name = "tsvpdn", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: Option<PathBuf>,
    /// clustered, distributed or both
    #[arg(long)]
    design: Option<String>,
    /// Active subarray count for `irmap`
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, num_args = 1..)]
    workload: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    margin_mv: Option<f64>,
    #[arg(long)]
    horizon_years: Option<f64>,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.design {
        cfg.design = DesignSelect::parse(d)
            .ok_or_else(|| Error::InvalidParams(format!("--design: expected clustered, distributed or both, got {d}")))?;
    }
    for w in &cli.workload {
        if !w.is_file() {
            let source = std::io::Error::new(std::io::ErrorKind::NotFound, "workload file not found");
            return Err(Error::Io { path: w.clone(), source });
        }
        cfg.workloads.push(w.clone());
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(m) = cli.margin_mv {
        if !(m > 0.0) {
            return Err(Error::InvalidParams(format!("--margin-mv must be positive, got {m}")));
        }
        cfg.set_margin(m);
    }
    if let Some(h) = cli.horizon_years {
        cfg.horizon_years = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match config(&cli).and_then(|cfg| run_command(cli.command, &cfg, cli.n)) {
        Ok(report) => {
            print!("{}", report.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tsvpdn: {e}");
            ExitCode::FAILURE
        }
    }
}
