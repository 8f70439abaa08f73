use std::path::PathBuf;
use std::process::ExitCode;

use brakewell::bump::BumpMode;
use brakewell::harness::{cmd_census, cmd_export, cmd_verify, ExportKind, RunOptions};
use brakewell::scenario::Scenario;
use clap::{Args, Parser, Subcommand};

/// Brake orbits and homoclinics of annular potential wells.
#[derive(Parser)]
#[command(version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every module's invariant battery and write verify.csv.
    Verify(Common),
    /// Count brake orbits or homoclinics and write the census files.
    Census(Common),
    /// Write a dataset: potential-grid, flow-grid or orbits.
    Export {
        what: ExportKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<BumpMode>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    energy: Option<f64>,
    /// Angular grid of the census.
    #[arg(long)]
    grid: Option<usize>,
    /// Nonzero exit when the census has inconclusive shots.
    #[arg(long)]
    strict: bool,
    /// Omit the timestamp line from report files.
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn scenario(&self) -> brakewell::Result<Scenario> {
        let mut sc = match &self.config {
            Some(path) => Scenario::from_file(path)?,
            None => Scenario::default(),
        };
        if let Some(m) = self.mode {
            sc.mode = m;
        }
        if let Some(e) = self.eps {
            sc.eps = e;
        }
        if let Some(e) = self.energy {
            sc.energy = e;
        }
        if let Some(m) = self.grid {
            sc.sweep.grid = m;
        }
        if let Some(dir) = &self.out {
            sc.out_dir = dir.clone();
        }
        sc.validate()?;
        Ok(sc)
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            strict: self.strict,
            timestamp: !self.no_timestamp,
        }
    }
}

fn run(cli: Cli) -> brakewell::Result<i32> {
    match cli.command {
        Command::Verify(c) => cmd_verify(&c.scenario()?, &c.options()),
        Command::Census(c) => cmd_census(&c.scenario()?, &c.options()),
        Command::Export { what, common } => cmd_export(&common.scenario()?, what).map(|_| 0),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
