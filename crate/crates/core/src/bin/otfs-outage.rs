//! `otfs-outage` — outage sweeps, proposition checks and bound tables.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use otfs_outage::experiment::{
    bound_table, parse_distortions, parse_snr_range, run_sweep, verify_report_with, write_bound_csv, write_csv,
    ExperimentConfig, GramMode,
};
use otfs_outage::{Error, Result};

#[derive(Parser)]
#[command(name = "otfs-outage", version, about = "OTFS outage probability under a lossy-rate target")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo outage sweep over SNR and distortion; writes CSV.
    Sweep(Common),
    /// Check the determinant inequalities on random channel draws.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Number of random realizations to check.
        #[arg(long, default_value_t = 1000)]
        campaigns: u64,
        /// Inject a corrupted Gram decomposition; succeeds only if every
        /// campaign is flagged.
        #[arg(long)]
        self_test: bool,
    },
    /// Print the closed-form outage lower bound.
    Bound {
        #[command(flatten)]
        common: Common,
        /// Comma separated path counts (defaults to the configured P).
        #[arg(long, value_delimiter = ',')]
        paths: Vec<u32>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// SNR grid in dB as start:stop:step (inclusive) or a single value.
    #[arg(long)]
    snr: Option<String>,
    /// Comma separated distortion targets.
    #[arg(long)]
    distortion: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the M = N = 32 frame.
    #[arg(long)]
    heavy: bool,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Bits per symbol K.
    #[arg(long)]
    bits: Option<u32>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(snr) = &self.snr {
            cfg.snr_db = parse_snr_range(snr)?;
        }
        if let Some(d) = &self.distortion {
            cfg.distortion = parse_distortions(d)?;
        }
        if let Some(out) = &self.out {
            cfg.output_path = Some(out.clone());
        }
        if self.heavy {
            cfg.enable_heavy();
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if let Some(k) = self.bits {
            cfg.bits_per_symbol = k;
        }
        Ok(cfg)
    }
}

fn output(cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.output_path {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sweep(common) => {
            let cfg = common.config()?;
            let rows = run_sweep(&cfg)?;
            write_csv(&rows, output(&cfg)?)?;
            Ok(true)
        }
        Command::Verify { common, campaigns, self_test } => {
            let cfg = common.config()?;
            let mode = if self_test { GramMode::Corrupted } else { GramMode::Exact };
            let report = verify_report_with(&cfg, campaigns, mode)?;
            let mut out = output(&cfg)?;
            writeln!(out, "{report}")?;
            if self_test {
                let caught = report.violations.len() as u64 == report.campaigns;
                writeln!(
                    out,
                    "self-test: {} of {} corrupted decompositions flagged",
                    report.violations.len(),
                    report.campaigns
                )?;
                out.flush()?;
                Ok(caught)
            } else {
                out.flush()?;
                Ok(report.success())
            }
        }
        Command::Bound { common, paths } => {
            let cfg = common.config()?;
            let paths = if paths.is_empty() {
                vec![u32::try_from(cfg.paths).map_err(|_| Error::Config("path count too large".into()))?]
            } else {
                paths
            };
            let rows = bound_table(&cfg.snr_db, &cfg.distortion, &paths, cfg.bits_per_symbol)?;
            write_bound_csv(&rows, output(&cfg)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
