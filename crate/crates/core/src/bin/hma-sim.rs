use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hma_core::harness::{emit_csv, run_experiment, ScenarioConfig};
use hma_core::power_model::{architecture_power, Architecture, DeviceCatalog, Dims};

#[derive(Parser)]
#[command(name = "hma-sim", version, about = "Uplink rate / energy-efficiency simulator for metasurface antennas")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write the result table as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the power breakdown of one architecture.
    Power {
        /// HMA, DPA or FCHP-ACT.
        #[arg(long)]
        arch: Architecture,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Device catalog CSV; the built-in table is used otherwise.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Signal power at each LNA input, W.
        #[arg(long, default_value_t = 0.0)]
        lna_input_w: f64,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> hma_core::Result<bool> {
    match cli.cmd {
        Cmd::Run { config, out, jobs, seed } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let rows = run_experiment(&cfg, jobs)?;
            emit_csv(&rows, &out)?;
            let mut ok = true;
            for r in rows.iter().filter(|r| r.failures > 0) {
                eprintln!(
                    "{} at {} dBm/m2: {} of {} trials failed{}",
                    r.arch,
                    r.p_t_dbm,
                    r.failures,
                    r.n_trials,
                    if r.flagged() { " (over budget)" } else { "" }
                );
                ok &= !r.flagged();
            }
            Ok(ok)
        }
        Cmd::Power {
            arch,
            n,
            m,
            catalog,
            lna_input_w,
        } => {
            let cat = match catalog {
                Some(p) => DeviceCatalog::load(p)?,
                None => DeviceCatalog::default(),
            };
            let b = architecture_power(arch, Dims::for_arch(arch, n, m), &cat, lna_input_w)?;
            println!("{b}");
            Ok(true)
        }
        Cmd::Validate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            cfg.validate()?;
            println!(
                "ok: {} architectures, {} power points, {} trials each",
                cfg.architectures.len(),
                cfg.sweep_points().len(),
                cfg.n_drops * cfg.n_channels_per_drop
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
