use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use underlay_relay::experiments::{self, config::parse_policies, CsvTable, ExperimentConfig};
use underlay_relay::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

/// Outage experiments for an underlay cognitive radio pair assisted by a
/// shared relay.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Secondary outage against the primary SNR, averaged over random relay
    /// positions.
    ///
    /// CSV columns: gamma_p_db, policy, outage_sec_mc, outage_sec_ci (95%
    /// half-width), outage_sec_bound (closed form; blank where none exists),
    /// outage_pri_mc, outage_pri_ci, freq_d0..freq_d3 (relay decision
    /// frequencies).
    SweepSnr(Common),
    /// Secondary outage against the primary rate, with R_s = R_p / 2.
    ///
    /// CSV columns: rate_primary, rate_secondary, policy, outage_sec_mc,
    /// outage_sec_ci, outage_pri_mc, outage_pri_ci, freq_d0..freq_d3,
    /// rate_cutoff (primary rate beyond which the secondary must stay
    /// silent).
    SweepRate(Common),
    /// Secondary outage for each relay position on a grid.
    ///
    /// CSV columns: x, y, policy, valid (false where the relay sits on
    /// another node), outage_sec_mc, outage_sec_ci, outage_pri_mc,
    /// dominant_decision.
    GridPosition(Common),
    /// Checks closed forms and bounds against simulation; exits with 3 if
    /// any check fails.
    Validate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per operating point.
    #[arg(long)]
    trials: Option<u64>,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated policies: direct, primary-only, secondary-only,
    /// adaptive1, adaptive2.
    #[arg(long)]
    policy: Option<String>,
    /// Random relay positions averaged per sweep point.
    #[arg(long)]
    positions: Option<usize>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Override any config key, e.g. `--set gamma_p_db=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> underlay_relay::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::reference(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
            cfg.validate_trials = trials;
        }
        if let Some(p) = &self.policy {
            cfg.policies = Some(parse_policies(p)?);
        }
        if let Some(n) = self.positions {
            cfg.positions = n;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open_output(cfg: &ExperimentConfig) -> underlay_relay::Result<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| {
            Error::Io {
                path: path.clone(),
                source,
            }
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

type Sweep = fn(&ExperimentConfig) -> underlay_relay::Result<CsvTable>;

fn run(command: Command) -> Result<ExitCode, (u8, Error)> {
    let (common, sweep): (&Common, Option<Sweep>) = match &command {
        Command::SweepSnr(c) => (c, Some(experiments::sweep_snr)),
        Command::SweepRate(c) => (c, Some(experiments::sweep_rate)),
        Command::GridPosition(c) => (c, Some(experiments::grid_position)),
        Command::Validate(c) => (c, None),
    };
    let cfg = common.config().map_err(|e| (EXIT_CONFIG, e))?;
    let fail = |e: Error| (1, e);
    let out = || open_output(&cfg).map_err(fail);
    match sweep {
        Some(sweep) => {
            let table = sweep(&cfg).map_err(fail)?;
            table.write_to(out()?).map_err(fail)?;
            Ok(ExitCode::SUCCESS)
        }
        None => {
            let report = experiments::run_validation(&cfg).map_err(fail)?;
            let mut w = out()?;
            writeln!(w, "{report}")
                .and_then(|_| w.flush())
                .map_err(|source| {
                    fail(Error::Io {
                        path: cfg.output.clone().unwrap_or_else(|| "<stdout>".into()),
                        source,
                    })
                })?;
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
