//! Experiment drivers behind the command line tool: the SNR sweep, the rate
//! sweep, the relay-position grid and the validation suite. Every sweep
//! returns a [`CsvTable`]; floats are written in shortest round-trip form so
//! reruns with the same seed are byte-identical.

pub mod config;
pub mod validate;

use std::io::Write;

use crate::analytic::{cond_outage_d0, outage_breakdown};
use crate::decision::Decision;
use crate::error::{Error, Result};
use crate::model::{cutoff_rate_primary, link_variances, Topology};
use crate::montecarlo::{
    random_relay_positions, OperatingPoint, OutageEstimate, SchemePolicy, Simulator,
};

pub use config::{ExperimentConfig, SnrPoint, SweepRange};
pub use validate::{run_validation, CheckResult, ValidationReport};

pub const SNR_COLUMNS: [&str; 11] = [
    "gamma_p_db",
    "policy",
    "outage_sec_mc",
    "outage_sec_ci",
    "outage_sec_bound",
    "outage_pri_mc",
    "outage_pri_ci",
    "freq_d0",
    "freq_d1",
    "freq_d2",
    "freq_d3",
];

pub const RATE_COLUMNS: [&str; 12] = [
    "rate_primary",
    "rate_secondary",
    "policy",
    "outage_sec_mc",
    "outage_sec_ci",
    "outage_pri_mc",
    "outage_pri_ci",
    "freq_d0",
    "freq_d1",
    "freq_d2",
    "freq_d3",
    "rate_cutoff",
];

pub const GRID_COLUMNS: [&str; 8] = [
    "x",
    "y",
    "policy",
    "valid",
    "outage_sec_mc",
    "outage_sec_ci",
    "outage_pri_mc",
    "dominant_decision",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(header: &[&'static str]) -> Self {
        CsvTable {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }
}

/// Shortest decimal string that reads back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn freq_cells(e: &OutageEstimate) -> impl Iterator<Item = String> + '_ {
    e.decision_freq.iter().map(|&f| fmt_f64(f))
}

fn decision_name(d: Decision) -> &'static str {
    match d {
        Decision::D0 => "D0",
        Decision::D1 => "D1",
        Decision::D2 => "D2",
        Decision::D3 => "D3",
    }
}

fn simulator(cfg: &ExperimentConfig) -> Result<Simulator> {
    Simulator::new(cfg.trials, cfg.seed, cfg.workers)
}

/// Closed-form secondary outage a policy can be compared with: the total
/// outage bound for scheme 1 and the exact repetition outage for the direct
/// scheme.
fn secondary_bound(point: &OperatingPoint, policy: SchemePolicy) -> Result<Option<f64>> {
    if !point.secondary_active() {
        return Ok(Some(1.0));
    }
    let s = point.effective_snrs();
    Ok(match policy {
        SchemePolicy::Adaptive1 => Some(
            outage_breakdown(
                &s,
                point.lambda_p,
                point.lambda_s,
                point.feasibility.assist_primary,
            )?
            .total_secondary,
        ),
        SchemePolicy::Direct => Some(cond_outage_d0(s.ss, s.ps, point.lambda_s)),
        _ => None,
    })
}

fn resolve_positions(
    sim: &Simulator,
    cfg: &ExperimentConfig,
    params: &crate::model::SystemParams,
) -> Result<Vec<OperatingPoint>> {
    let positions = random_relay_positions(cfg.positions, &cfg.relay_region, cfg.seed);
    let topologies: Vec<Topology> = positions
        .iter()
        .map(|&p| cfg.topology.with_relay(p))
        .collect();
    sim.resolve_all(params, &topologies, &cfg.resolve)
        .into_iter()
        .collect()
}

/// Secondary outage against `γ_p`, averaged over random relay positions.
pub fn sweep_snr(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let policies = cfg
        .policies
        .clone()
        .unwrap_or_else(|| SchemePolicy::ALL.to_vec());
    let sim = simulator(cfg)?;
    let mut table = CsvTable::new(&SNR_COLUMNS);
    for snr in &cfg.snr_sweep {
        let params = cfg.params_at_snr(snr);
        let points = resolve_positions(&sim, cfg, &params)?;
        let estimates = sim.average_points(&points, &policies)?;
        for est in estimates {
            let mut bounds = Vec::with_capacity(points.len());
            for point in &points {
                if let Some(b) = secondary_bound(point, est.policy)? {
                    bounds.push(b);
                }
            }
            let bound = if bounds.len() == points.len() {
                fmt_f64(bounds.iter().sum::<f64>() / bounds.len() as f64)
            } else {
                String::new()
            };
            let mut row = vec![
                fmt_f64(snr.db),
                est.policy.to_string(),
                fmt_f64(est.secondary.p_hat),
                fmt_f64(est.secondary.half_width_95),
                bound,
                fmt_f64(est.primary.p_hat),
                fmt_f64(est.primary.half_width_95),
            ];
            row.extend(freq_cells(&est.secondary));
            table.rows.push(row);
        }
    }
    Ok(table)
}

/// Secondary outage against `R_p` with `R_s = R_p / 2`.
pub fn sweep_rate(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let policies = cfg
        .policies
        .clone()
        .unwrap_or_else(|| vec![SchemePolicy::Adaptive1, SchemePolicy::Adaptive2]);
    let sim = simulator(cfg)?;
    let variances = link_variances(&cfg.topology, cfg.params.pathloss_exponent)?;
    let mut table = CsvTable::new(&RATE_COLUMNS);
    for rate in cfg.rate_sweep.values() {
        let params = cfg.params_at_rate(rate);
        let cutoff = cutoff_rate_primary(&params, &variances);
        let points = resolve_positions(&sim, cfg, &params)?;
        for est in sim.average_points(&points, &policies)? {
            let mut row = vec![
                fmt_f64(params.rate_primary),
                fmt_f64(params.rate_secondary),
                est.policy.to_string(),
                fmt_f64(est.secondary.p_hat),
                fmt_f64(est.secondary.half_width_95),
                fmt_f64(est.primary.p_hat),
                fmt_f64(est.primary.half_width_95),
            ];
            row.extend(freq_cells(&est.secondary));
            row.push(fmt_f64(cutoff));
            table.rows.push(row);
        }
    }
    Ok(table)
}

/// Secondary outage for every relay position on a grid. Cells where the
/// relay coincides with another node are marked invalid.
pub fn grid_position(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let policies = cfg
        .policies
        .clone()
        .unwrap_or_else(|| vec![SchemePolicy::Adaptive2]);
    let sim = simulator(cfg)?;
    let cells: Vec<(f64, f64)> = cfg
        .grid_y
        .values()
        .into_iter()
        .flat_map(|y| cfg.grid_x.values().into_iter().map(move |x| (x, y)))
        .collect();
    let topologies: Vec<Topology> = cells
        .iter()
        .map(|&(x, y)| cfg.topology.with_relay(crate::model::Point::new(x, y)))
        .collect();
    let points = sim.resolve_all(&cfg.params, &topologies, &cfg.resolve);

    let mut table = CsvTable::new(&GRID_COLUMNS);
    for (stream, (&(x, y), point)) in cells.iter().zip(points).enumerate() {
        match point {
            Ok(point) => {
                for est in sim.estimate(&point, &policies, stream as u64)? {
                    table.rows.push(vec![
                        fmt_f64(x),
                        fmt_f64(y),
                        est.policy.to_string(),
                        "true".into(),
                        fmt_f64(est.secondary.p_hat),
                        fmt_f64(est.secondary.half_width_95),
                        fmt_f64(est.primary.p_hat),
                        decision_name(est.secondary.dominant_decision()).into(),
                    ]);
                }
            }
            Err(Error::CoincidentNodes(..)) => {
                for policy in &policies {
                    table.rows.push(vec![
                        fmt_f64(x),
                        fmt_f64(y),
                        policy.to_string(),
                        "false".into(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(table)
}
