//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. SNRs are given in dB and turned
//! into linear ratios once, here. Command-line overrides use the same keys.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{db_to_linear, Point, SystemParams, Topology};
use crate::montecarlo::{D2PowerRule, Region, ResolveOptions, SchemePolicy};

/// `start:stop:step`, inclusive of `stop` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
            return Err(Error::param(
                "sweep",
                format!("empty or invalid range {start}:{stop}:{step}"),
            ));
        }
        Ok(SweepRange { start, stop, step })
    }

    /// `start + k·step`, computed from `k` so errors do not accumulate.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        // snap to 12 decimals so 0.2 + 2 * 0.2 prints as 0.6
        (0..count)
            .map(|k| ((self.start + k as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

/// A swept SNR with its dB label and linear value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    pub db: f64,
    pub linear: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Fixed-point parameters; `snr_primary` and `snr_relay_max` are linear.
    pub params: SystemParams,
    pub topology: Topology,
    pub snr_sweep: Vec<SnrPoint>,
    /// Whether `γ_r^max` follows `γ_p` along the SNR sweep.
    pub relay_tracks_primary: bool,
    pub rate_sweep: SweepRange,
    pub grid_x: SweepRange,
    pub grid_y: SweepRange,
    pub relay_region: Region,
    /// `None` leaves the choice to each command.
    pub policies: Option<Vec<SchemePolicy>>,
    pub trials: u64,
    pub seed: u64,
    pub positions: usize,
    /// Zero means one worker per core.
    pub workers: usize,
    pub resolve: ResolveOptions,
    /// Relay positions the validation suite evaluates.
    pub validate_relays: Vec<Point>,
    pub validate_trials: u64,
    pub validate_sets: usize,
    /// Multiplies the thresholds fed to the closed forms during validation;
    /// anything but 1 is a deliberate corruption.
    pub validate_lambda_scale: f64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The reference scenario: R_p = 0.8, R_s = 0.2, ε = 0.1, β = 4 and
    /// γ_p = γ_r^max = 20 dB.
    pub fn reference() -> Self {
        let snr = SweepRange {
            start: 0.0,
            stop: 30.0,
            step: 2.0,
        };
        ExperimentConfig {
            scenario: "reference".into(),
            params: SystemParams::reference(),
            topology: Topology::reference(Point::new(0.5, 0.91)),
            snr_sweep: snr_points(&snr),
            relay_tracks_primary: true,
            rate_sweep: SweepRange {
                start: 0.2,
                stop: 3.0,
                step: 0.2,
            },
            grid_x: SweepRange {
                start: -0.5,
                stop: 1.5,
                step: 0.1,
            },
            grid_y: SweepRange {
                start: 0.0,
                stop: 2.0,
                step: 0.1,
            },
            relay_region: Region::REFERENCE,
            policies: None,
            trials: 100_000,
            seed: 1,
            positions: 50,
            workers: 0,
            resolve: ResolveOptions::default(),
            validate_relays: vec![
                Point::new(0.5, 0.91),
                Point::new(0.8, 1.5),
                Point::new(0.3, 0.4),
            ],
            validate_trials: 1_000_000,
            validate_sets: 20,
            validate_lambda_scale: 1.0,
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = ExperimentConfig::reference();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_line(line, origin, i + 1)?;
        }
        self.validate()
            .map_err(|e| config_error(origin, 0, e.to_string()))
    }

    /// Applies one `key=value` override, as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        self.apply_line(assignment, "--set", 0)?;
        self.validate()
            .map_err(|e| config_error("--set", 0, e.to_string()))
    }

    fn apply_line(&mut self, line: &str, origin: &str, lineno: usize) -> Result<()> {
        let (key, value) = line.split_once('=').ok_or_else(|| {
            config_error(
                origin,
                lineno,
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        self.set(key.trim(), value.trim())
            .map_err(|e| config_error(origin, lineno, e.to_string()))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| Error::param("key", format!("unknown key `{key}`")))?;
        match key {
            "scenario" => self.scenario = value.to_string(),
            "rate_primary" => self.params.rate_primary = parse_f64(key, value)?,
            "rate_secondary" => self.params.rate_secondary = parse_f64(key, value)?,
            "outage_threshold" => self.params.outage_threshold = parse_f64(key, value)?,
            "gamma_p_db" => self.params.snr_primary = db_to_linear(parse_f64(key, value)?),
            "gamma_r_max_db" => self.params.snr_relay_max = db_to_linear(parse_f64(key, value)?),
            "pathloss_exponent" => self.params.pathloss_exponent = parse_f64(key, value)?,
            "pt" => self.topology.primary_tx = parse_point(key, value)?,
            "st" => self.topology.secondary_tx = parse_point(key, value)?,
            "pd" => self.topology.primary_rx = parse_point(key, value)?,
            "sd" => self.topology.secondary_rx = parse_point(key, value)?,
            "relay" => self.topology.relay = parse_point(key, value)?,
            "snr_sweep_db" => self.snr_sweep = snr_points(&parse_range(key, value)?),
            "relay_tracks_primary" => self.relay_tracks_primary = parse_bool(key, value)?,
            "rate_sweep" => self.rate_sweep = parse_range(key, value)?,
            "grid_x" => self.grid_x = parse_range(key, value)?,
            "grid_y" => self.grid_y = parse_range(key, value)?,
            "relay_region" => {
                let v = parse_list(key, value, 4)?;
                self.relay_region = Region {
                    x_min: v[0],
                    x_max: v[1],
                    y_min: v[2],
                    y_max: v[3],
                };
            }
            "policies" => self.policies = Some(parse_policies(value)?),
            "trials" => self.trials = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "positions" => self.positions = parse_int(key, value)?,
            "workers" => self.workers = parse_int(key, value)?,
            "d2_power_rule" => self.resolve.d2_rule = value.parse::<D2PowerRule>()?,
            "alpha_draws" => self.resolve.alpha_draws = parse_int(key, value)?,
            "alpha_seed" => self.resolve.alpha_seed = parse_int(key, value)?,
            "validate_relays" => {
                self.validate_relays = value
                    .split(';')
                    .map(|p| parse_point(key, p))
                    .collect::<Result<_>>()?;
            }
            "validate_trials" => self.validate_trials = parse_int(key, value)?,
            "validate_sets" => self.validate_sets = parse_int(key, value)?,
            "validate_lambda_scale" => self.validate_lambda_scale = parse_f64(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            _ => unreachable!("every entry of KEYS is handled"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials == 0 || self.validate_trials == 0 {
            return Err(Error::ZeroTrials);
        }
        if self.positions == 0 {
            return Err(Error::param(
                "positions",
                "need at least one relay position",
            ));
        }
        if self.grid_x.values().len() < 2 || self.grid_y.values().len() < 2 {
            return Err(Error::param("grid", "grid needs at least 2x2 cells"));
        }
        if !(self.rate_sweep.start > 0.0) {
            return Err(Error::param("rate_sweep", "rates must be > 0"));
        }
        let r = &self.relay_region;
        if !(r.x_max >= r.x_min && r.y_max >= r.y_min) {
            return Err(Error::param(
                "relay_region",
                "expected x_min,x_max,y_min,y_max",
            ));
        }
        if !(self.validate_lambda_scale > 0.0) {
            return Err(Error::param("validate_lambda_scale", "must be > 0"));
        }
        if self.resolve.alpha_draws == 0 {
            return Err(Error::param("alpha_draws", "must be > 0"));
        }
        Ok(())
    }

    /// Parameters at one point of the SNR sweep.
    pub fn params_at_snr(&self, snr: &SnrPoint) -> SystemParams {
        let mut p = self.params;
        p.snr_primary = snr.linear;
        if self.relay_tracks_primary {
            p.snr_relay_max = snr.linear;
        }
        p
    }

    /// Parameters at one point of the rate sweep, `R_s = R_p / 2`.
    pub fn params_at_rate(&self, rate_primary: f64) -> SystemParams {
        let mut p = self.params;
        p.rate_primary = rate_primary;
        p.rate_secondary = rate_primary / 2.0;
        p
    }
}

/// Keys accepted in config files and `--set` overrides.
pub const KEYS: [&str; 31] = [
    "scenario",
    "rate_primary",
    "rate_secondary",
    "outage_threshold",
    "gamma_p_db",
    "gamma_r_max_db",
    "pathloss_exponent",
    "pt",
    "st",
    "pd",
    "sd",
    "relay",
    "snr_sweep_db",
    "relay_tracks_primary",
    "rate_sweep",
    "grid_x",
    "grid_y",
    "relay_region",
    "policies",
    "trials",
    "seed",
    "positions",
    "workers",
    "d2_power_rule",
    "alpha_draws",
    "alpha_seed",
    "validate_relays",
    "validate_trials",
    "validate_sets",
    "validate_lambda_scale",
    "output",
];

fn snr_points(range: &SweepRange) -> Vec<SnrPoint> {
    range
        .values()
        .into_iter()
        .map(|db| SnrPoint {
            db,
            linear: db_to_linear(db),
        })
        .collect()
}

fn config_error(origin: &str, line: usize, reason: String) -> Error {
    Error::Config {
        path: origin.to_string(),
        line,
        reason,
    }
}

fn parse_f64(key: &'static str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::param(key, format!("`{value}` is not a number")))
}

fn parse_int<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .replace('_', "")
        .parse::<T>()
        .map_err(|_| Error::param(key, format!("`{value}` is not a non-negative integer")))
}

fn parse_bool(key: &'static str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::param(key, format!("`{value}` is not a boolean"))),
    }
}

fn parse_list(key: &'static str, value: &str, len: usize) -> Result<Vec<f64>> {
    let v = value
        .split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != len {
        return Err(Error::param(
            key,
            format!("expected {len} comma-separated numbers"),
        ));
    }
    Ok(v)
}

fn parse_point(key: &'static str, value: &str) -> Result<Point> {
    let v = parse_list(key, value, 2)?;
    Ok(Point::new(v[0], v[1]))
}

fn parse_range(key: &'static str, value: &str) -> Result<SweepRange> {
    let parts = value
        .split(':')
        .map(|s| parse_f64(key, s.trim()))
        .collect::<Result<Vec<_>>>()?;
    match parts[..] {
        [start, stop, step] => SweepRange::new(start, stop, step),
        [single] => SweepRange::new(single, single, 1.0),
        _ => Err(Error::param(key, "expected start:stop:step")),
    }
}

pub fn parse_policies(value: &str) -> Result<Vec<SchemePolicy>> {
    let list = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        return Err(Error::param("policies", "empty policy list"));
    }
    Ok(list)
}
