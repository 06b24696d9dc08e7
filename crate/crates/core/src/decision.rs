//! Relay decision protocols and the per-decision SINRs at PD and SD.
//!
//! During the first sub-slot PT and ST transmit and the relay listens. The
//! relay then picks one of four behaviours for the second sub-slot:
//!
//! * `D0`: the relay stays silent and both transmitters repeat their signal,
//! * `D1`: the relay forwards the primary signal while ST repeats,
//! * `D2`: the relay forwards the secondary signal while PT repeats,
//! * `D3` (second scheme only): the relay superposes both signals, spending a
//!   fraction `α` of its power on the primary one.
//!
//! Both receivers combine their two observations with MRC, so the SINR of the
//! time slot is the sum of the per-sub-slot SINRs.

use crate::error::{Error, Result};
use crate::model::{ChannelDraw, Powers, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    D0,
    D1,
    D2,
    D3,
}

impl Decision {
    pub const ALL: [Decision; 4] = [Decision::D0, Decision::D1, Decision::D2, Decision::D3];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// The relay decodes one signal treating the other as noise and assists
    /// either the primary or the secondary transmission.
    One,
    /// The relay runs successive interference cancellation and may also
    /// assist both transmissions at once.
    Two,
}

/// What the relay managed to decode during the first sub-slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecodeEvents {
    /// `A_p`: primary decoded with the secondary signal as noise.
    pub primary: bool,
    /// `A_s`: secondary decoded with the primary signal as noise.
    pub secondary: bool,
    /// `B_p`: primary decodable once the secondary has been cancelled.
    pub primary_clean: bool,
    /// `B_s`: secondary decodable once the primary has been cancelled.
    pub secondary_clean: bool,
}

impl DecodeEvents {
    /// Successive decoding of both signals: decode one with the other as
    /// noise, cancel it, then decode the other interference-free.
    pub fn both(&self) -> bool {
        (self.primary && self.secondary_clean) || (self.secondary && self.primary_clean)
    }

    /// The primary is decoded but cancellation does not recover the secondary.
    pub fn primary_only(&self) -> bool {
        self.primary && !self.secondary_clean
    }

    pub fn secondary_only(&self) -> bool {
        self.secondary && !self.primary_clean
    }
}

/// Second-sub-slot SINR contributions at SD for each relay behaviour. The
/// secondary SINR of decision `Dk` is always `repeat` plus the matching
/// metric, so comparing metrics compares end-to-end secondary SINRs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelayingMetrics {
    /// `a_0`: ST repeats, PT interferes.
    pub repeat: f64,
    /// `a_p`: ST repeats, the relay forwarding `x_p` interferes.
    pub assist_primary: f64,
    /// `a_s`: the relay forwards `x_s`, PT interferes.
    pub assist_secondary: f64,
    /// `a_ps`: the relay's `x_s` share, its own `x_p` share interferes.
    pub assist_both: f64,
}

/// Which relaying modes have a relay power satisfying the primary outage
/// constraint at the current operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feasibility {
    pub assist_primary: bool,
    pub assist_both: bool,
}

impl Default for Feasibility {
    fn default() -> Self {
        Feasibility {
            assist_primary: true,
            assist_both: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionOutcome {
    pub decision: Decision,
    pub scheme: Scheme,
    /// Relay SNR of the chosen mode, zero for `D0`.
    pub relay_snr: f64,
    /// Power split, only meaningful for `D3`.
    pub alpha: f64,
}

impl DecisionOutcome {
    pub fn new(scheme: Scheme, decision: Decision, powers: &Powers) -> Self {
        let (relay_snr, alpha) = match decision {
            Decision::D0 => (0.0, 0.0),
            Decision::D1 => (powers.relay_primary, 0.0),
            Decision::D2 => (powers.relay_secondary, 0.0),
            Decision::D3 => (powers.relay_both, powers.alpha),
        };
        DecisionOutcome {
            decision,
            scheme,
            relay_snr,
            alpha,
        }
    }
}

pub fn decode_events(draw: &ChannelDraw, powers: &Powers, params: &SystemParams) -> DecodeEvents {
    decode_events_with(
        draw,
        powers,
        params.snr_primary,
        params.lambda_primary(),
        params.lambda_secondary(),
    )
}

/// [`decode_events`] with the thresholds already computed. Boundaries are
/// inclusive: an SINR equal to its threshold decodes.
pub fn decode_events_with(
    draw: &ChannelDraw,
    powers: &Powers,
    snr_primary: f64,
    lambda_p: f64,
    lambda_s: f64,
) -> DecodeEvents {
    let primary_rx = snr_primary * draw.pr;
    let secondary_rx = powers.secondary * draw.sr;
    DecodeEvents {
        primary: primary_rx / (secondary_rx + 1.0) >= lambda_p,
        secondary: secondary_rx / (primary_rx + 1.0) >= lambda_s,
        primary_clean: primary_rx >= lambda_p,
        secondary_clean: secondary_rx >= lambda_s,
    }
}

pub fn relaying_metrics(draw: &ChannelDraw, powers: &Powers, snr_primary: f64) -> RelayingMetrics {
    let direct = powers.secondary * draw.ss;
    let pt_interference = snr_primary * draw.ps + 1.0;
    let both = powers.relay_both * draw.rs;
    RelayingMetrics {
        repeat: direct / pt_interference,
        assist_primary: direct / (powers.relay_primary * draw.rs + 1.0),
        assist_secondary: powers.relay_secondary * draw.rs / pt_interference,
        assist_both: (1.0 - powers.alpha) * both / (powers.alpha * both + 1.0),
    }
}

/// Scheme 1. `D1` when the primary is decoded and forwarding it beats the
/// alternatives for SD, `D2` symmetrically, `D0` otherwise. A `D1` outcome
/// without a feasible relay power degrades to `D0`. Exact metric ties favour
/// `D1` over `D2` over `D0`.
pub fn decide_scheme1(
    events: &DecodeEvents,
    metrics: &RelayingMetrics,
    d1_feasible: bool,
    powers: &Powers,
) -> DecisionOutcome {
    let m = metrics;
    let primary_best = m.assist_primary >= m.assist_secondary && m.assist_primary >= m.repeat;
    let secondary_best = m.assist_secondary >= m.assist_primary && m.assist_secondary >= m.repeat;

    let d1 = events.primary
        && ((!events.secondary && m.assist_primary > m.repeat)
            || (events.secondary && primary_best));
    let d2 = events.secondary
        && ((!events.primary && m.assist_secondary > m.repeat)
            || (events.primary && secondary_best));

    let decision = if d1 {
        if d1_feasible {
            Decision::D1
        } else {
            Decision::D0
        }
    } else if d2 {
        Decision::D2
    } else {
        Decision::D0
    };
    DecisionOutcome::new(Scheme::One, decision, powers)
}

/// Scheme 2. With both signals recovered the relay picks the largest metric
/// among `a_p`, `a_s`, `a_ps`, `a_0`; with only one signal recovered it
/// forwards it when that beats repetition. Infeasible modes are dropped from
/// the comparison. Exact ties favour `D1`, then `D2`, `D3`, `D0`.
pub fn decide_scheme2(
    events: &DecodeEvents,
    metrics: &RelayingMetrics,
    feasibility: Feasibility,
    powers: &Powers,
) -> DecisionOutcome {
    let m = metrics;
    let decision = if events.both() {
        let candidates = [
            (Decision::D1, m.assist_primary, feasibility.assist_primary),
            (Decision::D2, m.assist_secondary, true),
            (Decision::D3, m.assist_both, feasibility.assist_both),
            (Decision::D0, m.repeat, true),
        ];
        let mut best = (Decision::D0, f64::NEG_INFINITY);
        for (decision, value, allowed) in candidates {
            if allowed && value > best.1 {
                best = (decision, value);
            }
        }
        best.0
    } else if events.secondary_only() && m.assist_secondary > m.repeat {
        Decision::D2
    } else if events.primary_only() && feasibility.assist_primary && m.assist_primary > m.repeat {
        Decision::D1
    } else {
        Decision::D0
    };
    DecisionOutcome::new(Scheme::Two, decision, powers)
}

/// End-to-end `(SINR_p, SINR_s)` after MRC over both sub-slots.
pub fn sinr_pair(
    draw: &ChannelDraw,
    powers: &Powers,
    snr_primary: f64,
    outcome: &DecisionOutcome,
) -> Result<(f64, f64)> {
    let primary_direct = snr_primary * draw.pp;
    let secondary_direct = powers.secondary * draw.ss;
    // first sub-slot: each receiver sees the other transmitter as interference
    let sinr_p1 = primary_direct / (powers.secondary * draw.sp + 1.0);
    let sinr_s1 = secondary_direct / (snr_primary * draw.ps + 1.0);
    let relay = outcome.relay_snr;
    if !(relay >= 0.0) {
        return Err(Error::param(
            "relay_snr",
            format!("must be >= 0, got {relay}"),
        ));
    }

    Ok(match outcome.decision {
        Decision::D0 => (2.0 * sinr_p1, 2.0 * sinr_s1),
        Decision::D1 => (
            sinr_p1 + relay * draw.rp / (powers.secondary * draw.sp + 1.0),
            sinr_s1 + secondary_direct / (relay * draw.rs + 1.0),
        ),
        Decision::D2 => (
            sinr_p1 + primary_direct / (relay * draw.rp + 1.0),
            sinr_s1 + relay * draw.rs / (snr_primary * draw.ps + 1.0),
        ),
        Decision::D3 => {
            if outcome.scheme != Scheme::Two {
                return Err(Error::SchemeMismatch {
                    decision: Decision::D3,
                    scheme: outcome.scheme,
                });
            }
            let alpha = outcome.alpha;
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::param(
                    "alpha",
                    format!("must lie in [0, 1], got {alpha}"),
                ));
            }
            let at_pd = relay * draw.rp;
            let at_sd = relay * draw.rs;
            (
                sinr_p1 + alpha * at_pd / ((1.0 - alpha) * at_pd + 1.0),
                sinr_s1 + (1.0 - alpha) * at_sd / (alpha * at_sd + 1.0),
            )
        }
    })
}
