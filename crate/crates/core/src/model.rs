//! System parameters, network geometry and channel statistics.
//!
//! All powers are signal-to-noise ratios with the noise power normalized to
//! one, and every quantity in this module is linear (dB conversion only
//! happens at the configuration boundary). A channel gain `|h_ab|²` always
//! refers to the link from transmitter `a` to receiver `b`, where `p`, `s` and
//! `r` denote the primary pair, the secondary pair and the relay.

use rand::Rng;

use crate::error::{Error, Result};

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// SINR threshold for a target rate over the two sub-slots of a time slot:
/// `2^(2R) - 1`.
pub fn lambda_threshold(rate: f64) -> Result<f64> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::param(
            "rate",
            format!("must be finite and >= 0, got {rate}"),
        ));
    }
    Ok((2.0 * rate).exp2() - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Primary rate `R_p` in bits/s/Hz.
    pub rate_primary: f64,
    /// Secondary rate `R_s` in bits/s/Hz.
    pub rate_secondary: f64,
    /// Primary outage threshold `ε`.
    pub outage_threshold: f64,
    /// Primary transmit SNR `γ_p` (linear).
    pub snr_primary: f64,
    /// Maximum relay transmit SNR `γ_r^max` (linear).
    pub snr_relay_max: f64,
    /// Path-loss exponent `β`.
    pub pathloss_exponent: f64,
}

impl SystemParams {
    pub fn new(
        rate_primary: f64,
        rate_secondary: f64,
        outage_threshold: f64,
        snr_primary: f64,
        snr_relay_max: f64,
        pathloss_exponent: f64,
    ) -> Result<Self> {
        let params = SystemParams {
            rate_primary,
            rate_secondary,
            outage_threshold,
            snr_primary,
            snr_relay_max,
            pathloss_exponent,
        };
        params.validate()?;
        Ok(params)
    }

    /// The simulation setup of the reference experiments, with `γ_p` and
    /// `γ_r^max` at 20 dB.
    pub fn reference() -> Self {
        SystemParams {
            rate_primary: 0.8,
            rate_secondary: 0.2,
            outage_threshold: 0.1,
            snr_primary: 100.0,
            snr_relay_max: 100.0,
            pathloss_exponent: 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        };
        let nonnegative = |name, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ))
            }
        };
        positive("rate_primary", self.rate_primary)?;
        positive("rate_secondary", self.rate_secondary)?;
        positive("pathloss_exponent", self.pathloss_exponent)?;
        nonnegative("snr_primary", self.snr_primary)?;
        nonnegative("snr_relay_max", self.snr_relay_max)?;
        if !(self.outage_threshold > 0.0 && self.outage_threshold < 1.0) {
            return Err(Error::param(
                "outage_threshold",
                format!("must lie in (0, 1), got {}", self.outage_threshold),
            ));
        }
        Ok(())
    }

    pub fn lambda_primary(&self) -> f64 {
        (2.0 * self.rate_primary).exp2() - 1.0
    }

    pub fn lambda_secondary(&self) -> f64 {
        (2.0 * self.rate_secondary).exp2() - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    PrimaryTx,
    SecondaryTx,
    PrimaryRx,
    SecondaryRx,
    Relay,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topology {
    pub primary_tx: Point,
    pub secondary_tx: Point,
    pub primary_rx: Point,
    pub secondary_rx: Point,
    pub relay: Point,
}

impl Topology {
    /// Reference layout: PT (0, 1.82), ST (0, 0), PD (1, 1.82), SD (1, 0).
    pub fn reference(relay: Point) -> Self {
        Topology {
            primary_tx: Point::new(0.0, 1.82),
            secondary_tx: Point::new(0.0, 0.0),
            primary_rx: Point::new(1.0, 1.82),
            secondary_rx: Point::new(1.0, 0.0),
            relay,
        }
    }

    pub fn with_relay(&self, relay: Point) -> Self {
        Topology { relay, ..*self }
    }

    pub fn position(&self, node: Node) -> Point {
        match node {
            Node::PrimaryTx => self.primary_tx,
            Node::SecondaryTx => self.secondary_tx,
            Node::PrimaryRx => self.primary_rx,
            Node::SecondaryRx => self.secondary_rx,
            Node::Relay => self.relay,
        }
    }

    /// Fails if any two of the five nodes share a position.
    pub fn check_distinct(&self) -> Result<()> {
        const NODES: [Node; 5] = [
            Node::PrimaryTx,
            Node::SecondaryTx,
            Node::PrimaryRx,
            Node::SecondaryRx,
            Node::Relay,
        ];
        for (i, &a) in NODES.iter().enumerate() {
            for &b in &NODES[i + 1..] {
                if !(self.position(a).distance(&self.position(b)) > 0.0) {
                    return Err(Error::CoincidentNodes(a, b));
                }
            }
        }
        Ok(())
    }
}

/// The eight transmitter-to-receiver links of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// PT → PD
    PP,
    /// PT → SD
    PS,
    /// PT → R
    PR,
    /// ST → PD
    SP,
    /// ST → SD
    SS,
    /// ST → R
    SR,
    /// R → PD
    RP,
    /// R → SD
    RS,
}

impl Link {
    pub const ALL: [Link; 8] = [
        Link::PP,
        Link::PS,
        Link::PR,
        Link::SP,
        Link::SS,
        Link::SR,
        Link::RP,
        Link::RS,
    ];

    pub fn endpoints(self) -> (Node, Node) {
        use Node::*;
        match self {
            Link::PP => (PrimaryTx, PrimaryRx),
            Link::PS => (PrimaryTx, SecondaryRx),
            Link::PR => (PrimaryTx, Relay),
            Link::SP => (SecondaryTx, PrimaryRx),
            Link::SS => (SecondaryTx, SecondaryRx),
            Link::SR => (SecondaryTx, Relay),
            Link::RP => (Relay, PrimaryRx),
            Link::RS => (Relay, SecondaryRx),
        }
    }
}

/// Rayleigh fading variances `σ_ab² = d_ab^(-β)` for every link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkVariances {
    pub pp: f64,
    pub ps: f64,
    pub pr: f64,
    pub sp: f64,
    pub ss: f64,
    pub sr: f64,
    pub rp: f64,
    pub rs: f64,
}

impl LinkVariances {
    pub fn get(&self, link: Link) -> f64 {
        match link {
            Link::PP => self.pp,
            Link::PS => self.ps,
            Link::PR => self.pr,
            Link::SP => self.sp,
            Link::SS => self.ss,
            Link::SR => self.sr,
            Link::RP => self.rp,
            Link::RS => self.rs,
        }
    }

    pub fn uniform(value: f64) -> Self {
        LinkVariances {
            pp: value,
            ps: value,
            pr: value,
            sp: value,
            ss: value,
            sr: value,
            rp: value,
            rs: value,
        }
    }
}

pub fn link_variances(topology: &Topology, pathloss_exponent: f64) -> Result<LinkVariances> {
    if !(pathloss_exponent > 0.0) {
        return Err(Error::param(
            "pathloss_exponent",
            format!("must be > 0, got {pathloss_exponent}"),
        ));
    }
    topology.check_distinct()?;
    let variance = |link: Link| {
        let (a, b) = link.endpoints();
        topology
            .position(a)
            .distance(&topology.position(b))
            .powf(-pathloss_exponent)
    };
    Ok(LinkVariances {
        pp: variance(Link::PP),
        ps: variance(Link::PS),
        pr: variance(Link::PR),
        sp: variance(Link::SP),
        ss: variance(Link::SS),
        sr: variance(Link::SR),
        rp: variance(Link::RP),
        rs: variance(Link::RS),
    })
}

/// One realization of all squared channel magnitudes, held fixed over both
/// sub-slots of a time slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub pp: f64,
    pub ps: f64,
    pub pr: f64,
    pub sp: f64,
    pub ss: f64,
    pub sr: f64,
    pub rp: f64,
    pub rs: f64,
}

/// Draws every `|h_ab|²` as an independent exponential with mean `σ_ab²`,
/// by inverse-CDF transform of a uniform variate.
pub fn sample_channels<R: Rng + ?Sized>(rng: &mut R, variances: &LinkVariances) -> ChannelDraw {
    let mut exp = |mean: f64| -mean * (1.0 - rng.random::<f64>()).ln();
    ChannelDraw {
        pp: exp(variances.pp),
        ps: exp(variances.ps),
        pr: exp(variances.pr),
        sp: exp(variances.sp),
        ss: exp(variances.ss),
        sr: exp(variances.sr),
        rp: exp(variances.rp),
        rs: exp(variances.rs),
    }
}

/// Transmit SNRs resolved for one (parameters, topology) operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Powers {
    /// Secondary transmit SNR `γ_s`.
    pub secondary: f64,
    /// Relay SNR when forwarding the primary signal, `γ_r^(p)`.
    pub relay_primary: f64,
    /// Relay SNR when forwarding the secondary signal, `γ_r^(s)`.
    pub relay_secondary: f64,
    /// Relay SNR when forwarding both signals, `γ_r^(ps)`.
    pub relay_both: f64,
    /// Fraction of `γ_r^(ps)` spent on the primary signal.
    pub alpha: f64,
}

impl Powers {
    pub fn silent_relay(secondary: f64) -> Self {
        Powers {
            secondary,
            relay_primary: 0.0,
            relay_secondary: 0.0,
            relay_both: 0.0,
            alpha: 1.0,
        }
    }
}

/// `ρ = exp(-Λ_p / (2 γ_p σ_pp²)) / (1 - ε) - 1`; the secondary may transmit
/// only when it is positive.
pub fn secondary_power_margin(params: &SystemParams, variances: &LinkVariances) -> f64 {
    let lambda_p = params.lambda_primary();
    (-lambda_p / (2.0 * params.snr_primary * variances.pp)).exp() / (1.0 - params.outage_threshold)
        - 1.0
}

/// Secondary transmit SNR that keeps the primary outage, with the primary
/// repeating over both sub-slots, exactly at `ε`. Zero when `ρ <= 0`.
pub fn secondary_power(params: &SystemParams, variances: &LinkVariances) -> f64 {
    let rho = secondary_power_margin(params, variances);
    if rho <= 0.0 {
        return 0.0;
    }
    2.0 * params.snr_primary * variances.pp * rho / (params.lambda_primary() * variances.sp)
}

/// Primary SNR below which [`secondary_power`] is zero.
pub fn cutoff_snr_primary(params: &SystemParams, variances: &LinkVariances) -> f64 {
    params.lambda_primary() / (2.0 * variances.pp * (1.0 / (1.0 - params.outage_threshold)).ln())
}

/// Primary rate above which [`secondary_power`] is zero.
pub fn cutoff_rate_primary(params: &SystemParams, variances: &LinkVariances) -> f64 {
    let lambda =
        2.0 * params.snr_primary * variances.pp * (1.0 / (1.0 - params.outage_threshold)).ln();
    (1.0 + lambda).log2() / 2.0
}
