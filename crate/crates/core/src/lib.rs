//! Opportunistic adaptive relaying for underlay cognitive radio networks.
//!
//! A primary pair (PT → PD) and a secondary pair (ST → SD) share a band, and
//! a decode-and-forward relay R listens during the first half of each time
//! slot. Depending on what it decoded and on the channel state it then
//! forwards the primary signal, the secondary signal, both (superposed), or
//! nothing. The secondary and relay powers are chosen so that the primary
//! outage stays at a threshold `ε`.
//!
//! * [`model`]: parameters, geometry, channel sampling, secondary power.
//! * [`decision`]: the two relaying schemes and the resulting SINRs.
//! * [`analytic`]: closed-form outage expressions and relay power rules.
//! * [`montecarlo`]: the simulation engine.
//! * [`experiments`]: sweeps and validation behind the command line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod decision;
pub mod error;
pub mod experiments;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod special;

pub use decision::{Decision, DecisionOutcome, DecodeEvents, Feasibility, RelayingMetrics, Scheme};
pub use error::{Error, Result};
pub use model::{ChannelDraw, LinkVariances, Point, Powers, SystemParams, Topology};
pub use montecarlo::{OperatingPoint, OutageEstimate, SchemePolicy};
