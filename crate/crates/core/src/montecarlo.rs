//! Monte Carlo estimation of outage probabilities and decision frequencies.
//!
//! Trial `t` of stream `j` always reads the same ChaCha8 words (stream `j`,
//! word offset `t * WORDS_PER_TRIAL`), so results do not depend on how trials
//! are split across workers. Outage events are counted with integers, which
//! keeps the accumulation order-independent as well.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analytic::{
    power_split_d3, quotient_pdf, relay_power_d1, relay_power_d2, relay_power_d2_exact,
    EffectiveSnrs,
};
use crate::decision::{
    decide_scheme1, decide_scheme2, decode_events_with, relaying_metrics, sinr_pair, Decision,
    DecisionOutcome, Feasibility, Scheme,
};
use crate::error::{Error, Result};
use crate::model::{
    link_variances, sample_channels, secondary_power, ChannelDraw, LinkVariances, Point, Powers,
    SystemParams, Topology,
};
use crate::quadrature::GaussLegendre;

/// Every trial consumes eight `f64` variates, i.e. sixteen 32-bit words.
const WORDS_PER_TRIAL: u128 = 16;
const BLOCK_TRIALS: u64 = 8192;
/// Stream reserved for drawing random relay positions.
const POSITION_STREAM: u64 = u64::MAX;
const ALPHA_SEED: u64 = 0x5EED_A1FA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemePolicy {
    /// Never relay; both transmitters repeat.
    Direct,
    /// Forward the primary signal whenever it is decoded and feasible.
    PrimaryOnly,
    /// Forward the secondary signal whenever it is decoded.
    SecondaryOnly,
    Adaptive1,
    Adaptive2,
}

impl SchemePolicy {
    pub const ALL: [SchemePolicy; 5] = [
        SchemePolicy::Direct,
        SchemePolicy::PrimaryOnly,
        SchemePolicy::SecondaryOnly,
        SchemePolicy::Adaptive1,
        SchemePolicy::Adaptive2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemePolicy::Direct => "direct",
            SchemePolicy::PrimaryOnly => "primary-only",
            SchemePolicy::SecondaryOnly => "secondary-only",
            SchemePolicy::Adaptive1 => "adaptive1",
            SchemePolicy::Adaptive2 => "adaptive2",
        }
    }

    fn scheme(self) -> Scheme {
        match self {
            SchemePolicy::Adaptive2 => Scheme::Two,
            _ => Scheme::One,
        }
    }
}

impl fmt::Display for SchemePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemePolicy::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| Error::param("policy", format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub trials: u64,
    /// Normal-approximation 95% half-width.
    pub half_width_95: f64,
    /// Frequency of `D0..D3`.
    pub decision_freq: [f64; 4],
}

impl OutageEstimate {
    pub fn from_counts(outages: u64, trials: u64, decisions: [u64; 4]) -> Self {
        let n = trials as f64;
        let p_hat = outages as f64 / n;
        OutageEstimate {
            p_hat,
            trials,
            half_width_95: 1.96 * (p_hat * (1.0 - p_hat) / n).sqrt(),
            decision_freq: decisions.map(|d| d as f64 / n),
        }
    }

    /// Binomial standard error, `half_width_95 / 1.96`.
    pub fn std_error(&self) -> f64 {
        self.half_width_95 / 1.96
    }

    /// Mean of independent estimates. The half-width is that of the mean,
    /// `sqrt(Σ h_j²) / J`.
    pub fn average(estimates: &[OutageEstimate]) -> Self {
        let j = estimates.len() as f64;
        let mut freq = [0.0; 4];
        for e in estimates {
            for (f, v) in freq.iter_mut().zip(e.decision_freq) {
                *f += v / j;
            }
        }
        OutageEstimate {
            p_hat: estimates.iter().map(|e| e.p_hat).sum::<f64>() / j,
            trials: estimates.iter().map(|e| e.trials).sum(),
            half_width_95: estimates
                .iter()
                .map(|e| e.half_width_95.powi(2))
                .sum::<f64>()
                .sqrt()
                / j,
            decision_freq: freq,
        }
    }

    pub fn dominant_decision(&self) -> Decision {
        let mut best = Decision::D0;
        for d in Decision::ALL {
            if self.decision_freq[d.index()] > self.decision_freq[best.index()] {
                best = d;
            }
        }
        best
    }
}

/// How the relay SNR for secondary forwarding is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum D2PowerRule {
    /// Largest power whose exact conditional primary outage is at most `ε`.
    #[default]
    Exact,
    /// The closed-form `(ε/φ' - 1)/σ_rp²` rule.
    ClosedForm,
}

impl FromStr for D2PowerRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(D2PowerRule::Exact),
            "closed-form" => Ok(D2PowerRule::ClosedForm),
            other => Err(Error::param(
                "d2_power_rule",
                format!("expected exact or closed-form, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveOptions {
    pub d2_rule: D2PowerRule,
    /// Channel draws behind the superposition power split.
    pub alpha_draws: usize,
    pub alpha_seed: u64,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        ResolveOptions {
            d2_rule: D2PowerRule::Exact,
            alpha_draws: 100_000,
            alpha_seed: ALPHA_SEED,
        }
    }
}

/// Parameters, geometry and every transmit power for one relay position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub params: SystemParams,
    pub topology: Topology,
    pub variances: LinkVariances,
    pub powers: Powers,
    pub feasibility: Feasibility,
    pub lambda_p: f64,
    pub lambda_s: f64,
}

impl OperatingPoint {
    /// Computes `γ_s`, the relay SNR of each forwarding mode and the power
    /// split. An infeasible primary-forwarding power is recorded as
    /// `γ_r^max` with the feasibility flag cleared.
    pub fn resolve(
        params: &SystemParams,
        topology: &Topology,
        opts: &ResolveOptions,
    ) -> Result<Self> {
        params.validate()?;
        let variances = link_variances(topology, params.pathloss_exponent)?;
        let lambda_p = params.lambda_primary();
        let lambda_s = params.lambda_secondary();
        let eps = params.outage_threshold;
        let max = params.snr_relay_max;
        let gs = secondary_power(params, &variances);
        let base = EffectiveSnrs::new(params, &variances, &Powers::silent_relay(gs));

        let (relay_primary, d1_ok) = match relay_power_d1(&base, variances.rp, lambda_p, eps, max) {
            Some(g) => (g, true),
            None => (max, false),
        };
        let relay_secondary = match opts.d2_rule {
            D2PowerRule::Exact => relay_power_d2_exact(&base, variances.rp, lambda_p, eps, max),
            D2PowerRule::ClosedForm => relay_power_d2(&base, variances.rp, lambda_p, eps, max),
        };
        let split = power_split_d3(
            base.pp,
            base.sp,
            max * variances.rp,
            lambda_p,
            eps,
            opts.alpha_draws,
            opts.alpha_seed,
        );
        let (alpha, d3_ok) = match split {
            Some(a) => (a, true),
            None => (1.0, false),
        };

        Ok(OperatingPoint {
            params: *params,
            topology: *topology,
            variances,
            powers: Powers {
                secondary: gs,
                relay_primary,
                relay_secondary,
                relay_both: max,
                alpha,
            },
            feasibility: Feasibility {
                assist_primary: d1_ok,
                assist_both: d3_ok,
            },
            lambda_p,
            lambda_s,
        })
    }

    pub fn secondary_active(&self) -> bool {
        self.powers.secondary > 0.0
    }

    pub fn effective_snrs(&self) -> EffectiveSnrs {
        EffectiveSnrs::new(&self.params, &self.variances, &self.powers)
    }

    /// Decision a policy takes on one draw.
    pub fn decide(&self, policy: SchemePolicy, draw: &ChannelDraw) -> DecisionOutcome {
        let gp = self.params.snr_primary;
        if !self.secondary_active() {
            return DecisionOutcome::new(policy.scheme(), Decision::D0, &self.powers);
        }
        let events = decode_events_with(draw, &self.powers, gp, self.lambda_p, self.lambda_s);
        let metrics = relaying_metrics(draw, &self.powers, gp);
        self.decide_with(policy, &events, &metrics)
    }

    fn decide_with(
        &self,
        policy: SchemePolicy,
        events: &crate::decision::DecodeEvents,
        metrics: &crate::decision::RelayingMetrics,
    ) -> DecisionOutcome {
        let p = &self.powers;
        let decision = match policy {
            SchemePolicy::Direct => Decision::D0,
            SchemePolicy::PrimaryOnly if events.primary && self.feasibility.assist_primary => {
                Decision::D1
            }
            SchemePolicy::PrimaryOnly => Decision::D0,
            SchemePolicy::SecondaryOnly if events.secondary => Decision::D2,
            SchemePolicy::SecondaryOnly => Decision::D0,
            SchemePolicy::Adaptive1 => {
                return decide_scheme1(events, metrics, self.feasibility.assist_primary, p);
            }
            SchemePolicy::Adaptive2 => return decide_scheme2(events, metrics, self.feasibility, p),
        };
        DecisionOutcome::new(policy.scheme(), decision, p)
    }

    /// `(primary in outage, secondary in outage)` for an outcome on a draw.
    pub fn outage(&self, draw: &ChannelDraw, outcome: &DecisionOutcome) -> Result<(bool, bool)> {
        let (sp, ss) = sinr_pair(draw, &self.powers, self.params.snr_primary, outcome)?;
        Ok((sp < self.lambda_p, ss < self.lambda_s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutage {
    pub policy: SchemePolicy,
    pub primary: OutageEstimate,
    pub secondary: OutageEstimate,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    primary: u64,
    secondary: u64,
    decisions: [u64; 4],
}

impl Counts {
    fn merge(mut self, other: &Counts) -> Counts {
        self.primary += other.primary;
        self.secondary += other.secondary;
        for (a, b) in self.decisions.iter_mut().zip(other.decisions) {
            *a += b;
        }
        self
    }
}

/// The ChaCha8 generator positioned at trial `trial` of `stream`.
pub fn trial_rng(seed: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(trial as u128 * WORDS_PER_TRIAL);
    rng
}

/// Trial count, seed and worker pool shared by a batch of estimates.
pub struct Simulator {
    trials: u64,
    seed: u64,
    pool: rayon::ThreadPool,
}

impl Simulator {
    /// `workers = 0` uses one worker per available core.
    pub fn new(trials: u64, seed: u64, workers: usize) -> Result<Self> {
        if trials == 0 {
            return Err(Error::ZeroTrials);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()?;
        Ok(Simulator { trials, seed, pool })
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Resolves many topologies in parallel; per-topology errors (such as a
    /// relay sitting on another node) are returned in place.
    pub fn resolve_all(
        &self,
        params: &SystemParams,
        topologies: &[Topology],
        opts: &ResolveOptions,
    ) -> Vec<Result<OperatingPoint>> {
        self.pool.install(|| {
            topologies
                .par_iter()
                .map(|t| OperatingPoint::resolve(params, t, opts))
                .collect()
        })
    }

    /// Estimates every policy on the same channel draws of `stream`.
    pub fn estimate(
        &self,
        point: &OperatingPoint,
        policies: &[SchemePolicy],
        stream: u64,
    ) -> Result<Vec<PolicyOutage>> {
        let blocks = self.trials.div_ceil(BLOCK_TRIALS);
        let run_block = |block: u64| -> Result<Vec<Counts>> {
            let start = block * BLOCK_TRIALS;
            let end = (start + BLOCK_TRIALS).min(self.trials);
            let mut rng = trial_rng(self.seed, stream, start);
            let mut counts = vec![Counts::default(); policies.len()];
            let silent = !point.secondary_active();
            let gp = point.params.snr_primary;
            for _ in start..end {
                let draw = sample_channels(&mut rng, &point.variances);
                if silent {
                    let outcome = DecisionOutcome::new(Scheme::One, Decision::D0, &point.powers);
                    let (pri, _) = point.outage(&draw, &outcome)?;
                    for c in counts.iter_mut() {
                        c.primary += pri as u64;
                        c.secondary += 1;
                        c.decisions[0] += 1;
                    }
                    continue;
                }
                let events =
                    decode_events_with(&draw, &point.powers, gp, point.lambda_p, point.lambda_s);
                let metrics = relaying_metrics(&draw, &point.powers, gp);
                for (c, &policy) in counts.iter_mut().zip(policies) {
                    let outcome = point.decide_with(policy, &events, &metrics);
                    let (pri, sec) = point.outage(&draw, &outcome)?;
                    c.primary += pri as u64;
                    c.secondary += sec as u64;
                    c.decisions[outcome.decision.index()] += 1;
                }
            }
            Ok(counts)
        };

        let per_block: Vec<Vec<Counts>> = self.pool.install(|| {
            (0..blocks)
                .into_par_iter()
                .map(run_block)
                .collect::<Result<_>>()
        })?;
        let mut totals = vec![Counts::default(); policies.len()];
        for block in &per_block {
            for (t, c) in totals.iter_mut().zip(block) {
                *t = t.merge(c);
            }
        }
        Ok(policies
            .iter()
            .zip(totals)
            .map(|(&policy, c)| PolicyOutage {
                policy,
                primary: OutageEstimate::from_counts(c.primary, self.trials, c.decisions),
                secondary: OutageEstimate::from_counts(c.secondary, self.trials, c.decisions),
            })
            .collect())
    }

    /// Averages each policy's outage probabilities over relay positions,
    /// position `j` using stream `j`.
    pub fn average_over_positions(
        &self,
        params: &SystemParams,
        topology: &Topology,
        positions: &[Point],
        policies: &[SchemePolicy],
        opts: &ResolveOptions,
    ) -> Result<Vec<PolicyOutage>> {
        let topologies: Vec<Topology> = positions.iter().map(|&p| topology.with_relay(p)).collect();
        let points = self
            .resolve_all(params, &topologies, opts)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        self.average_points(&points, policies)
    }

    /// Like [`Simulator::average_over_positions`] for already resolved points.
    pub fn average_points(
        &self,
        points: &[OperatingPoint],
        policies: &[SchemePolicy],
    ) -> Result<Vec<PolicyOutage>> {
        let mut per_policy: Vec<(Vec<OutageEstimate>, Vec<OutageEstimate>)> =
            vec![(Vec::new(), Vec::new()); policies.len()];
        for (j, point) in points.iter().enumerate() {
            for (acc, est) in per_policy
                .iter_mut()
                .zip(self.estimate(point, policies, j as u64)?)
            {
                acc.0.push(est.primary);
                acc.1.push(est.secondary);
            }
        }
        Ok(policies
            .iter()
            .zip(per_policy)
            .map(|(&policy, (pri, sec))| PolicyOutage {
                policy,
                primary: OutageEstimate::average(&pri),
                secondary: OutageEstimate::average(&sec),
            })
            .collect())
    }
}

/// Axis-aligned region relay positions are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub const REFERENCE: Region = Region {
        x_min: 0.1,
        x_max: 0.9,
        y_min: 0.1,
        y_max: 1.7,
    };
}

/// `count` uniform positions in `region`, from a stream of their own.
pub fn random_relay_positions(count: usize, region: &Region, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POSITION_STREAM);
    (0..count)
        .map(|_| {
            let x = region.x_min + (region.x_max - region.x_min) * rng.random::<f64>();
            let y = region.y_min + (region.y_max - region.y_min) * rng.random::<f64>();
            Point::new(x, y)
        })
        .collect()
}

/// Primary and secondary outage of a single policy.
pub fn estimate_outage(
    params: &SystemParams,
    topology: &Topology,
    policy: SchemePolicy,
    trials: u64,
    seed: u64,
) -> Result<(OutageEstimate, OutageEstimate)> {
    let point = OperatingPoint::resolve(params, topology, &ResolveOptions::default())?;
    let sim = Simulator::new(trials, seed, 0)?;
    let est = sim.estimate(&point, &[policy], 0)?[0];
    Ok((est.primary, est.secondary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub policy: SchemePolicy,
    pub primary: OutageEstimate,
    /// `ε + 3` half-widths.
    pub limit: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// The constraint is only checked while the secondary transmits.
    pub applicable: bool,
    pub rows: Vec<ConstraintRow>,
}

impl ConstraintReport {
    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }
}

/// Checks simulated primary outage against `ε + 3·half_width` per policy.
pub fn primary_constraint_check(
    params: &SystemParams,
    topology: &Topology,
    policies: &[SchemePolicy],
    trials: u64,
    seed: u64,
) -> Result<ConstraintReport> {
    let point = OperatingPoint::resolve(params, topology, &ResolveOptions::default())?;
    let sim = Simulator::new(trials, seed, 0)?;
    let eps = params.outage_threshold;
    let rows = sim
        .estimate(&point, policies, 0)?
        .into_iter()
        .map(|e| {
            let limit = eps + 3.0 * e.primary.half_width_95;
            ConstraintRow {
                policy: e.policy,
                primary: e.primary,
                limit,
                satisfied: !point.secondary_active() || e.primary.p_hat <= limit,
            }
        })
        .collect();
    Ok(ConstraintReport {
        applicable: point.secondary_active(),
        rows,
    })
}

pub const MIN_CONDITIONED: u64 = 10_000;

/// Primary and secondary outage of `policy` restricted to draws on which it
/// takes `decision`. Sampling stops after `accepted` conditioned draws or
/// `max_trials` draws; fewer than [`MIN_CONDITIONED`] is an error.
pub fn conditional_outage(
    point: &OperatingPoint,
    policy: SchemePolicy,
    decision: Decision,
    accepted: u64,
    max_trials: u64,
    seed: u64,
) -> Result<(OutageEstimate, OutageEstimate)> {
    let mut rng = trial_rng(seed, 0, 0);
    let (mut hits, mut pri, mut sec) = (0u64, 0u64, 0u64);
    for _ in 0..max_trials {
        if hits >= accepted {
            break;
        }
        let draw = sample_channels(&mut rng, &point.variances);
        let outcome = point.decide(policy, &draw);
        if outcome.decision != decision {
            continue;
        }
        let (p, s) = point.outage(&draw, &outcome)?;
        hits += 1;
        pri += p as u64;
        sec += s as u64;
    }
    if hits < MIN_CONDITIONED {
        return Err(Error::InsufficientConditioning {
            accepted: hits,
            required: MIN_CONDITIONED,
        });
    }
    let mut decisions = [0; 4];
    decisions[decision.index()] = hits;
    Ok((
        OutageEstimate::from_counts(pri, hits, decisions),
        OutageEstimate::from_counts(sec, hits, decisions),
    ))
}

/// Normalized histogram with an overflow count for samples beyond the last
/// edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub samples: u64,
}

impl Histogram {
    pub fn density(&self) -> Vec<f64> {
        let n = self.samples as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
            .collect()
    }

    /// Σ density·width plus the overflow fraction; one by construction.
    pub fn total_mass(&self) -> f64 {
        let widths = self.edges.windows(2).map(|w| w[1] - w[0]);
        self.density()
            .iter()
            .zip(widths)
            .map(|(d, w)| d * w)
            .sum::<f64>()
            + self.overflow as f64 / self.samples as f64
    }
}

/// Histogram of `X = γ_a|h_a|² / (γ_b|h_b|² + 1)` with exponential gains of
/// means `num` and `den`. `edges` must start at zero and increase.
pub fn empirical_pdf(
    num: f64,
    den: f64,
    samples: u64,
    edges: &[f64],
    seed: u64,
) -> Result<Histogram> {
    if samples == 0 {
        return Err(Error::ZeroTrials);
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] != 0.0 {
        return Err(Error::param("edges", "need increasing edges starting at 0"));
    }
    let mut rng = trial_rng(seed, 0, 0);
    let mut exp = |mean: f64| -mean * (1.0 - rng.random::<f64>()).ln();
    let mut counts = vec![0u64; edges.len() - 1];
    let mut overflow = 0;
    for _ in 0..samples {
        let x = exp(num) / (exp(den) + 1.0);
        // first edge strictly greater than x closes its bin
        let k = edges.partition_point(|&e| e <= x);
        if k >= edges.len() {
            overflow += 1;
        } else {
            counts[k - 1] += 1;
        }
    }
    Ok(Histogram {
        edges: edges.to_vec(),
        counts,
        overflow,
        samples,
    })
}

/// Bin probabilities of the quotient law, integrating its density over every
/// bin; the last entry is the overflow mass.
pub fn quotient_bin_probabilities(num: f64, den: f64, edges: &[f64]) -> Vec<f64> {
    let rule = GaussLegendre::new(24);
    let mut probs: Vec<f64> = edges
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], |x| quotient_pdf(x, num, den)))
        .collect();
    let inside: f64 = probs.iter().sum();
    probs.push((1.0 - inside).max(0.0));
    probs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of a histogram (overflow as a final bin) against
/// bin probabilities; adjacent bins are pooled until each expects at least
/// five samples.
pub fn chi_square_test(hist: &Histogram, probs: &[f64]) -> Result<ChiSquare> {
    let n = hist.samples as f64;
    let observed: Vec<u64> = hist.counts.iter().copied().chain([hist.overflow]).collect();
    if observed.len() != probs.len() {
        return Err(Error::param(
            "probs",
            "one probability per bin plus overflow",
        ));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&count, &p) in observed.iter().zip(probs) {
        o += count as f64;
        e += p * n;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::param("probs", "fewer than two usable bins"));
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::param("dof", e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::quotient_cdf;

    fn reference_point(relay: Point) -> OperatingPoint {
        OperatingPoint::resolve(
            &SystemParams::reference(),
            &Topology::reference(relay),
            &ResolveOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn policy_names_round_trip() {
        for p in SchemePolicy::ALL {
            assert_eq!(p.name().parse::<SchemePolicy>().unwrap(), p);
        }
        assert!("adaptive3".parse::<SchemePolicy>().is_err());
    }

    #[test]
    fn estimate_invariants() {
        let e = OutageEstimate::from_counts(25, 100, [10, 20, 30, 40]);
        assert_eq!(e.p_hat, 0.25);
        assert!((e.half_width_95 - 1.96 * (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert!((e.decision_freq.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(e.dominant_decision(), Decision::D3);
    }

    #[test]
    fn block_start_matches_serial_stream() {
        let v = LinkVariances::uniform(1.0);
        let mut serial = trial_rng(9, 3, 0);
        let draws: Vec<_> = (0..50).map(|_| sample_channels(&mut serial, &v)).collect();
        let mut jumped = trial_rng(9, 3, 37);
        assert_eq!(sample_channels(&mut jumped, &v), draws[37]);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(matches!(Simulator::new(0, 1, 1), Err(Error::ZeroTrials)));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let point = reference_point(Point::new(0.5, 0.91));
        let one = Simulator::new(30_000, 4, 1)
            .unwrap()
            .estimate(&point, &SchemePolicy::ALL, 2)
            .unwrap();
        let many = Simulator::new(30_000, 4, 8)
            .unwrap()
            .estimate(&point, &SchemePolicy::ALL, 2)
            .unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn silent_secondary_short_circuits() {
        let mut params = SystemParams::reference();
        params.snr_primary = 5.0;
        let point = OperatingPoint::resolve(
            &params,
            &Topology::reference(Point::new(0.5, 0.91)),
            &ResolveOptions::default(),
        )
        .unwrap();
        assert!(!point.secondary_active());
        let est = Simulator::new(10_000, 1, 2)
            .unwrap()
            .estimate(&point, &SchemePolicy::ALL, 0)
            .unwrap();
        for e in est {
            assert_eq!(e.secondary.p_hat, 1.0);
            assert_eq!(e.secondary.decision_freq[0], 1.0);
        }
    }

    #[test]
    fn direct_policy_matches_rayleigh_closed_form() {
        // no PT→SD interference: SINR_s = 2 γ_s|h_ss|²
        let mut point = reference_point(Point::new(0.5, 0.91));
        point.variances.ps = 0.0;
        let sim = Simulator::new(400_000, 8, 0).unwrap();
        let est = sim.estimate(&point, &[SchemePolicy::Direct], 0).unwrap()[0].secondary;
        let mean = point.powers.secondary * point.variances.ss;
        let exact = 1.0 - (-point.lambda_s / (2.0 * mean)).exp();
        assert!(
            (est.p_hat - exact).abs() <= est.half_width_95 * 1.5 + 1e-12,
            "{} vs {exact}",
            est.p_hat
        );
    }

    #[test]
    fn histogram_mass_and_degenerate_law() {
        let edges: Vec<f64> = (0..=40).map(|k| 0.1 * k as f64).collect();
        let hist = empirical_pdf(1.0, 0.0, 200_000, &edges, 3).unwrap();
        assert!((hist.total_mass() - 1.0).abs() < 1e-9);
        let probs = quotient_bin_probabilities(1.0, 0.0, &edges);
        for (k, w) in edges.windows(2).enumerate() {
            let exact = (-w[0]).exp() - (-w[1]).exp();
            assert!((probs[k] - exact).abs() < 1e-13);
        }
        let chi = chi_square_test(&hist, &probs).unwrap();
        assert!(chi.p_value > 0.001, "{chi:?}");
    }

    #[test]
    fn bin_probabilities_match_cdf() {
        let edges = [0.0, 0.5, 2.0, 7.0];
        let probs = quotient_bin_probabilities(2.0, 0.7, &edges);
        for (k, w) in edges.windows(2).enumerate() {
            let exact = quotient_cdf(w[1], 2.0, 0.7) - quotient_cdf(w[0], 2.0, 0.7);
            assert!((probs[k] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn positions_stay_in_region_and_are_seeded() {
        let a = random_relay_positions(50, &Region::REFERENCE, 11);
        assert_eq!(a, random_relay_positions(50, &Region::REFERENCE, 11));
        assert!(a
            .iter()
            .all(|p| (0.1..=0.9).contains(&p.x) && (0.1..=1.7).contains(&p.y)));
    }

    #[test]
    fn conditioning_requires_mass() {
        let point = reference_point(Point::new(0.5, 0.91));
        let r = conditional_outage(&point, SchemePolicy::Adaptive1, Decision::D1, 100, 5_000, 1);
        assert!(matches!(r, Err(Error::InsufficientConditioning { .. })));
    }
}
