//! Closed-form decision probabilities, conditional outages and relay power
//! rules for the first relaying scheme.
//!
//! Everything here works on effective SNRs `γ̃_ab = γ_a σ_ab²`, i.e. the means
//! of the exponential variables `γ_a |h_ab|²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{LinkVariances, Powers, SystemParams};
use crate::quadrature::GaussLegendre;
use crate::special::e1_scaled;

/// Means of every `γ_a |h_ab|²` used by the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EffectiveSnrs {
    pub pp: f64,
    pub ps: f64,
    pub pr: f64,
    pub sp: f64,
    pub ss: f64,
    pub sr: f64,
    /// `γ̃_rp^(p)`: relay forwarding the primary signal, seen at PD.
    pub rp_primary: f64,
    /// `γ̃_rs^(p)`
    pub rs_primary: f64,
    /// `γ̃_rp^(s)`
    pub rp_secondary: f64,
    /// `γ̃_rs^(s)`
    pub rs_secondary: f64,
}

impl EffectiveSnrs {
    pub fn new(params: &SystemParams, variances: &LinkVariances, powers: &Powers) -> Self {
        let gp = params.snr_primary;
        let gs = powers.secondary;
        EffectiveSnrs {
            pp: gp * variances.pp,
            ps: gp * variances.ps,
            pr: gp * variances.pr,
            sp: gs * variances.sp,
            ss: gs * variances.ss,
            sr: gs * variances.sr,
            rp_primary: powers.relay_primary * variances.rp,
            rs_primary: powers.relay_primary * variances.rs,
            rp_secondary: powers.relay_secondary * variances.rp,
            rs_secondary: powers.relay_secondary * variances.rs,
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// `P(X >= x)` for `X` exponential with the given mean.
fn exceed(mean: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if mean <= 0.0 {
        0.0
    } else {
        (-x / mean).exp()
    }
}

/// `P(γ_a|h_ab|² >= (γ_c|h_cb|² + 1) x)` for exponential gains with means
/// `direct` and `interferer`.
pub fn prob_exceeds_with_interference(direct: f64, interferer: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if direct <= 0.0 {
        return 0.0;
    }
    direct * (-x / direct).exp() / (direct + x * interferer)
}

/// `P(γ_a|h_ab|² <= γ_c|h_cb|²)`. Taken as 1 when both means vanish so that
/// it stays usable as an upper-bound factor.
fn prob_not_above(a: f64, c: f64) -> f64 {
    if a + c <= 0.0 {
        1.0
    } else {
        c / (a + c)
    }
}

/// Density of `X = γ_a|h_a|² / (γ_b|h_b|² + 1)` with means `num` and `den`.
pub fn quotient_pdf(x: f64, num: f64, den: f64) -> f64 {
    if x < 0.0 || num <= 0.0 {
        return 0.0;
    }
    let d = num + x * den;
    (-x / num).exp() / d * (1.0 + num * den / d)
}

/// Cumulative distribution of the quotient in [`quotient_pdf`].
pub fn quotient_cdf(x: f64, num: f64, den: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - prob_exceeds_with_interference(num, den, x)
}

/// Outage of a link repeated over both sub-slots (MRC of two identical
/// branches): `P(2X < Λ)` with `X` the quotient of [`quotient_pdf`].
pub fn cond_outage_d0(direct: f64, interferer: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    clamp_prob(1.0 - prob_exceeds_with_interference(direct, interferer, 0.5 * lambda))
}

/// `1 - e^{-x}` without cancellation.
fn one_minus_exp(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Exact `P((W + R)/(I + 1) < Λ)` for independent exponentials with means
/// `direct` (W), `interferer` (I) and `relay` (R).
///
/// This is the conditional primary outage when the relay forwards the primary
/// signal and, with the roles swapped, the conditional secondary outage when
/// it forwards the secondary one.
pub fn relayed_outage_exact(direct: f64, interferer: f64, relay: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let (a, s, r) = (direct, interferer, relay);
    let beta1 = a + lambda * s;
    if beta1 <= 0.0 {
        return clamp_prob(one_minus_exp(lambda / r));
    }
    let beta2 = r + lambda * s;
    let tail_r = if r > 0.0 {
        one_minus_exp(lambda / r)
    } else {
        1.0
    };
    let lambda1 = if beta2 > 0.0 {
        (s * s * lambda * lambda + r * s * lambda * tail_r) / (beta1 * beta2)
    } else {
        0.0
    };

    let lambda2 = if (a - r).abs() <= 1e-6 * a.max(r) {
        // removable singularity at r = a
        (a * one_minus_exp(lambda / a) - lambda * (-lambda / a).exp()) / beta1
    } else {
        let tail_a = if a > 0.0 {
            one_minus_exp(lambda / a)
        } else {
            1.0
        };
        (a * a * tail_a - a * r * tail_r) / (beta1 * (a - r))
    };
    clamp_prob(lambda1 + lambda2)
}

pub fn cond_primary_outage_d1(snrs: &EffectiveSnrs, lambda_p: f64) -> f64 {
    relayed_outage_exact(snrs.pp, snrs.sp, snrs.rp_primary, lambda_p)
}

/// `φ = 1 - e^{-Λ/γ̃_d} (1 + ln(1 + Λ γ̃_i/γ̃_d) / γ̃_i)`.
pub fn interference_outage_factor(direct: f64, interferer: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if direct <= 0.0 {
        return 1.0;
    }
    let log_term = if interferer > 0.0 {
        (lambda * interferer / direct).ln_1p() / interferer
    } else {
        lambda / direct
    };
    1.0 - (-lambda / direct).exp() * (1.0 + log_term)
}

/// Bound on the conditional secondary outage when the relay forwards the
/// primary signal: `φ (γ̃_rs^(p) + 1)`, clamped.
pub fn cond_secondary_outage_d1_upper(snrs: &EffectiveSnrs, lambda_s: f64) -> f64 {
    let phi = interference_outage_factor(snrs.ss, snrs.ps, lambda_s);
    clamp_prob(phi * (snrs.rs_primary + 1.0))
}

/// Upper bound on `P(a_p > a_s)` through the scaled exponential integral.
pub fn prob_ap_gt_as_upper(snrs: &EffectiveSnrs) -> f64 {
    let (ss, ps, rs) = (snrs.ss, snrs.ps, snrs.rs_secondary);
    if ss <= 0.0 {
        return 0.0;
    }
    if ps <= 0.0 {
        // ps → 0 limit of e^z E1(z) (1 + γ̃_ps)/γ̃_ps
        return clamp_prob(ss / (ss + rs));
    }
    let z = 1.0 / ps + rs / (ss * ps);
    clamp_prob(e1_scaled(z) * (1.0 + ps) / ps)
}

/// Thresholds `(K_p, K_s)` of joint decoding without cancellation, `None`
/// when `Λ_p Λ_s >= 1` makes that region empty.
fn joint_thresholds(lambda_p: f64, lambda_s: f64) -> Option<(f64, f64)> {
    let det = 1.0 - lambda_p * lambda_s;
    (det > 0.0).then(|| {
        (
            lambda_p * (1.0 + lambda_s) / det,
            lambda_s * (1.0 + lambda_p) / det,
        )
    })
}

/// Upper bound on the probability that scheme 1 forwards the primary signal.
pub fn prob_decision1_upper(snrs: &EffectiveSnrs, lambda_p: f64, lambda_s: f64) -> f64 {
    let s = snrs;
    if s.pr <= 0.0 {
        return 0.0;
    }
    let c = prob_not_above(s.rs_primary, s.ps);
    let p_ap = prob_exceeds_with_interference(s.pr, s.sr, lambda_p);
    let p_as = prob_exceeds_with_interference(s.sr, s.pr, lambda_s);
    let total = match joint_thresholds(lambda_p, lambda_s) {
        Some((kp, ks)) => {
            c * p_ap * exceed(s.sr, ks)
                + c * (1.0 - p_as) * (1.0 - exceed(s.sr, ks))
                + c * prob_ap_gt_as_upper(s) * p_as * exceed(s.pr, kp)
        }
        None => c * (1.0 - p_as),
    };
    clamp_prob(total)
}

/// Counterpart of [`prob_decision1_upper`] for forwarding the secondary
/// signal, with the primary and secondary roles exchanged.
pub fn prob_decision2_upper(snrs: &EffectiveSnrs, lambda_p: f64, lambda_s: f64) -> f64 {
    let s = snrs;
    if s.sr <= 0.0 {
        return 0.0;
    }
    let c = prob_not_above(s.ss, s.rs_secondary);
    let p_ap = prob_exceeds_with_interference(s.pr, s.sr, lambda_p);
    let p_as = prob_exceeds_with_interference(s.sr, s.pr, lambda_s);
    let total = match joint_thresholds(lambda_p, lambda_s) {
        Some((kp, ks)) => {
            c * p_as * exceed(s.pr, kp)
                + c * (1.0 - p_ap) * (1.0 - exceed(s.pr, kp))
                + c * p_ap * exceed(s.sr, ks)
        }
        None => c * (1.0 - p_ap),
    };
    clamp_prob(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageBreakdown {
    /// `P(D = 0)`, `P(D = 1)`, `P(D = 2)`.
    pub p_d: [f64; 3],
    pub cond_primary: [f64; 3],
    pub cond_secondary: [f64; 3],
    pub total_primary: f64,
    pub total_secondary: f64,
}

/// `Σ_d P(D=d) P(out | D=d)` for the primary and the secondary.
pub fn total_outage_upper(
    p_d: &[f64; 3],
    cond_primary: &[f64; 3],
    cond_secondary: &[f64; 3],
) -> Result<(f64, f64)> {
    let sum: f64 = p_d.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::WeightsNotNormalized(sum));
    }
    let weighted = |c: &[f64; 3]| clamp_prob(p_d.iter().zip(c).map(|(p, c)| p * c).sum());
    Ok((weighted(cond_primary), weighted(cond_secondary)))
}

/// Full analysis of scheme 1. When forwarding the primary signal is
/// infeasible `P(D = 1)` is zero.
pub fn outage_breakdown(
    snrs: &EffectiveSnrs,
    lambda_p: f64,
    lambda_s: f64,
    d1_feasible: bool,
) -> Result<OutageBreakdown> {
    let mut p1 = if d1_feasible {
        prob_decision1_upper(snrs, lambda_p, lambda_s)
    } else {
        0.0
    };
    let mut p2 = prob_decision2_upper(snrs, lambda_p, lambda_s);
    if p1 + p2 > 1.0 {
        let scale = p1 + p2;
        p1 /= scale;
        p2 /= scale;
    }
    let p_d = [(1.0 - p1 - p2).max(0.0), p1, p2];

    let cond_primary = [
        cond_outage_d0(snrs.pp, snrs.sp, lambda_p),
        cond_primary_outage_d1(snrs, lambda_p),
        clamp_prob(
            interference_outage_factor(snrs.pp, snrs.sp, lambda_p) * (snrs.rp_secondary + 1.0),
        ),
    ];
    let cond_secondary = [
        cond_outage_d0(snrs.ss, snrs.ps, lambda_s),
        cond_secondary_outage_d1_upper(snrs, lambda_s),
        relayed_outage_exact(snrs.ss, snrs.ps, snrs.rs_secondary, lambda_s),
    ];
    let (total_primary, total_secondary) =
        total_outage_upper(&p_d, &cond_primary, &cond_secondary)?;
    Ok(OutageBreakdown {
        p_d,
        cond_primary,
        cond_secondary,
        total_primary,
        total_secondary,
    })
}

const BISECTION_ITERATIONS: usize = 200;
const BISECTION_TOLERANCE: f64 = 1e-9;

/// Smallest relay SNR in `[0, γ_r^max]` keeping the conditional primary
/// outage of primary forwarding at or below `ε`; `None` when even `γ_r^max`
/// is not enough. `relay_variance` is `σ_rp²`.
pub fn relay_power_d1(
    snrs: &EffectiveSnrs,
    relay_variance: f64,
    lambda_p: f64,
    eps: f64,
    max_snr: f64,
) -> Option<f64> {
    let outage = |g: f64| relayed_outage_exact(snrs.pp, snrs.sp, g * relay_variance, lambda_p);
    if outage(0.0) <= eps {
        return Some(0.0);
    }
    if outage(max_snr) > eps {
        return None;
    }
    let (mut lo, mut hi) = (0.0, max_snr);
    for _ in 0..BISECTION_ITERATIONS {
        if hi - lo <= BISECTION_TOLERANCE * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if outage(mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Relay SNR for secondary forwarding by the closed-form rule
/// `(ε/φ' - 1)/σ_rp²`, clamped to `[0, γ_r^max]`.
pub fn relay_power_d2(
    snrs: &EffectiveSnrs,
    relay_variance: f64,
    lambda_p: f64,
    eps: f64,
    max_snr: f64,
) -> f64 {
    let phi = interference_outage_factor(snrs.pp, snrs.sp, lambda_p);
    if phi <= 0.0 {
        return max_snr;
    }
    let raw = (eps / phi - 1.0) / relay_variance;
    raw.clamp(0.0, max_snr)
}

/// Exact `P(W/(I_1+1) + W/(I_2+1) < Λ)` for independent exponentials with
/// means `signal` (W, shared by both terms), `first` and `second`.
///
/// This is the primary outage while the relay forwards the secondary signal
/// (PT repeats, ST then the relay interfere) and the secondary outage while
/// it forwards the primary one. Conditioning on `I_1` and `W` leaves a closed
/// form in `I_2`; the two outer integrals are done by Gauss–Legendre on
/// geometrically graded panels.
pub fn repeated_signal_outage(signal: f64, first: f64, second: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if signal <= 0.0 {
        return 1.0;
    }
    let rule = GaussLegendre::new(16);
    let a = signal;
    let b = second;
    let given_first = |i: f64| -> f64 {
        let k = 1.0 + i;
        // below y* both terms together cannot reach Λ whatever I_2 is
        let y_star = lambda * k / (1.0 + k);
        let certain = one_minus_exp(y_star / a);
        if b <= 0.0 {
            return certain;
        }
        // Substituting u = y/(Λ - y/k) - 1 turns the remaining part into
        // ∫ f_W(y(u)) e^{-u/b} y'(u) du over u >= 0.
        let integrand = |u: f64| {
            let y = lambda * k * (1.0 + u) / (1.0 + k + u);
            let dy = lambda * k * k / ((1.0 + k + u) * (1.0 + k + u));
            (-y / a).exp() / a * (-u / b).exp() * dy
        };
        let scale = b.min(1.0 + k);
        certain + integrate_graded(&rule, scale, 45.0 * b.max(1.0 + k), integrand)
    };
    if first <= 0.0 {
        return clamp_prob(given_first(0.0));
    }
    let s = first;
    let total = integrate_graded(&rule, 0.25 * s, 45.0 * s, |i| {
        (-i / s).exp() / s * given_first(i)
    });
    clamp_prob(total)
}

/// `∫_0^upper f` on panels `[0, h], [h, 2h], [2h, 4h], ...` with `h = scale/4`.
fn integrate_graded<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    scale: f64,
    upper: f64,
    mut f: F,
) -> f64 {
    let mut lo = 0.0;
    let mut hi = 0.25 * scale;
    let mut sum = 0.0;
    while lo < upper {
        let end = hi.min(upper);
        sum += rule.integrate(lo, end, &mut f);
        lo = end;
        hi = 2.0 * end;
    }
    sum
}

/// Largest relay SNR in `[0, γ_r^max]` whose exact conditional primary outage
/// while forwarding the secondary signal stays at or below `ε`.
pub fn relay_power_d2_exact(
    snrs: &EffectiveSnrs,
    relay_variance: f64,
    lambda_p: f64,
    eps: f64,
    max_snr: f64,
) -> f64 {
    let outage = |g: f64| repeated_signal_outage(snrs.pp, snrs.sp, g * relay_variance, lambda_p);
    if outage(max_snr) <= eps {
        return max_snr;
    }
    if outage(0.0) > eps {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, max_snr);
    for _ in 0..BISECTION_ITERATIONS {
        if hi - lo <= BISECTION_TOLERANCE * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if outage(mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest power split `α` for superposed forwarding whose empirical
/// conditional primary outage, over `draws` fixed-seed channel samples, is
/// at most `ε`. `None` when even `α = 1` fails.
///
/// Arguments are the effective SNRs of PT→PD, ST→PD and (at `γ_r^(ps)`)
/// R→PD. Each draw is in outage exactly for `α` below a threshold, so the
/// answer is an order statistic of the per-draw thresholds.
pub fn power_split_d3(
    pp: f64,
    sp: f64,
    rp: f64,
    lambda_p: f64,
    eps: f64,
    draws: usize,
    seed: u64,
) -> Option<f64> {
    if draws == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exp = |mean: f64| -mean * (1.0 - rng.random::<f64>()).ln();
    let allowed = (eps * draws as f64).floor() as usize;
    let mut always = 0usize;
    let mut thresholds = Vec::with_capacity(draws);
    for _ in 0..draws {
        let first_slot = exp(pp) / (exp(sp) + 1.0);
        let relay = exp(rp);
        let missing = lambda_p - first_slot;
        if missing <= 0.0 {
            continue;
        }
        if missing > relay {
            always += 1;
        } else {
            thresholds.push(missing * (relay + 1.0) / (relay * (1.0 + missing)));
        }
    }
    if always > allowed {
        return None;
    }
    let m = allowed - always;
    if m >= thresholds.len() {
        return Some(0.0);
    }
    // (m+1)-th largest threshold
    let idx = thresholds.len() - 1 - m;
    let (_, nth, _) = thresholds.select_nth_unstable_by(idx, f64::total_cmp);
    Some(nth.clamp(0.0, 1.0))
}
