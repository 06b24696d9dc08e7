//! Exponential integrals.
//!
//! `E1(z) = ∫_z^∞ e^(-t)/t dt` for `z > 0`, and `Ei(x) = -E1(-x)` on the
//! negative axis. Small arguments use the convergent power series, larger ones
//! the continued fraction evaluated with the modified Lentz method; both reach
//! close to full double precision.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 1.0;
const MAX_TERMS: usize = 500;

/// `Ei(x) = ∫_{-∞}^x e^t/t dt` for `x < 0`.
pub fn exp_integral(x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::param(
            "x",
            format!("exp_integral needs x < 0, got {x}"),
        ));
    }
    Ok(-e1(-x))
}

/// `E1(z)` for `z > 0`; `+∞` at zero.
pub fn e1(z: f64) -> f64 {
    if z <= 0.0 {
        return if z == 0.0 { f64::INFINITY } else { f64::NAN };
    }
    if z <= SERIES_LIMIT {
        e1_series(z)
    } else {
        (-z).exp() * e1_continued_fraction(z)
    }
}

/// `e^z E1(z)`, finite for every `z > 0` (behaves like `1/z` at infinity).
pub fn e1_scaled(z: f64) -> f64 {
    if z <= 0.0 {
        return if z == 0.0 { f64::INFINITY } else { f64::NAN };
    }
    if z <= SERIES_LIMIT {
        z.exp() * e1_series(z)
    } else if z.is_infinite() {
        0.0
    } else {
        e1_continued_fraction(z)
    }
}

fn e1_series(z: f64) -> f64 {
    // E1(z) = -γ - ln z - Σ_{k≥1} (-z)^k / (k k!)
    let mut sum = 0.0;
    let mut term = 1.0; // (-z)^k / k!
    for k in 1..MAX_TERMS {
        term *= -z / k as f64;
        let contribution = term / k as f64;
        sum += contribution;
        if contribution.abs() < f64::EPSILON * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}

/// `e^z E1(z) = 1/(z+1- 1/(z+3- 4/(z+5- ...)))`.
fn e1_continued_fraction(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn reference_values() {
        // 20-digit reference values
        assert!(rel(exp_integral(-1.0).unwrap(), -0.219_383_934_395_520_27) < 1e-14);
        assert!(rel(exp_integral(-0.1).unwrap(), -1.822_923_958_419_390_7) < 1e-14);
        assert!(rel(exp_integral(-50.0).unwrap(), -3.783_264_029_550_459e-24) < 1e-13);
    }

    #[test]
    fn rejects_nonnegative() {
        assert!(exp_integral(0.0).is_err());
        assert!(exp_integral(2.0).is_err());
        assert!(exp_integral(f64::NAN).is_err());
    }

    #[test]
    fn magnitude_decreases() {
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let v = exp_integral(-0.05 * k as f64).unwrap();
            assert!(v < 0.0);
            assert!(v.abs() < prev);
            prev = v.abs();
        }
        assert!(exp_integral(-50.0).unwrap().abs() < 1e-23);
    }

    #[test]
    fn branches_agree_at_switch() {
        let below = e1(SERIES_LIMIT);
        let above = (-SERIES_LIMIT).exp() * e1_continued_fraction(SERIES_LIMIT);
        assert!(rel(below, above) < 1e-14);
    }

    #[test]
    fn scaled_matches_unscaled() {
        for z in [0.01, 0.5, 1.0, 2.5, 10.0, 100.0] {
            assert!(rel(e1_scaled(z), z.exp() * e1(z)) < 1e-13);
        }
        let z = 1e6;
        assert!(rel(e1_scaled(z), 1.0 / (z + 1.0)) < 1e-11);
    }
}
