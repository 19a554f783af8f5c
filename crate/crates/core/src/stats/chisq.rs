//! Chi-square upper-tail probabilities via the regularized incomplete gamma
//! function `Q(df/2, w/2)`, evaluated in log space so that tails far below
//! `f64::MIN_POSITIVE` still produce a finite `-log10 p`.

use std::f64::consts::{LN_10, PI};

use super::StatsError;

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// `ln Gamma(df / 2)`, exact up to rounding for the half-integer arguments
/// that chi-square degrees of freedom produce.
fn ln_gamma_half(df: u32) -> f64 {
    let mut acc = if df.is_multiple_of(2) {
        0.0
    } else {
        0.5 * PI.ln()
    };
    let mut x = if df.is_multiple_of(2) { 1.0 } else { 0.5 };
    let a = df as f64 / 2.0;
    while x < a {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// Series for the lower regularized gamma `P(a, x)`; converges fast for `x < a + 1`.
fn lower_series(a: f64, x: f64, ln_prefactor: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (ln_prefactor + sum.ln()).exp()
}

/// Modified Lentz evaluation of the continued fraction for `Q(a, x)`,
/// returned as `ln Q`.
fn ln_upper_fraction(a: f64, x: f64, ln_prefactor: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    ln_prefactor + h.ln()
}

/// Natural log of the chi-square survival function.
pub fn chisq_ln_sf(w: f64, df: u32) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::ZeroDf);
    }
    if w.is_nan() || w < 0.0 {
        return Err(StatsError::Domain(w));
    }
    if w == 0.0 {
        return Ok(0.0);
    }
    if w.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let a = df as f64 / 2.0;
    let x = w / 2.0;
    let ln_prefactor = -x + a * x.ln() - ln_gamma_half(df);
    if x < a + 1.0 {
        let p = lower_series(a, x, ln_prefactor);
        Ok((-p).ln_1p())
    } else {
        Ok(ln_upper_fraction(a, x, ln_prefactor))
    }
}

/// Chi-square upper-tail probability `P(X >= w)`, `X ~ chi2(df)`.
pub fn chisq_sf(w: f64, df: u32) -> Result<f64, StatsError> {
    chisq_ln_sf(w, df).map(f64::exp)
}

/// `-log10` of the upper-tail probability.
pub fn neg_log10_sf(w: f64, df: u32) -> Result<f64, StatsError> {
    // max() turns the -0.0 produced at w = 0 into 0.0
    chisq_ln_sf(w, df).map(|l| (-l / LN_10).max(0.0))
}

/// Inverse survival function: the `w` whose upper tail equals `p`.
pub fn chisq_isf(p: f64, df: u32) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::ZeroDf);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(StatsError::Domain(p));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let target = p.ln();
    let mut lo = 0.0;
    let mut hi = df as f64 + 1.0;
    while chisq_ln_sf(hi, df)? > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chisq_ln_sf(mid, df)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn chisq_median(df: u32) -> Result<f64, StatsError> {
    chisq_isf(0.5, df)
}
