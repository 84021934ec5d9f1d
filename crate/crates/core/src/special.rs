//! Principal branch of the Lambert W function on `[0, ∞)`.

use crate::error::{Error, Result};

const HALLEY_MAX_ITER: usize = 50;

/// Unique `w ≥ 0` with `w·eʷ = t`.
///
/// Halley iteration from `ln(1 + t)`; falls back to bisection if Halley has
/// not settled within 50 steps.
pub fn lambert_w(t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::ArgumentDomain(format!("lambert_w requires t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t.is_infinite() {
        return Ok(f64::INFINITY);
    }
    // Series regime: W(t) = t − t² + …, exact to rounding below 1e−20.
    if t < 1e-20 {
        return Ok(t * (1.0 - t));
    }
    let mut w = t.ln_1p();
    for _ in 0..HALLEY_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - t;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let next = w - f / denom;
        if !next.is_finite() || next < 0.0 {
            break;
        }
        let delta = (next - w).abs();
        w = next;
        if delta <= 4.0 * f64::EPSILON * w.max(f64::MIN_POSITIVE) {
            return Ok(polish(w, t));
        }
    }
    Ok(bisect(t))
}

/// `W(eˡ)` without forming `eˡ`, for arguments like `c·eˢ` whose exponent
/// may overflow.
pub fn lambert_w_exp(l: f64) -> Result<f64> {
    if l.is_nan() {
        return Err(Error::ArgumentDomain("lambert_w_exp of NaN".into()));
    }
    if l < 700.0 {
        return lambert_w(l.exp());
    }
    // Newton on w + ln w = l, convex and increasing for w > 0.
    let mut w = l - l.ln();
    for _ in 0..HALLEY_MAX_ITER {
        let g = w + w.ln() - l;
        let next = w - g / (1.0 + 1.0 / w);
        let delta = (next - w).abs();
        w = next;
        if delta <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    Ok(w)
}

/// One last correction step picking the neighbour with the smaller residual.
fn polish(w: f64, t: f64) -> f64 {
    let residual = |v: f64| (v * v.exp() - t).abs();
    let mut best = w;
    for cand in [next_down(w), next_up(w)] {
        if cand >= 0.0 && residual(cand) < residual(best) {
            best = cand;
        }
    }
    best
}

fn bisect(t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, if t <= std::f64::consts::E { 1.0 } else { t.ln() });
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid * mid.exp() < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    polish(0.5 * (lo + hi), t)
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}
