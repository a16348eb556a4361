//! Special functions: standard normal CDF/density, Lambert W, Γ.

use crate::error::{domain, Result};
use std::f64::consts::{E, FRAC_1_SQRT_2, PI};

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function Φ, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Γ(x) for positive arguments.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `E(X − k)_+` for log-normal `X` with mean `f` and log-volatility `s`.
pub fn black_call(f: f64, k: f64, s: f64) -> f64 {
    if k <= 0.0 {
        return f - k;
    }
    if f <= 0.0 {
        return 0.0;
    }
    if s <= 0.0 {
        return (f - k).max(0.0);
    }
    let d1 = ((f / k).ln() + 0.5 * s * s) / s;
    f * norm_cdf(d1) - k * norm_cdf(d1 - s)
}

/// `E(k − X)_+` for log-normal `X` with mean `f` and log-volatility `s`.
pub fn black_put(f: f64, k: f64, s: f64) -> f64 {
    if k <= 0.0 {
        return 0.0;
    }
    if f <= 0.0 {
        return k;
    }
    if s <= 0.0 {
        return (k - f).max(0.0);
    }
    let d1 = ((f / k).ln() + 0.5 * s * s) / s;
    k * norm_cdf(s - d1) - f * norm_cdf(-d1)
}

/// Principal branch W₀ of the Lambert W function, `w e^w = x` for `x ≥ −1/e`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if x.is_nan() || x < branch - 1e-15 {
        return Err(domain(format!("lambert_w0 argument {x} below -1/e")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x <= branch {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        // series about the branch point
        let p = (2.0 * (E * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        // log1p start is within a few percent on this range
        0.5 * x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// `W₀(e^l)` without forming `e^l`; usable for very large `l`.
pub fn lambert_w0_exp(l: f64) -> Result<f64> {
    if l < 600.0 {
        return lambert_w0(l.exp());
    }
    // w + ln w = l
    let mut w = l - l.ln();
    for _ in 0..64 {
        let f = w + w.ln() - l;
        let step = f / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 1e-16 * w {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_reference_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-1.96) - 0.024_997_895_148_220_435).abs() < 1e-16);
        assert!((norm_cdf(0.125) - 0.549_738_224_830_112_9).abs() < 1e-15);
        assert!((norm_cdf(-8.0) - 6.220_960_574_271_74e-16).abs() < 1e-27);
    }

    #[test]
    fn lambert_special_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_784).abs() < 1e-15);
        assert!((lambert_w0(-1.0 / E).unwrap() + 1.0).abs() < 1e-7);
        assert!(lambert_w0(-0.5).is_err());
    }

    #[test]
    fn lambert_residuals_across_range() {
        for &x in &[-0.367, -0.3, -0.1, 1e-9, 0.01, 0.5, 2.0, 10.0, 1e3, 1e8, 1e100] {
            let w = lambert_w0(x).unwrap();
            let r = w * w.exp() - x;
            assert!(r.abs() <= 1e-14 * (1.0 + x.abs()), "x={x} r={r}");
        }
    }

    #[test]
    fn lambert_exp_form_matches() {
        for &l in &[-3.0, 0.0, 5.0, 30.0, 500.0] {
            let a = lambert_w0_exp(l).unwrap();
            let b = lambert_w0(f64::exp(l)).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + b));
        }
        let w = lambert_w0_exp(1000.0).unwrap();
        assert!((w + w.ln() - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn black_reference() {
        // F = k = 1, s = 0.25: 2Φ(0.125) − 1
        let c = black_call(1.0, 1.0, 0.25);
        assert!((c - (2.0 * norm_cdf(0.125) - 1.0)).abs() < 1e-16);
        let p = black_put(1.2, 0.9, 0.3);
        let c = black_call(1.2, 0.9, 0.3);
        assert!((c - p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn gamma_half_integers() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(2.5) - 0.75 * PI.sqrt()).abs() < 1e-14);
    }
}
