//! Special functions: normal and Student-t distribution functions, gamma
//! family, regularized incomplete beta and gamma.
//!
//! The normal CDF uses the Taylor series `Φ(x) = 1/2 + φ(x)·Σ x^(2k+1)/(2k+1)!!`
//! on `|x| ≤ 3` and the Laplace continued fraction for the Mills ratio beyond
//! it, so tail probabilities keep full relative precision far out (the log
//! forms never underflow).

use crate::error::{Error, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const SERIES_CUTOFF: f64 = 3.0;
const EPS: f64 = 1e-16;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `Σ x^(2k+1)/(1·3·…·(2k+1))`, so that `Φ(x) = 1/2 + φ(x)·series(x)`.
fn marsaglia_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    while term.abs() > EPS * sum.abs() {
        term *= x2 / (2.0 * k + 1.0);
        sum += term;
        k += 1.0;
        if k > 500.0 {
            break;
        }
    }
    sum
}

/// Mills ratio `Φ̄(x)/φ(x)` for `x ≥ 3` via `1/(x + 1/(x + 2/(x + 3/(x + …))))`.
fn mills_ratio_cf(x: f64) -> f64 {
    // modified Lentz
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    1.0 / f
}

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    if x.abs() <= SERIES_CUTOFF {
        0.5 + normal_pdf(x) * marsaglia_series(x)
    } else if x > 0.0 {
        1.0 - normal_pdf(x) * mills_ratio_cf(x)
    } else {
        normal_pdf(x) * mills_ratio_cf(-x)
    }
}

/// Upper tail `1 − Φ(x)`, accurate in relative terms for large `x`.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// `ln Φ(x)`; finite for every finite `x`.
pub fn normal_log_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < -SERIES_CUTOFF {
        if x == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        normal_log_pdf(x) + mills_ratio_cf(-x).ln()
    } else if x <= SERIES_CUTOFF {
        normal_cdf(x).ln()
    } else if x == f64::INFINITY {
        0.0
    } else {
        // Φ(x) = 1 − Φ̄(x), Φ̄ tiny
        (-normal_pdf(x) * mills_ratio_cf(x)).ln_1p()
    }
}

/// `ln(1 − Φ(x))`.
pub fn normal_log_sf(x: f64) -> f64 {
    normal_log_cdf(-x)
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(e^a − e^b)` for `a ≥ b`.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// `ln Pr(lo < Z < hi)` for a standard normal `Z`, stable in either tail.
pub fn normal_log_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        // both in the upper half: difference of upper tails
        log_sub_exp(normal_log_sf(lo), normal_log_sf(hi))
    } else if hi <= 0.0 {
        log_sub_exp(normal_log_cdf(hi), normal_log_cdf(lo))
    } else {
        (1.0 - normal_cdf(lo) - normal_sf(hi)).ln()
    }
}

/// Inverse of [`normal_cdf`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile requires 0 < p < 1, got {p}"
        )));
    }
    if p > 0.5 {
        return Ok(-lower_normal_quantile(1.0 - p));
    }
    Ok(lower_normal_quantile(p))
}

/// Quantile for `p ≤ 1/2`: rational starting value (Abramowitz & Stegun
/// 26.2.23) polished by Newton steps on `ln Φ(x) = ln p`.
fn lower_normal_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let t = (-2.0 * p.ln()).sqrt();
    let num = 2.515_517 + 0.802_853 * t + 0.010_328 * t * t;
    let den = 1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t;
    let mut x = -(t - num / den);
    let target = p.ln();
    for _ in 0..100 {
        let lc = normal_log_cdf(x);
        let slope = (normal_log_pdf(x) - lc).exp();
        let step = (lc - target) / slope;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2
                    * (1.0 / 120.0
                        - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))))
}

pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))))
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "t degrees of freedom must be positive, got {nu}"
        )))
    }
}

/// Upper tail `Pr(T > x)` of Student's t with `nu` degrees of freedom.
pub fn t_sf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if x == 0.0 {
        return Ok(0.5);
    }
    let tail = 0.5 * reg_inc_beta(0.5 * nu, 0.5, nu / (nu + x * x));
    Ok(if x > 0.0 { tail } else { 1.0 - tail })
}

/// Student-t CDF; non-integer degrees of freedom allowed.
pub fn t_cdf(x: f64, nu: f64) -> Result<f64> {
    t_sf(-x, nu)
}

pub fn t_log_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// `x` with `Pr(T > x) = q`, for `0 < q < 1`.
pub fn t_isf(q: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("tail probability must lie in (0,1), got {q}")));
    }
    if q > 0.5 {
        return Ok(-t_isf(1.0 - q, nu)?);
    }
    if q == 0.5 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while t_sf(hi, nu)? > q {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Numeric("t quantile bracket overflow".into()));
        }
    }
    let target = q.ln();
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if t_sf(mid, nu)?.ln() > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inverse of [`t_cdf`].
pub fn t_quantile(p: f64, nu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("t quantile requires 0 < p < 1, got {p}")));
    }
    if p < 0.5 {
        Ok(-t_isf(p, nu)?)
    } else {
        t_isf(1.0 - p, nu)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn reg_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_front = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * ln_front.exp()
    } else {
        1.0 - upper_gamma_cf(a, x) * ln_front.exp()
    }
}

fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let a = 0.5 * df;
    let half = 0.5 * x;
    if half < a + 1.0 {
        1.0 - reg_gamma_p(a, half)
    } else {
        upper_gamma_cf(a, half) * (a * half.ln() - half - ln_gamma(a)).exp()
    }
}
