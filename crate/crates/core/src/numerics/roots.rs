use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-4;

/// Bisection on a bracketing interval.
///
/// Requires `g(lo)` and `g(hi)` to differ in sign (a zero at either end is
/// accepted). Returns the midpoint of the final bracket, whose width is at
/// most `tol`.
pub fn find_root<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut ga = g(a);
    let gb = g(b);
    if ga.is_nan() || gb.is_nan() {
        return Err(Error::NonFinite {
            at: if ga.is_nan() { a } else { b },
            value: f64::NAN,
        });
    }
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::Bracketing {
            lo,
            hi,
            g_lo: ga,
            g_hi: gb,
        });
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm.is_nan() {
            return Err(Error::NonFinite { at: mid, value: gm });
        }
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
