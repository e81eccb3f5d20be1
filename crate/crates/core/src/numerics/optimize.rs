use crate::error::{Error, Result};

/// Maximize a unimodal `f` on `[lo, hi]` by golden-section search; returns
/// `(argmax, max)`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Domain(format!("golden-section search needs lo < hi and tol > 0, got [{lo}, {hi}], {tol}")));
    }
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    if !fx.is_finite() {
        return Err(Error::NonFinite { at: x, value: fx });
    }
    Ok((x, fx))
}
