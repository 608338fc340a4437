use crate::error::{Error, Result};

/// Root of an increasing function by bisection.
///
/// Requires `g(lo) ≤ 0 ≤ g(hi)`; returns the midpoint of a bracket of width
/// at most `tol` (or the tightest bracket representable in f64).
pub fn find_root_monotone<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo <= 0.0 && g_hi >= 0.0) {
        return Err(Error::domain(format!(
            "bracket does not straddle a root: g({lo}) = {g_lo}, g({hi}) = {g_hi}"
        )));
    }
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
