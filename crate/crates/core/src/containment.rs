//! Whether a point estimate lies inside C* = [-b(-x), b(x)] for every x, and
//! the largest tuning parameter for which it does.
//!
//! The margin at x is min(b(x) - ψ̂(x), ψ̂(x) + b(-x)). It is checked on a fine
//! grid, at both one-sided limits of every estimator breakpoint, at the knots
//! of b and -b(-·), and in closed form beyond T = max(outer breakpoint, q),
//! where e vanishes and the estimate has a simple form:
//!
//! | kind           | tail infimum of the margin |
//! |----------------|----------------------------|
//! | hard, SCAD     | z                          |
//! | LASSO          | z - τ                      |
//! | adaptive LASSO | z - τ²/T                   |
//!
//! For the unknown-variance interval, dividing by R turns Ψ̃(X, R) ∈ D* into
//! Ψ̂(X/R) ∈ [-b(-X/R), b(X/R)], so the same check decides both cases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{psi_hat, EstimatorKind, EstimatorSpec};
use crate::interval::{eval_b, BFunction};
use crate::table::{Cell, Table};

/// Spacing of the dense part of the containment check.
pub const GRID_SPACING: f64 = 1e-3;
pub const TAU_FLOOR: f64 = 1e-6;
pub const TAU_CEILING: f64 = 10.0;
pub const DEFAULT_TAU_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub kind: EstimatorKind,
    pub tau: f64,
    pub contained: bool,
    /// Where the margin is smallest (first such point in increasing x).
    pub worst_x: f64,
    pub margin: f64,
}

fn margin_at(bf: &BFunction, spec: &EstimatorSpec, x: f64) -> f64 {
    let est = psi_hat(spec, x);
    (eval_b(bf, x) - est).min(est + eval_b(bf, -x))
}

/// Start of the region where e vanishes and the estimate is in its final regime.
fn tail_start(bf: &BFunction, spec: &EstimatorSpec) -> f64 {
    spec.outer_breakpoint().max(bf.q())
}

/// Infimum of the margin over |x| > T and a point attaining (or approaching) it.
fn tail_margin(bf: &BFunction, spec: &EstimatorSpec) -> (f64, f64) {
    let t = tail_start(bf, spec);
    let z = bf.z();
    match spec.kind {
        EstimatorKind::Hard | EstimatorKind::Scad => (z, t),
        EstimatorKind::Lasso => (z - spec.tau, t),
        EstimatorKind::AdaptiveLasso => (z - spec.tau * spec.tau / t, t),
    }
}

/// All points at which the margin is evaluated, in increasing order.
fn check_points(bf: &BFunction, spec: &EstimatorSpec) -> Vec<f64> {
    let reach = spec.scad_a * spec.tau + bf.q() + bf.z() + 2.0;
    let count = (2.0 * reach / GRID_SPACING).ceil() as usize;
    let step = 2.0 * reach / count as f64;
    let mut pts: Vec<f64> = (0..=count).map(|i| -reach + i as f64 * step).collect();
    for p in spec.breakpoints() {
        for s in [p, -p] {
            pts.extend([s.next_down(), s, s.next_up()]);
        }
    }
    for &k in bf.knots() {
        pts.extend([k, -k]);
    }
    let t = tail_start(bf, spec);
    pts.extend([t, -t]);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

pub fn check_containment(bf: &BFunction, spec: &EstimatorSpec) -> ContainmentReport {
    let mut worst_x = 0.0;
    let mut margin = f64::INFINITY;
    for x in check_points(bf, spec) {
        let m = margin_at(bf, spec, x);
        if m < margin {
            margin = m;
            worst_x = x;
        }
    }
    let (tail, at) = tail_margin(bf, spec);
    if tail < margin {
        margin = tail;
        worst_x = -at;
    }
    ContainmentReport { kind: spec.kind, tau: spec.tau, contained: margin >= 0.0, worst_x, margin }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMaxResult {
    pub kind: EstimatorKind,
    /// Midpoint of the final bisection bracket.
    pub tau_max: f64,
    /// Containment margin at `tau_max` (may be slightly negative: the supremum is approached from below).
    pub margin: f64,
    /// Whether |τ_max - z| ≤ 1e-3.
    pub matches_z: bool,
    /// Every (τ, margin) evaluated, in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

/// Largest τ for which `kind` is contained in C*, by bisection on [1e-6, 10].
pub fn tau_max(bf: &BFunction, kind: EstimatorKind, scad_a: f64, tol: f64) -> Result<TauMaxResult> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let report = |tau: f64| -> Result<ContainmentReport> {
        Ok(check_containment(bf, &EstimatorSpec::with_scad_a(kind, tau, scad_a)?))
    };
    let mut trace = Vec::new();
    let floor = report(TAU_FLOOR)?;
    trace.push((TAU_FLOOR, floor.margin));
    if !floor.contained {
        return Err(Error::Configuration(format!(
            "{kind} is not contained even at tau = {TAU_FLOOR} (margin {} at x = {})",
            floor.margin, floor.worst_x
        )));
    }
    let ceiling = report(TAU_CEILING)?;
    trace.push((TAU_CEILING, ceiling.margin));
    if ceiling.contained {
        return Err(Error::Configuration(format!(
            "{kind} is still contained at the bisection ceiling tau = {TAU_CEILING}"
        )));
    }
    let (mut lo, mut hi) = (TAU_FLOOR, TAU_CEILING);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let r = report(mid)?;
        trace.push((mid, r.margin));
        if r.contained {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    check_monotone(kind, &trace)?;
    let tau = 0.5 * (lo + hi);
    let margin = report(tau)?.margin;
    Ok(TauMaxResult { kind, tau_max: tau, margin, matches_z: (tau - bf.z()).abs() <= 1e-3, trace })
}

/// Margins along the bisection trace must not increase with τ.
fn check_monotone(kind: EstimatorKind, trace: &[(f64, f64)]) -> Result<()> {
    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in sorted.windows(2) {
        let ((t0, m0), (t1, m1)) = (pair[0], pair[1]);
        if m1 > m0 + 1e-12 {
            return Err(Error::Domain(format!(
                "containment margin of {kind} increases with tau: {m0} at tau = {t0} but {m1} at tau = {t1}"
            )));
        }
    }
    Ok(())
}

/// Rows (x, -b(-x), ψ̂(x), b(x)) with header `x,lower,estimate,upper`.
pub fn figure_profile(bf: &BFunction, spec: &EstimatorSpec, x_grid: &[f64]) -> Result<Table> {
    if x_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("profile grid entries must be finite"));
    }
    let mut t = Table::new(&["x", "lower", "estimate", "upper"]);
    for &x in x_grid {
        t.push(vec![
            Cell::Real(x),
            Cell::Real(-eval_b(bf, -x)),
            Cell::Real(psi_hat(spec, x)),
            Cell::Real(eval_b(bf, x)),
        ]);
    }
    Ok(t)
}
