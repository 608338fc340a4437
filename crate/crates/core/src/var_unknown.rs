//! The unknown-variance interval D* = [-R·b(-X/R), R·b(X/R)], R = Σ̂/σ.
//!
//! X ~ N(ψ, 1) and R are independent. Given R = r, the same monotonicity
//! argument as in the known-variance case gives
//!
//!   P(ψ ∈ D* | R = r) = 1 - Φ(r·b⁻¹(ψ/r) - ψ) - Φ(ψ + r·b⁻¹(-ψ/r)),
//!
//! and E(length | R = r) = 2zr + r²∫ (e(x) + e(-x)) φ(rx - ψ) dx after the
//! substitution x = X/r. Both are integrated against f_R over a window
//! outside which R has probability below 1e-12.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{
    coverage_known, expected_length_known, inverse_b, BFunction, EfficiencyCurve, EfficiencyRecord, GAUSS_TRUNCATION,
};
use crate::numerics::special::{chi_scaled_ln_density, chi_scaled_support};
use crate::numerics::{
    chi_scaled_mean, integrate, integrate_with_breaks, std_normal_cdf, std_normal_pdf, t_critical_value,
    QuadratureConfig,
};
use crate::table::{Cell, Table};

/// Probability mass of R allowed outside the integration window, per side.
const R_TAIL: f64 = 5e-13;

/// Distribution of R = Σ̂/σ for a sample of size n: (n - 1)R² ~ χ²_{n-1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RDistribution {
    pub n: u64,
    mean: f64,
    r_lo: f64,
    r_hi: f64,
}

impl RDistribution {
    pub fn new(n: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("sample size must be at least 2, got {n}")));
        }
        let nu = (n - 1) as f64;
        let (r_lo, r_hi) = chi_scaled_support(nu, R_TAIL);
        Ok(RDistribution { n, mean: chi_scaled_mean(nu), r_lo, r_hi })
    }

    pub fn degrees_of_freedom(&self) -> u64 {
        self.n - 1
    }

    pub fn density(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        chi_scaled_ln_density((self.n - 1) as f64, r).exp()
    }

    /// E(R), in closed form.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Integration window [r_lo, r_hi].
    pub fn support(&self) -> (f64, f64) {
        (self.r_lo, self.r_hi)
    }

    /// ∫ g(r) f_R(r) dr over the integration window.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G, cfg: &QuadratureConfig) -> Result<f64> {
        self.expectation_with_breaks(g, &[], cfg)
    }

    /// Like [`expectation`](Self::expectation) with extra kinks of `g` inside the window.
    pub fn expectation_with_breaks<G: Fn(f64) -> f64>(
        &self,
        g: G,
        breaks: &[f64],
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        let mut points = vec![self.r_lo];
        // The mode sits near 1; splitting there helps the narrow densities of large n.
        let mut inner: Vec<f64> = breaks.iter().copied().chain([1.0]).filter(|&r| r > self.r_lo && r < self.r_hi).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        points.extend(inner);
        points.push(self.r_hi);
        integrate_with_breaks(|r| g(r) * self.density(r), &points, cfg)
    }

    /// E(R²) by quadrature; equals 1.
    pub fn second_moment(&self, cfg: &QuadratureConfig) -> Result<f64> {
        self.expectation(|r| r * r, cfg)
    }

    /// ∫ f_R by quadrature over the window.
    pub fn total_mass(&self, cfg: &QuadratureConfig) -> Result<f64> {
        self.expectation(|_| 1.0, cfg)
    }
}

#[derive(Debug, Clone)]
pub struct UnknownVarContext {
    pub n: u64,
    pub bf: BFunction,
    pub r_dist: RDistribution,
    /// t(n - 1) at the level of `bf`.
    pub t_quantile: f64,
}

impl UnknownVarContext {
    pub fn new(n: u64, bf: BFunction) -> Result<Self> {
        let r_dist = RDistribution::new(n)?;
        let second = r_dist.second_moment(&QuadratureConfig::default())?;
        if (second - 1.0).abs() > 1e-7 {
            return Err(Error::Domain(format!("E(R^2) = {second} differs from 1 for n = {n}")));
        }
        let t_quantile = t_critical_value(n - 1, bf.alpha())?;
        Ok(UnknownVarContext { n, bf, r_dist, t_quantile })
    }

    /// Expected length 2·t(n-1)·E(R) of the usual t interval, in the same scaled units.
    pub fn t_interval_length(&self) -> f64 {
        2.0 * self.t_quantile * self.r_dist.mean()
    }
}

/// Coverage given R = r.
fn conditional_coverage(bf: &BFunction, psi: f64, r: f64) -> f64 {
    let lo = r * inverse_b(bf, psi / r);
    let hi = -r * inverse_b(bf, -psi / r);
    if lo > hi {
        return 0.0;
    }
    (1.0 - std_normal_cdf(lo - psi) - std_normal_cdf(psi - hi)).max(0.0)
}

/// Values of r at which b⁻¹(±ψ/r) crosses a knot of b.
fn coverage_breaks(bf: &BFunction, psi: f64) -> Vec<f64> {
    if psi == 0.0 {
        return Vec::new();
    }
    bf.b_at_knots().iter().filter(|&&b| b != 0.0).map(|&b| (psi / b).abs()).collect()
}

/// P(ψ ∈ D*) = E[P(ψ ∈ D* | R)].
pub fn coverage_unknown(ctx: &UnknownVarContext, psi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !psi.is_finite() {
        return Err(Error::domain("psi must be finite"));
    }
    let bf = &ctx.bf;
    ctx.r_dist
        .expectation_with_breaks(|r| conditional_coverage(bf, psi, r), &coverage_breaks(bf, psi), cfg)
}

/// ∫_{-q}^{q} (e(x) + e(-x)) φ(rx - ψ) dx, truncated where φ is negligible.
fn inner_length_integral(bf: &BFunction, psi: f64, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let lo = (-bf.q()).max((psi - GAUSS_TRUNCATION) / r);
    let hi = bf.q().min((psi + GAUSS_TRUNCATION) / r);
    if lo >= hi {
        return Ok(0.0);
    }
    let mut points = vec![lo];
    points.extend(bf.symmetric_breaks().into_iter().filter(|&p| p > lo && p < hi));
    points.push(hi);
    integrate_with_breaks(|x| (bf.eval_e(x) + bf.eval_e(-x)) * std_normal_pdf(r * x - psi), &points, cfg)
}

/// E_ψ(length of D*) = 2z·E(R) + ∫ r² f_R(r) ∫ (e(x) + e(-x)) φ(rx - ψ) dx dr.
pub fn expected_length_unknown(ctx: &UnknownVarContext, psi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !psi.is_finite() {
        return Err(Error::domain("psi must be finite"));
    }
    let bf = &ctx.bf;
    let base = 2.0 * bf.z() * ctx.r_dist.mean();
    let (_, r_hi) = ctx.r_dist.support();
    // Nothing to integrate once the Gaussian window misses [-q, q] for every r in range.
    if psi.abs() - GAUSS_TRUNCATION >= bf.q() * r_hi {
        return Ok(base);
    }
    let failure = RefCell::new(None);
    let outer = ctx.r_dist.expectation(
        |r| match inner_length_integral(bf, psi, r, cfg) {
            Ok(v) => r * r * v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        cfg,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(base + outer?)
}

/// Coverage, expected length and (length / (2·t(n-1)·E(R)))² along `psi_grid`.
pub fn efficiency_unknown(ctx: &UnknownVarContext, psi_grid: &[f64]) -> Result<EfficiencyCurve> {
    efficiency_unknown_with(ctx, psi_grid, &QuadratureConfig::default())
}

pub fn efficiency_unknown_with(
    ctx: &UnknownVarContext,
    psi_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<EfficiencyCurve> {
    if psi_grid.is_empty() || psi_grid.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("psi grid must be nonempty and finite"));
    }
    let reference = ctx.t_interval_length();
    let records = psi_grid
        .par_iter()
        .map(|&psi| {
            let expected_length = expected_length_unknown(ctx, psi, cfg)?;
            Ok(EfficiencyRecord {
                psi,
                coverage: coverage_unknown(ctx, psi, cfg)?,
                expected_length,
                efficiency: (expected_length / reference).powi(2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EfficiencyCurve { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Row {
    pub n: u64,
    /// sup_ψ |P(ψ ∈ C*) - P(ψ ∈ D*)|
    pub sup_coverage_diff: f64,
    /// sup_ψ |E(len C*)/(2z) - E(len D*)/(2·t(n-1)·E(R))|
    pub sup_length_diff: f64,
}

pub fn theorem2_table(rows: &[Theorem2Row]) -> Table {
    let mut t = Table::new(&["n", "sup_coverage_diff", "sup_length_diff"]);
    for r in rows {
        t.push(vec![Cell::Int(r.n), Cell::Real(r.sup_coverage_diff), Cell::Real(r.sup_length_diff)]);
    }
    t
}

/// Supremum differences between the known- and unknown-variance functionals over
/// `psi_grid`, one row per sample size, sorted by n.
pub fn theorem2_diagnostics(
    bf: &BFunction,
    n_list: &[u64],
    psi_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<Theorem2Row>> {
    if n_list.is_empty() {
        return Err(Error::domain("n_list must be nonempty"));
    }
    if psi_grid.is_empty() || psi_grid.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("psi grid must be nonempty and finite"));
    }
    let two_z = 2.0 * bf.z();
    let known: Vec<(f64, f64)> = psi_grid
        .par_iter()
        .map(|&psi| Ok((coverage_known(bf, psi), expected_length_known(bf, psi, cfg)? / two_z)))
        .collect::<Result<_>>()?;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::with_capacity(ns.len());
    for n in ns {
        let ctx = UnknownVarContext::new(n, bf.clone())?;
        let reference = ctx.t_interval_length();
        let diffs: Vec<(f64, f64)> = psi_grid
            .par_iter()
            .zip(&known)
            .map(|(&psi, &(cov_k, len_k))| {
                let cov_u = coverage_unknown(&ctx, psi, cfg)?;
                let len_u = expected_length_unknown(&ctx, psi, cfg)? / reference;
                Ok(((cov_k - cov_u).abs(), (len_k - len_u).abs()))
            })
            .collect::<Result<_>>()?;
        rows.push(Theorem2Row {
            n,
            sup_coverage_diff: diffs.iter().map(|d| d.0).fold(0.0, f64::max),
            sup_length_diff: diffs.iter().map(|d| d.1).fold(0.0, f64::max),
        });
    }
    Ok(rows)
}

/// P(|Z| ≤ R·c) for Z ~ N(0, 1) independent of R.
pub fn scaled_normal_coverage(r_dist: &RDistribution, c: f64, cfg: &QuadratureConfig) -> Result<f64> {
    r_dist.expectation(|r| 1.0 - 2.0 * std_normal_cdf(-r * c), cfg)
}

/// ∫ f_R over [0, ∞) without the truncation window, for checking it.
pub fn untruncated_mass(r_dist: &RDistribution, cfg: &QuadratureConfig) -> Result<f64> {
    let (lo, hi) = r_dist.support();
    let upper = (hi * 4.0).max(20.0);
    let mut total = integrate(|r| r_dist.density(r), 0.0, lo.max(1e-300), cfg)?;
    total += r_dist.total_mass(cfg)?;
    total += integrate(|r| r_dist.density(r), hi, upper, cfg)?;
    Ok(total)
}
