//! Lower bound on the expected-length ratio of any interval that contains a
//! thresholding estimate under consistent tuning (η_n → 0, √n·η_n → ∞).
//!
//! At θ_n = σ·η_n/2 the scaled mean is τ/2 with τ = √n·η_n. On the event
//! A_n = {|X| ≤ R·τ} the estimate is 0, so an interval that contains it and
//! covers θ_n has length at least θ_n on A_n ∩ B_n (B_n the coverage event).
//! With P(A_n ∩ B_n) ≥ 1 - α - P(A_nᶜ) this gives, relative to the t interval,
//!
//!   ratio ≥ (1 - α - P(A_nᶜ))·τ / (4·t(n-1)·E(R)).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{std_normal_cdf, t_critical_value, QuadratureConfig};
use crate::table::{Cell, Table};
use crate::var_unknown::RDistribution;

/// P(A_nᶜ) = P(|X| > R·√n·η) with X ~ N(√n·η/2, 1) independent of R.
pub fn prob_a_complement(n: u64, eta: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain(format!("eta must be positive, got {eta}")));
    }
    let r_dist = RDistribution::new(n)?;
    let tau = (n as f64).sqrt() * eta;
    let p = r_dist.expectation(|r| std_normal_cdf(0.5 * tau - r * tau) + std_normal_cdf(-r * tau - 0.5 * tau), cfg)?;
    Ok(p.clamp(0.0, 1.0))
}

/// max(0, 1 - α - P(A_nᶜ))·√n·η / (4·t(n-1)·E(R)).
pub fn theorem1_lower_bound(n: u64, eta: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let p = prob_a_complement(n, eta, cfg)?;
    bound_from_parts(n, eta, alpha, p)
}

fn bound_from_parts(n: u64, eta: f64, alpha: f64, p_a_complement: f64) -> Result<f64> {
    let t = t_critical_value(n - 1, alpha)?;
    let mean_r = RDistribution::new(n)?.mean();
    let coverage_left = (1.0 - alpha - p_a_complement).max(0.0);
    Ok(coverage_left * (n as f64).sqrt() * eta / (4.0 * t * mean_r))
}

/// Sample sizes with η_n = n^(-γ), 0 < γ < 1/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Schedule {
    pub n_values: Vec<u64>,
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for Theorem1Schedule {
    /// γ = 1/4 and n = 10², 10³, …, 10⁸.
    fn default() -> Self {
        Theorem1Schedule { n_values: (2..=8).map(|k| 10u64.pow(k)).collect(), gamma: 0.25, alpha: 0.05 }
    }
}

impl Theorem1Schedule {
    pub fn eta(&self, n: u64) -> f64 {
        (n as f64).powf(-self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return bad(format!("gamma must lie in (0, 1/2), got {}", self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.n_values.is_empty() || self.n_values[0] < 2 {
            return bad("n_values must be nonempty with every n ≥ 2".into());
        }
        if self.n_values.windows(2).any(|p| p[1] <= p[0]) {
            return bad("n_values must be strictly increasing".into());
        }
        let (first, last) = (self.n_values[0], self.n_values[self.n_values.len() - 1]);
        if self.n_values.len() > 1 {
            let shrinks = self.eta(last) < self.eta(first);
            let scaled = |n: u64| (n as f64).sqrt() * self.eta(n);
            if !shrinks || scaled(last) <= scaled(first) {
                return bad("schedule must have eta decreasing and sqrt(n)*eta increasing".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Row {
    pub n: u64,
    pub eta: f64,
    pub sqrt_n_eta: f64,
    pub p_a_complement: f64,
    pub lower_bound: f64,
}

pub fn theorem1_table(schedule: &Theorem1Schedule, cfg: &QuadratureConfig) -> Result<Vec<Theorem1Row>> {
    schedule.validate()?;
    schedule
        .n_values
        .par_iter()
        .map(|&n| {
            let eta = schedule.eta(n);
            let p = prob_a_complement(n, eta, cfg)?;
            Ok(Theorem1Row {
                n,
                eta,
                sqrt_n_eta: (n as f64).sqrt() * eta,
                p_a_complement: p,
                lower_bound: bound_from_parts(n, eta, schedule.alpha, p)?,
            })
        })
        .collect()
}

/// CSV with header `n,eta,sqrt_n_eta,p_a_complement,lower_bound`.
pub fn theorem1_csv(rows: &[Theorem1Row]) -> Table {
    let mut t = Table::new(&["n", "eta", "sqrt_n_eta", "p_a_complement", "lower_bound"]);
    for r in rows {
        t.push(vec![
            Cell::Int(r.n),
            Cell::Real(r.eta),
            Cell::Real(r.sqrt_n_eta),
            Cell::Real(r.p_a_complement),
            Cell::Real(r.lower_bound),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::chi_scaled_mean;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn extremes() {
        assert!(prob_a_complement(100, 10.0, &cfg()).unwrap() < 1e-12);
        // 1 - P(A_nᶜ) = P(|X| ≤ Rτ) ≈ 2τ·φ(0)·E(R) for tiny τ = √n·η
        let tau = 10.0 * 1e-6;
        let gap = 1.0 - prob_a_complement(100, 1e-6, &cfg()).unwrap();
        let first_order = 2.0 * tau * crate::numerics::std_normal_pdf(0.0) * chi_scaled_mean(99.0);
        assert!((gap - first_order).abs() < 1e-9, "{gap} vs {first_order}");
        assert!(prob_a_complement(1, 0.5, &cfg()).is_err());
        assert!(prob_a_complement(10, 0.0, &cfg()).is_err());
    }

    #[test]
    fn vacuous_bound_is_zero() {
        assert_eq!(theorem1_lower_bound(10, 1e-3, 0.05, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn bound_matches_unscaled_form() {
        // θ_n·(1 - α - P) / (2·t(n-1)·E(Σ̂)/√n) with θ_n = σ·η/2 and E(Σ̂) = σ·E(R).
        for (n, eta, sigma) in [(50u64, 0.4, 0.3), (1000, 0.2, 7.0), (20, 0.9, 1.0)] {
            let p = prob_a_complement(n, eta, &cfg()).unwrap();
            let t = t_critical_value(n - 1, 0.05).unwrap();
            let theta = sigma * eta / 2.0;
            let e_sigma_hat = sigma * chi_scaled_mean((n - 1) as f64);
            let unscaled = theta * (0.95 - p).max(0.0) / (2.0 * t * e_sigma_hat / (n as f64).sqrt());
            let scaled = theorem1_lower_bound(n, eta, 0.05, &cfg()).unwrap();
            assert!((unscaled - scaled).abs() <= 1e-12 * scaled.max(1.0));
        }
    }

    #[test]
    fn default_schedule_diverges() {
        let rows = theorem1_table(&Theorem1Schedule::default(), &cfg()).unwrap();
        assert_eq!(rows.len(), 7);
        let last = rows.last().unwrap();
        assert!(last.lower_bound > 10.0);
        assert!(last.p_a_complement < 1e-3);
        // P(A_nᶜ) decreases once √n·η ≥ 4
        let tail: Vec<_> = rows.iter().filter(|r| r.sqrt_n_eta >= 4.0).collect();
        assert!(tail.windows(2).all(|p| p[1].p_a_complement < p[0].p_a_complement));
        let csv = theorem1_csv(&rows).to_csv();
        assert!(csv.starts_with("n,eta,sqrt_n_eta,p_a_complement,lower_bound\n100,"));
    }

    #[test]
    fn schedule_validation() {
        let mut s = Theorem1Schedule { gamma: 0.5, ..Theorem1Schedule::default() };
        assert!(s.validate().is_err());
        s.gamma = 0.25;
        s.n_values = vec![100, 10];
        assert!(s.validate().is_err());
        s.n_values = vec![1, 10];
        assert!(s.validate().is_err());
    }
}
