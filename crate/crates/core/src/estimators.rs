//! Hard-thresholding, LASSO, adaptive LASSO and SCAD estimates in scaled coordinates.
//!
//! With known variance the estimate is a function of X = (√n/σ)·Ȳ with
//! threshold τ = √n·η. The unknown-variance quantities are the same maps with
//! the threshold replaced by R·τ, where R = Σ̂/σ.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Hard,
    Lasso,
    AdaptiveLasso,
    Scad,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] =
        [EstimatorKind::Hard, EstimatorKind::Lasso, EstimatorKind::AdaptiveLasso, EstimatorKind::Scad];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Hard => "hard",
            EstimatorKind::Lasso => "lasso",
            EstimatorKind::AdaptiveLasso => "adaptive-lasso",
            EstimatorKind::Scad => "scad",
        }
    }

    /// Lasso, adaptive LASSO and SCAD are continuous in x; hard thresholding jumps at ±τ.
    pub fn is_continuous(self) -> bool {
        !matches!(self, EstimatorKind::Hard)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" | "h" => Ok(EstimatorKind::Hard),
            "lasso" | "soft" | "s" => Ok(EstimatorKind::Lasso),
            "adaptive-lasso" | "adaptive_lasso" | "adaptive" | "a" => Ok(EstimatorKind::AdaptiveLasso),
            "scad" | "c" => Ok(EstimatorKind::Scad),
            other => Err(Error::Configuration(format!("unknown estimator kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Scaled tuning parameter τ = √n·η.
    pub tau: f64,
    /// SCAD constant; ignored by the other kinds.
    pub scad_a: f64,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, tau: f64) -> Result<Self> {
        Self::with_scad_a(kind, tau, DEFAULT_SCAD_A)
    }

    pub fn with_scad_a(kind: EstimatorKind, tau: f64, scad_a: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("tau must be positive and finite, got {tau}")));
        }
        if !(scad_a > 2.0 && scad_a.is_finite()) {
            return Err(Error::domain(format!("SCAD constant a must exceed 2, got {scad_a}")));
        }
        Ok(EstimatorSpec { kind, tau, scad_a })
    }

    /// Nonnegative points where the estimate changes regime (mirror for negative x).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            EstimatorKind::Scad => vec![self.tau, 2.0 * self.tau, self.scad_a * self.tau],
            _ => vec![self.tau],
        }
    }

    /// Beyond this |x| the estimate is affine (x, or x ∓ τ for the LASSO) or,
    /// for the adaptive LASSO, x - τ²/x.
    pub fn outer_breakpoint(&self) -> f64 {
        self.breakpoints().into_iter().fold(0.0, f64::max)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn threshold(kind: EstimatorKind, x: f64, t: f64, a: f64) -> f64 {
    let ax = x.abs();
    match kind {
        EstimatorKind::Hard => {
            if ax <= t {
                0.0
            } else {
                x
            }
        }
        EstimatorKind::Lasso => sign(x) * (ax - t).max(0.0),
        EstimatorKind::AdaptiveLasso => {
            if ax <= t {
                0.0
            } else {
                x - t * t / x
            }
        }
        EstimatorKind::Scad => {
            if ax <= 2.0 * t {
                sign(x) * (ax - t).max(0.0)
            } else if ax <= a * t {
                ((a - 1.0) * x - sign(x) * a * t) / (a - 2.0)
            } else {
                x
            }
        }
    }
}

/// Known-variance estimate Ψ̂(x).
pub fn psi_hat(spec: &EstimatorSpec, x: f64) -> f64 {
    threshold(spec.kind, x, spec.tau, spec.scad_a)
}

/// Ψ̃(x, r): the same map with threshold r·τ (including SCAD's 2rτ and arτ).
pub fn psi_tilde(spec: &EstimatorSpec, x: f64, r: f64) -> f64 {
    threshold(spec.kind, x, r * spec.tau, spec.scad_a)
}

/// Back to the original scale: θ = (σ/√n)·ψ.
pub fn theta_from_psi(psi_value: f64, n: u64, sigma: f64) -> f64 {
    sigma / (n as f64).sqrt() * psi_value
}

/// A scaled observation: X = (√n/σ)·Ȳ, optionally paired with R = Σ̂/σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledObservation {
    pub x: f64,
    pub r: Option<f64>,
}

impl ScaledObservation {
    pub fn known(x: f64) -> Self {
        ScaledObservation { x, r: None }
    }

    pub fn with_ratio(x: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::domain(format!("R must be positive, got {r}")));
        }
        Ok(ScaledObservation { x, r: Some(r) })
    }

    /// Ψ̂ when no R is attached, Ψ̃ otherwise.
    pub fn estimate(&self, spec: &EstimatorSpec) -> f64 {
        match self.r {
            Some(r) => psi_tilde(spec, self.x, r),
            None => psi_hat(spec, self.x),
        }
    }
}
