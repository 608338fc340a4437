//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::distribution::{Continuous, ChiSquared as ChiSquaredDist};
use vwci_core::numerics::integrate_with_breaks;
use vwci_core::{eval_b, psi_hat, psi_tilde, BFunction, EstimatorKind, EstimatorSpec, QuadratureConfig};

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Plain bisection for the root of an increasing function.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) <= 0.0 && f(hi) >= 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// (estimate, standard error)
pub struct McEstimate {
    pub p: f64,
    pub se: f64,
}

fn mc_fraction(draws: u64, mut hit: impl FnMut() -> bool) -> McEstimate {
    let mut count = 0u64;
    for _ in 0..draws {
        count += hit() as u64;
    }
    let p = count as f64 / draws as f64;
    McEstimate { p, se: (p * (1.0 - p) / draws as f64).sqrt().max(1.0 / draws as f64) }
}

/// Fraction of X ~ N(ψ, 1) draws with ψ ∈ [-b(-X), b(X)].
pub fn mc_coverage_known(bf: &BFunction, psi: f64, draws: u64, seed: u64) -> McEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mc_fraction(draws, || {
        let x = psi + normal(&mut rng);
        -eval_b(bf, -x) <= psi && psi <= eval_b(bf, x)
    })
}

/// Fraction of (X, R) draws with ψ ∈ [-R·b(-X/R), R·b(X/R)], (n-1)R² ~ χ²_{n-1}.
pub fn mc_coverage_unknown(bf: &BFunction, n: u64, psi: f64, draws: u64, seed: u64) -> McEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = ChiSquared::new((n - 1) as f64).unwrap();
    mc_fraction(draws, || {
        let x = psi + normal(&mut rng);
        let r = (chi.sample(&mut rng) / (n - 1) as f64).sqrt();
        -r * eval_b(bf, -x / r) <= psi && psi <= r * eval_b(bf, x / r)
    })
}

/// Fraction of draws with |X| > R·τ, X ~ N(τ/2, 1), τ = √n·η.
pub fn mc_prob_a_complement(n: u64, eta: f64, draws: u64, seed: u64) -> McEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = ChiSquared::new((n - 1) as f64).unwrap();
    let tau = (n as f64).sqrt() * eta;
    mc_fraction(draws, || {
        let x = 0.5 * tau + normal(&mut rng);
        let r = (chi.sample(&mut rng) / (n - 1) as f64).sqrt();
        x.abs() > r * tau
    })
}

/// ∫ 1{ψ ∈ C*(x)} φ(x - ψ) dx with the indicator's switch points found by bisection
/// on b itself, never through b⁻¹.
pub fn indicator_coverage(bf: &BFunction, psi: f64, cfg: &QuadratureConfig) -> f64 {
    let span = bf.q() + bf.z() + psi.abs() + 20.0;
    // ψ ≤ b(x) iff x ≥ lo; -b(-x) ≤ ψ iff x ≤ hi.
    let lo = bisect_increasing(|x| eval_b(bf, x) - psi, -span, span);
    let hi = bisect_increasing(|x| -eval_b(bf, -x) - psi, -span, span);
    let covered = |x: f64| {
        if -eval_b(bf, -x) <= psi && psi <= eval_b(bf, x) {
            phi(x - psi)
        } else {
            0.0
        }
    };
    let a = psi - 12.0;
    let b = psi + 12.0;
    let mut points: Vec<f64> = [a, lo, hi, b].into_iter().filter(|p| *p >= a && *p <= b).collect();
    points.sort_by(f64::total_cmp);
    integrate_with_breaks(covered, &points, cfg).unwrap()
}

/// f_R from the χ² density: (n-1)R² ~ χ²_{n-1}.
pub fn r_density(n: u64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let nu = (n - 1) as f64;
    2.0 * nu * r * ChiSquaredDist::new(nu).unwrap().pdf(nu * r * r)
}

/// Brute-force product trapezoid for E_ψ(length of D*) on [r_min, r_max] × [-q, q] in u = x/r.
/// Uses length = r·(b(u) + b(-u)) = 2zr + r·(e(u) + e(-u)) at u = X/R.
pub fn trapezoid_length_unknown(bf: &BFunction, n: u64, psi: f64, nodes: usize, r_max: f64) -> f64 {
    let q = bf.q();
    let (hu, hr) = (2.0 * q / nodes as f64, r_max / nodes as f64);
    let weight = |i: usize| if i == 0 || i == nodes { 0.5 } else { 1.0 };
    let mut mean_r = 0.0;
    let mut excess = 0.0;
    for j in 0..=nodes {
        let r = j as f64 * hr;
        let f = r_density(n, r);
        if f == 0.0 {
            continue;
        }
        mean_r += weight(j) * r * f;
        let mut inner = 0.0;
        for i in 0..=nodes {
            let u = -q + i as f64 * hu;
            let s = eval_b(bf, u) + eval_b(bf, -u) - 2.0 * bf.z();
            inner += weight(i) * s * phi(r * u - psi);
        }
        // dx = r·du for x = r·u
        excess += weight(j) * r * r * inner * hu * f;
    }
    2.0 * bf.z() * mean_r * hr + excess * hr
}

/// Named checks of the estimator properties on `points`-point grids.
pub fn estimator_property_suite(points: usize) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    let taus = [0.3, 1.0, 1.96, 3.5];
    for kind in EstimatorKind::ALL {
        for &tau in &taus {
            let spec = EstimatorSpec::new(kind, tau).unwrap();
            let span = spec.outer_breakpoint() + 4.0;
            let h = 2.0 * span / (points - 1) as f64;
            let grid: Vec<f64> = (0..points).map(|i| -span + i as f64 * h).collect();
            let tag = |p: &str| format!("{kind} tau={tau}: {p}");

            let zero = grid.iter().filter(|x| x.abs() <= tau).all(|&x| psi_hat(&spec, x) == 0.0);
            out.push((tag("zero inside [-tau, tau]"), zero));

            let odd = grid.iter().all(|&x| psi_hat(&spec, -x) == -psi_hat(&spec, x));
            out.push((tag("odd symmetry"), odd));

            let shrink = grid.iter().all(|&x| {
                let v = psi_hat(&spec, x);
                v.abs() <= x.abs() && v * x >= 0.0
            });
            out.push((tag("shrinkage toward zero"), shrink));

            // Adjacent differences stay within a Lipschitz bound except at the hard-thresholding jumps.
            let lipschitz = match kind {
                EstimatorKind::Scad => (spec.scad_a - 1.0) / (spec.scad_a - 2.0),
                EstimatorKind::AdaptiveLasso => 2.0,
                _ => 1.0,
            };
            let mut jumps = Vec::new();
            for pair in grid.windows(2) {
                let d = (psi_hat(&spec, pair[1]) - psi_hat(&spec, pair[0])).abs();
                if d > lipschitz * h * (1.0 + 1e-9) + 1e-12 {
                    jumps.push((pair[0], pair[1], d));
                }
            }
            let structure = if kind.is_continuous() {
                jumps.is_empty()
            } else {
                jumps.len() == 2
                    && jumps.iter().all(|&(a, b, d)| a.abs().min(b.abs()) <= tau && a.abs().max(b.abs()) >= tau && (d - tau).abs() <= tau * 1e-9 + h)
            };
            out.push((tag(if kind.is_continuous() { "continuous" } else { "jumps of size tau at +-tau only" }), structure));

            let reduces = grid.iter().all(|&x| psi_tilde(&spec, x, 1.0) == psi_hat(&spec, x));
            out.push((tag("r = 1 reduces tilde to hat"), reduces));

            // Homogeneity: Ψ̃(x, r) = r·Ψ̂(x/r).
            let homog = grid.iter().all(|&x| {
                let r = 1.7;
                (psi_tilde(&spec, x, r) - r * psi_hat(&spec, x / r)).abs() <= 1e-12 * (1.0 + x.abs())
            });
            out.push((tag("tilde(x, r) = r hat(x / r)"), homog));
        }
    }
    out
}
