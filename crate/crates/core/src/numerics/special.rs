//! Normal, Student t and scaled-chi distribution functions.
//!
//! The complementary error function comes from `libm`; log-gamma, the inverse
//! error function and the regularized incomplete beta function come from
//! `statrs`. Quantiles without a closed form are obtained by bracketed
//! inversion of the corresponding CDF.

use std::f64::consts::{LN_2, SQRT_2};

use statrs::function::{beta::beta_reg, erf::erfc_inv, gamma::ln_gamma};

use super::roots::find_root_monotone;
use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x). Saturates to exactly 0 or 1 far in the tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Φ⁻¹(p) for p in (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // One Newton step against the CDF cleans up the last few ulps of the inverse erfc.
    let density = std_normal_pdf(x);
    if density > 1e-300 {
        let refined = x - (std_normal_cdf(x) - p) / density;
        if refined.is_finite() && (std_normal_cdf(refined) - p).abs() <= (std_normal_cdf(x) - p).abs() {
            return Ok(refined);
        }
    }
    Ok(x)
}

/// Two-sided normal critical value z with P(-z ≤ Z ≤ z) = 1 - alpha.
pub fn normal_critical_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    std_normal_quantile(1.0 - alpha / 2.0)
}

fn check_dof(m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("degrees of freedom must be at least 1"));
    }
    Ok(m as f64)
}

/// CDF of Student's t with `m` degrees of freedom.
pub fn student_t_cdf(m: u64, t: f64) -> Result<f64> {
    let dof = check_dof(m)?;
    if t.is_nan() {
        return Err(Error::domain("t must not be NaN"));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    // P(T ≤ -|t|) = I_{m/(m+t²)}(m/2, 1/2) / 2
    let x = dof / (dof + t * t);
    let lower_tail = 0.5 * beta_reg(dof / 2.0, 0.5, x);
    Ok(if t <= 0.0 { lower_tail } else { 1.0 - lower_tail })
}

/// Quantile of Student's t with `m` degrees of freedom.
pub fn student_t_quantile(m: u64, p: f64) -> Result<f64> {
    check_dof(m)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("t quantile needs 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let g = |t: f64| student_t_cdf(m, t).map(|c| c - p).unwrap_or(f64::NAN);
    // The t quantile is never closer to zero than the normal one.
    let start = std_normal_quantile(p)?.abs().max(1.0);
    let mut half_width = start;
    while g(half_width) < 0.0 || g(-half_width) > 0.0 {
        half_width *= 2.0;
        if !half_width.is_finite() {
            return Err(Error::domain(format!("could not bracket t quantile for m={m}, p={p}")));
        }
    }
    let tol = 1e-14 * half_width.max(1.0);
    find_root_monotone(g, -half_width, half_width, tol)
}

/// Two-sided t critical value t(m) with P(-t ≤ T ≤ t) = 1 - alpha.
pub fn t_critical_value(m: u64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    student_t_quantile(m, 1.0 - alpha / 2.0)
}

/// Remainder of Stirling's series: ln Γ(a) - [(a - ½) ln a - a + ln √(2π)].
fn stirling_remainder(a: f64) -> f64 {
    if a < 10.0 {
        return ln_gamma(a) - ((a - 0.5) * a.ln() - a + LN_SQRT_2PI);
    }
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0
        - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))))
}

/// E(R) for R = sqrt(χ²_ν / ν), i.e. sqrt(2/ν) Γ((ν+1)/2) / Γ(ν/2).
///
/// Written in terms of Stirling remainders so that the ratio stays accurate
/// for ν in the hundreds of millions.
pub fn chi_scaled_mean(nu: f64) -> f64 {
    let a = 0.5 * nu;
    let exponent = a * (0.5 / a).ln_1p() - 0.5 + stirling_remainder(a + 0.5) - stirling_remainder(a);
    exponent.exp()
}

/// Log-density of R = sqrt(χ²_ν / ν) at r > 0.
///
/// The ν-dependent constants are expanded with Stirling's series; the
/// remaining terms are arranged around r = 1 to avoid cancellation when ν is
/// large.
pub fn chi_scaled_ln_density(nu: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let a = 0.5 * nu;
    let d = r - 1.0;
    // ν/2 · (1 - r² + 2 ln r), computed in terms of d = r - 1
    let shape = a * (-d * (r + 1.0) + 2.0 * d.ln_1p());
    shape - r.ln() + LN_2 + 0.5 * a.ln() - LN_SQRT_2PI - stirling_remainder(a)
}

/// Density f_R of R = Σ̂/σ for a sample of size n, where (n-1) R² ~ χ²_{n-1}.
pub fn chi_scaled_density(n: u64, r: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("sample size must be at least 2, got {n}")));
    }
    if !(r > 0.0) {
        return Ok(0.0);
    }
    Ok(chi_scaled_ln_density((n - 1) as f64, r).exp())
}

/// Interval [r_lo, r_hi] outside which R carries probability below `2·tail`.
///
/// Uses the Laurent–Massart chi-square deviation bounds
/// P(χ² - ν ≥ 2√(νx) + 2x) ≤ e^{-x} and P(ν - χ² ≥ 2√(νx)) ≤ e^{-x},
/// which hold for every ν.
pub fn chi_scaled_support(nu: f64, tail: f64) -> (f64, f64) {
    let x = -tail.ln();
    let spread = 2.0 * (nu * x).sqrt();
    let lo_sq = (nu - spread) / nu;
    let hi_sq = (nu + spread + 2.0 * x) / nu;
    (lo_sq.max(0.0).sqrt(), hi_sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(40.0) - 1.0).abs() <= 1e-15);
        assert_eq!(std_normal_cdf(-40.0), 0.0);
        // erf oracle: Φ(1.959964) = 0.9750000217...
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn cdf_against_reference_values() {
        // 30-digit reference values of Φ
        let reference = [
            (-8.0, 6.220_960_574_271_784e-16),
            (-3.0, 0.001_349_898_031_630_094_5),
            (-1.0, 0.158_655_253_931_457_05),
            (-0.5, 0.308_537_538_725_986_9),
            (0.3, 0.617_911_422_188_952_6),
            (0.5, 0.691_462_461_274_013_1),
            (1.0, 0.841_344_746_068_542_9),
            (2.0, 0.977_249_868_051_820_8),
            (5.0, 0.999_999_713_348_428_1),
            (8.0, 0.999_999_999_999_999_4),
        ];
        for (x, p) in reference {
            assert!((std_normal_cdf(x) - p).abs() <= 1e-15, "x = {x}");
        }
        assert!((std_normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-14);
    }

    #[test]
    fn log_gamma_and_beta_against_reference_values() {
        let reference = [(0.5, 0.572_364_942_924_700_1), (4.5, 2.453_736_570_842_442_2), (10.5, 13.940_625_219_403_764), (100.25, 360.284_559_637_764_23)];
        for (a, v) in reference {
            assert!((ln_gamma(a) - v).abs() <= 1e-13 * v.abs().max(1.0), "a = {a}");
        }
        assert!((beta_reg(4.5, 0.5, 0.7) - 0.081_126_188_845_840_62).abs() < 1e-14);
    }

    #[test]
    fn cdf_reflection_and_monotone() {
        let mut prev = 0.0;
        for i in 0..=1600 {
            let x = -8.0 + i as f64 * 0.01;
            let c = std_normal_cdf(x);
            assert!((std_normal_cdf(-x) - (1.0 - c)).abs() <= 1e-14, "x = {x}");
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-5);
        assert!((std_normal_quantile(0.025).unwrap() + 1.959964).abs() < 1e-5);
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(std_normal_quantile(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn quantile_round_trip() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() <= 1e-10, "p = {p}");
        }
        for p in [1e-12, 1e-8, 1e-4, 1.0 - 1e-4, 1.0 - 1e-8] {
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() <= 1e-10);
        }
    }

    #[test]
    fn t_quantile_examples() {
        assert!((student_t_quantile(1, 0.75).unwrap() - 1.0).abs() < 1e-12);
        assert!((student_t_quantile(1_000_000, 0.975).unwrap() - 1.959964).abs() < 1e-3);
        assert!((student_t_quantile(9, 0.975).unwrap() - 2.262157).abs() < 1e-4);
        assert!(student_t_quantile(0, 0.5).is_err());
        assert!(student_t_quantile(3, 1.0).is_err());
    }

    #[test]
    fn t_round_trip() {
        for m in [1, 2, 5, 9, 30, 200] {
            for p in [0.001, 0.025, 0.3, 0.5, 0.8, 0.975, 0.999] {
                let t = student_t_quantile(m, p).unwrap();
                assert!((student_t_cdf(m, t).unwrap() - p).abs() <= 1e-9, "m={m} p={p}");
            }
        }
    }

    #[test]
    fn chi_mean_matches_log_gamma() {
        for nu in [1.0_f64, 2.0, 4.0, 9.0, 19.0, 49.0, 199.0, 999.0] {
            let a = nu / 2.0;
            let direct = (2.0 / nu).sqrt() * (ln_gamma(a + 0.5) - ln_gamma(a)).exp();
            assert!((chi_scaled_mean(nu) - direct).abs() < 1e-12, "nu = {nu}");
        }
    }

    #[test]
    fn chi_mean_large_nu_series() {
        // Γ(a+½)/Γ(a) = √a (1 - 1/(8a) + 1/(128a²) + 5/(1024a³) - 21/(32768a⁴) + ...)
        for nu in [1e4, 1e6, 1e8] {
            let a: f64 = nu / 2.0;
            let series = 1.0 - 1.0 / (8.0 * a) + 1.0 / (128.0 * a * a) + 5.0 / (1024.0 * a.powi(3))
                - 21.0 / (32768.0 * a.powi(4));
            assert!((chi_scaled_mean(nu) - series).abs() < 1e-14);
        }
    }

    #[test]
    fn density_matches_textbook_form() {
        for nu in [1.0_f64, 3.0, 9.0, 40.0] {
            for r in [0.1_f64, 0.7, 1.0, 1.3, 2.5] {
                let a = nu / 2.0;
                let ln = LN_2 + a * a.ln() - ln_gamma(a) + (nu - 1.0) * r.ln() - a * r * r;
                assert!((chi_scaled_ln_density(nu, r) - ln).abs() < 1e-11, "nu={nu} r={r}");
            }
        }
        assert!(chi_scaled_density(1, 1.0).is_err());
        assert_eq!(chi_scaled_density(5, 0.0).unwrap(), 0.0);
    }
}
