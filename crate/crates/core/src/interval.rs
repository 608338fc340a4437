//! The b-function interval family C* = [-b(-X), b(X)] with known variance.
//!
//! b(x) = x + z + e(x) where the excess e is piecewise linear on a knot grid
//! spanning [-q, q] and zero outside it. Because b is strictly increasing,
//!
//!   ψ ≤ b(X)      ⇔  X ≥ b⁻¹(ψ)
//!   -b(-X) ≤ ψ    ⇔  X ≤ -b⁻¹(-ψ)
//!
//! so for X ~ N(ψ, 1) the coverage is Φ(-b⁻¹(-ψ) - ψ) - Φ(b⁻¹(ψ) - ψ), which
//! is computed here as 1 - Φ(ψ + b⁻¹(-ψ)) - Φ(b⁻¹(ψ) - ψ) to keep the digits
//! near 1 - α.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_with_breaks, normal_critical_value, std_normal_cdf, std_normal_pdf, QuadratureConfig};
use crate::table::{Cell, Table};

pub const DEFAULT_Q: f64 = 6.0;
pub const DEFAULT_KNOT_COUNT: usize = 81;
pub const DEFAULT_LIPSCHITZ_L: f64 = 5.0;
/// Every segment slope of e must exceed -1 + SLOPE_MARGIN so that b is strictly increasing.
pub const SLOPE_MARGIN: f64 = 1e-9;
/// Half-width beyond which φ(x - ψ) is treated as zero in length integrals.
pub const GAUSS_TRUNCATION: f64 = 8.3;

/// On-disk form of a [`BFunction`]. `z` is not stored; it is recomputed from `alpha`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BFunctionDoc {
    alpha: f64,
    w: Option<f64>,
    q: f64,
    #[serde(rename = "lipschitz_L")]
    lipschitz_l: f64,
    knots: Vec<f64>,
    e_values: Vec<f64>,
}

/// A validated b-function. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BFunctionDoc", into = "BFunctionDoc")]
pub struct BFunction {
    alpha: f64,
    z: f64,
    w: Option<f64>,
    q: f64,
    lipschitz_l: f64,
    knots: Vec<f64>,
    e_values: Vec<f64>,
    // b at each knot, strictly increasing
    b_knots: Vec<f64>,
}

impl TryFrom<BFunctionDoc> for BFunction {
    type Error = Error;

    fn try_from(d: BFunctionDoc) -> Result<Self> {
        BFunction::new(d.alpha, d.w, d.q, d.lipschitz_l, d.knots, d.e_values)
    }
}

impl From<BFunction> for BFunctionDoc {
    fn from(b: BFunction) -> Self {
        BFunctionDoc {
            alpha: b.alpha,
            w: b.w,
            q: b.q,
            lipschitz_l: b.lipschitz_l,
            knots: b.knots,
            e_values: b.e_values,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidBFunction(msg.into())
}

impl BFunction {
    /// Builds and validates a b-function. `w` records the solver weight (None for
    /// intervals that did not come from the solver).
    pub fn new(
        alpha: f64,
        w: Option<f64>,
        q: f64,
        lipschitz_l: f64,
        knots: Vec<f64>,
        e_values: Vec<f64>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if let Some(w) = w {
            if !(0.0..=1.0).contains(&w) {
                return Err(invalid(format!("w must lie in [0, 1], got {w}")));
            }
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid(format!("q must be positive and finite, got {q}")));
        }
        if !(lipschitz_l > 0.0 && lipschitz_l.is_finite()) {
            return Err(invalid(format!("lipschitz_L must be positive and finite, got {lipschitz_l}")));
        }
        if knots.len() < 2 || knots.len() != e_values.len() {
            return Err(invalid(format!(
                "need at least two knots and one e value per knot (got {} knots, {} values)",
                knots.len(),
                e_values.len()
            )));
        }
        if knots.iter().chain(&e_values).any(|v| !v.is_finite()) {
            return Err(invalid("knots and e values must be finite"));
        }
        if knots.windows(2).any(|p| p[1] <= p[0]) {
            return Err(invalid("knots must be strictly increasing"));
        }
        let end_tol = 1e-12 * q;
        if (knots[0] + q).abs() > end_tol || (knots[knots.len() - 1] - q).abs() > end_tol {
            return Err(invalid(format!(
                "knots must span [-q, q] = [{}, {q}], got [{}, {}]",
                -q,
                knots[0],
                knots[knots.len() - 1]
            )));
        }
        if e_values[0] != 0.0 || e_values[e_values.len() - 1] != 0.0 {
            return Err(invalid("e must vanish at -q and q"));
        }
        for (i, (x, e)) in knots.windows(2).zip(e_values.windows(2)).enumerate() {
            let slope = (e[1] - e[0]) / (x[1] - x[0]);
            if !(slope > -1.0 + SLOPE_MARGIN) {
                return Err(invalid(format!(
                    "b is not strictly increasing on segment {i} [{}, {}]: slope of e is {slope}",
                    x[0], x[1]
                )));
            }
            if slope.abs() > lipschitz_l * (1.0 + 1e-12) {
                return Err(invalid(format!(
                    "slope {slope} of e on segment {i} exceeds lipschitz_L = {lipschitz_l}"
                )));
            }
        }
        let z = normal_critical_value(alpha)?;
        let mut bf = BFunction { alpha, z, w, q, lipschitz_l, knots, e_values, b_knots: Vec::new() };
        // e(x) + e(-x) is linear between consecutive points of knots ∪ (-knots),
        // so checking those points covers every x.
        for &x in bf.knots.iter() {
            let s = bf.eval_e(x) + bf.eval_e(-x);
            if s < -2.0 * bf.z {
                return Err(invalid(format!(
                    "interval is empty near x = {x}: e(x) + e(-x) = {s} < -2z = {}",
                    -2.0 * bf.z
                )));
            }
        }
        bf.b_knots = bf.knots.iter().zip(&bf.e_values).map(|(&x, &e)| x + bf.z + e).collect();
        if bf.b_knots.windows(2).any(|p| p[1] <= p[0]) {
            return Err(invalid("b is not strictly increasing at knot resolution"));
        }
        Ok(bf)
    }

    /// Equally spaced knots on [-q, q], exactly symmetric about 0 (knot i is -knot(n-1-i)).
    pub fn uniform_knots(q: f64, knot_count: usize) -> Vec<f64> {
        assert!(knot_count >= 2, "need at least two knots");
        let last = knot_count - 1;
        let mut knots = vec![0.0; knot_count];
        for i in 0..knot_count / 2 {
            let x = -q + 2.0 * q * i as f64 / last as f64;
            knots[i] = x;
            knots[last - i] = -x;
        }
        knots
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("b-function serialization cannot fail")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn w(&self) -> Option<f64> {
        self.w
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lipschitz_l(&self) -> f64 {
        self.lipschitz_l
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn e_values(&self) -> &[f64] {
        &self.e_values
    }

    /// b evaluated at the knots; strictly increasing.
    pub fn b_at_knots(&self) -> &[f64] {
        &self.b_knots
    }

    /// Index i of the segment [knots[i], knots[i+1]) containing x, if x ∈ [-q, q).
    pub fn segment(&self, x: f64) -> Option<usize> {
        if !(x >= self.knots[0] && x < self.knots[self.knots.len() - 1]) {
            return None;
        }
        Some(self.knots.partition_point(|&k| k <= x) - 1)
    }

    /// Piecewise-linear excess e(x); zero outside [-q, q].
    pub fn eval_e(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x == self.knots[n - 1] {
            return self.e_values[n - 1];
        }
        match self.segment(x) {
            None => 0.0,
            Some(i) => {
                let (x0, x1) = (self.knots[i], self.knots[i + 1]);
                let (e0, e1) = (self.e_values[i], self.e_values[i + 1]);
                let t = (x - x0) / (x1 - x0);
                e0 + t * (e1 - e0)
            }
        }
    }

    /// Right derivative of e at x (0 outside [-q, q)).
    pub fn excess_slope(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(i) => (self.e_values[i + 1] - self.e_values[i]) / (self.knots[i + 1] - self.knots[i]),
        }
    }

    /// The hat basis function of knot k evaluated at x.
    pub fn hat(&self, k: usize, x: f64) -> f64 {
        let n = self.knots.len();
        let xk = self.knots[k];
        if k > 0 && x > self.knots[k - 1] && x <= xk {
            return (x - self.knots[k - 1]) / (xk - self.knots[k - 1]);
        }
        if k + 1 < n && x > xk && x < self.knots[k + 1] {
            return (self.knots[k + 1] - x) / (self.knots[k + 1] - xk);
        }
        if x == xk {
            1.0
        } else {
            0.0
        }
    }

    /// The interval with e replaced by x ↦ e(-x).
    pub fn reflected(&self) -> BFunction {
        let knots: Vec<f64> = self.knots.iter().rev().map(|&x| -x).collect();
        let e_values: Vec<f64> = self.e_values.iter().rev().copied().collect();
        BFunction::new(self.alpha, self.w, self.q, self.lipschitz_l, knots, e_values)
            .expect("reflection preserves every b-function invariant")
    }

    /// True when e(x) = e(-x) on the knot grid to within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.knots.iter().all(|&x| (self.eval_e(x) - self.eval_e(-x)).abs() <= tol)
    }

    /// ∫ e(x) N(x; mean, sd²) dx, exactly (e is piecewise linear).
    pub fn excess_gaussian_integral(&self, mean: f64, sd: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.knots.len() - 1 {
            let (a, b) = (self.knots[i], self.knots[i + 1]);
            let (ea, eb) = (self.e_values[i], self.e_values[i + 1]);
            let (m0, m1) = gaussian_linear_moments(a, b, mean, sd);
            // e(x) = ea + (eb - ea)(x - a)/(b - a)
            let slope = (eb - ea) / (b - a);
            total += (ea - slope * a) * m0 + slope * m1;
        }
        total
    }

    /// ∫ hat_k(x) N(x; mean, sd²) dx, exactly.
    pub fn hat_gaussian_integral(&self, k: usize, mean: f64, sd: f64) -> f64 {
        let mut total = 0.0;
        if k > 0 {
            let (a, b) = (self.knots[k - 1], self.knots[k]);
            let (m0, m1) = gaussian_linear_moments(a, b, mean, sd);
            total += (m1 - a * m0) / (b - a);
        }
        if k + 1 < self.knots.len() {
            let (a, b) = (self.knots[k], self.knots[k + 1]);
            let (m0, m1) = gaussian_linear_moments(a, b, mean, sd);
            total += (b * m0 - m1) / (b - a);
        }
        total
    }

    /// Points where e(x) + e(-x) may have a kink, sorted and deduplicated.
    pub(crate) fn symmetric_breaks(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.knots.iter().flat_map(|&x| [x, -x]).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// (∫_a^b N(x; μ, σ²) dx, ∫_a^b x N(x; μ, σ²) dx).
fn gaussian_linear_moments(a: f64, b: f64, mu: f64, sd: f64) -> (f64, f64) {
    let (ua, ub) = ((a - mu) / sd, (b - mu) / sd);
    // Difference of CDFs taken on the side where it does not cancel.
    let mass = if ua > 0.0 {
        std_normal_cdf(-ua) - std_normal_cdf(-ub)
    } else {
        std_normal_cdf(ub) - std_normal_cdf(ua)
    };
    let first = mu * mass + sd * (std_normal_pdf(ua) - std_normal_pdf(ub));
    (mass, first)
}

/// The standard interval [X - z, X + z]: e ≡ 0 on two knots at ±q.
pub fn standard_b(alpha: f64) -> Result<BFunction> {
    BFunction::new(alpha, None, DEFAULT_Q, DEFAULT_LIPSCHITZ_L, vec![-DEFAULT_Q, DEFAULT_Q], vec![0.0, 0.0])
}

pub fn eval_b(bf: &BFunction, x: f64) -> f64 {
    x + bf.z + bf.eval_e(x)
}

/// b⁻¹(y). Exact: b is affine on each knot segment and equal to x + z outside [-q, q].
pub fn inverse_b(bf: &BFunction, y: f64) -> f64 {
    let bk = &bf.b_knots;
    let n = bk.len();
    if y <= bk[0] || y >= bk[n - 1] {
        return y - bf.z;
    }
    let i = bk.partition_point(|&v| v <= y) - 1;
    let (x0, x1) = (bf.knots[i], bf.knots[i + 1]);
    let t = (y - bk[i]) / (bk[i + 1] - bk[i]);
    x0 + t * (x1 - x0)
}

/// P_ψ(ψ ∈ [-b(-X), b(X)]) for X ~ N(ψ, 1).
pub fn coverage_known(bf: &BFunction, psi: f64) -> f64 {
    let lo = inverse_b(bf, psi);
    let hi = -inverse_b(bf, -psi);
    if lo > hi {
        return 0.0;
    }
    (1.0 - std_normal_cdf(psi - hi) - std_normal_cdf(lo - psi)).max(0.0)
}

/// E_ψ(length of C*) = 2z + ∫ (e(x) + e(-x)) φ(x - ψ) dx.
pub fn expected_length_known(bf: &BFunction, psi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let lo = (-bf.q).max(psi - GAUSS_TRUNCATION);
    let hi = bf.q.min(psi + GAUSS_TRUNCATION);
    if lo >= hi {
        return Ok(2.0 * bf.z);
    }
    let mut points = vec![lo];
    points.extend(bf.symmetric_breaks().into_iter().filter(|&p| p > lo && p < hi));
    points.push(hi);
    let excess = integrate_with_breaks(|x| (bf.eval_e(x) + bf.eval_e(-x)) * std_normal_pdf(x - psi), &points, cfg)?;
    Ok(2.0 * bf.z + excess)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord {
    pub psi: f64,
    pub coverage: f64,
    pub expected_length: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub records: Vec<EfficiencyRecord>,
}

impl EfficiencyCurve {
    pub fn max_efficiency(&self) -> Option<&EfficiencyRecord> {
        self.records.iter().max_by(|a, b| a.efficiency.total_cmp(&b.efficiency))
    }

    pub fn min_coverage(&self) -> Option<&EfficiencyRecord> {
        self.records.iter().min_by(|a, b| a.coverage.total_cmp(&b.coverage))
    }

    pub fn at(&self, psi: f64) -> Option<&EfficiencyRecord> {
        self.records.iter().find(|r| r.psi == psi)
    }

    /// CSV with header `psi,coverage,length,efficiency`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["psi", "coverage", "length", "efficiency"]);
        for r in &self.records {
            t.push(vec![Cell::Real(r.psi), Cell::Real(r.coverage), Cell::Real(r.expected_length), Cell::Real(r.efficiency)]);
        }
        t
    }
}

fn check_grid(psi_grid: &[f64]) -> Result<()> {
    if psi_grid.is_empty() {
        return Err(Error::domain("psi grid must be nonempty"));
    }
    if psi_grid.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("psi grid entries must be finite"));
    }
    Ok(())
}

/// Coverage, expected length and relative efficiency (length / 2z)² along `psi_grid`.
pub fn efficiency_known(bf: &BFunction, psi_grid: &[f64]) -> Result<EfficiencyCurve> {
    efficiency_known_with(bf, psi_grid, &QuadratureConfig::default())
}

pub fn efficiency_known_with(bf: &BFunction, psi_grid: &[f64], cfg: &QuadratureConfig) -> Result<EfficiencyCurve> {
    check_grid(psi_grid)?;
    let two_z = 2.0 * bf.z;
    let records = psi_grid
        .par_iter()
        .map(|&psi| {
            let expected_length = expected_length_known(bf, psi, cfg)?;
            Ok(EfficiencyRecord {
                psi,
                coverage: coverage_known(bf, psi),
                expected_length,
                efficiency: (expected_length / two_z).powi(2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EfficiencyCurve { records })
}

/// `start, start + step, …` up to and including `end` (within rounding).
pub fn linear_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && end.is_finite() && end >= start) {
        return Err(Error::domain(format!("invalid grid start={start} end={end} step={step}")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Z: f64 = 1.959_963_984_540_054;

    /// e(0) = -0.3 on knots {-2, 0, 2}.
    fn single_knot() -> BFunction {
        BFunction::new(0.05, None, 2.0, 5.0, vec![-2.0, 0.0, 2.0], vec![0.0, -0.3, 0.0]).unwrap()
    }

    fn wavy() -> BFunction {
        let knots = BFunction::uniform_knots(6.0, 25);
        let e = knots.iter().map(|&x: &f64| (1.0 - (x / 6.0).powi(2)) * (0.25 * (0.9 * x).sin() - 0.15)).collect();
        BFunction::new(0.05, Some(0.3), 6.0, 5.0, knots, e).unwrap()
    }

    #[test]
    fn standard_examples() {
        let bf = standard_b(0.05).unwrap();
        assert!((eval_b(&bf, 0.0) - 1.959964).abs() < 1e-5);
        assert_eq!(eval_b(&bf, 1.0), 1.0 + bf.z());
        for x in [-7.0, -1.3, 0.0, 2.2, 9.0] {
            assert!((eval_b(&bf, x) - eval_b(&bf, -x) - 2.0 * x).abs() < 1e-14);
            assert!((inverse_b(&bf, x) - (x - bf.z())).abs() < 1e-14);
        }
        for psi in [-8.0, -0.5, 0.0, 3.0, 20.0] {
            assert!((coverage_known(&bf, psi) - 0.95).abs() < 1e-10);
        }
        let cfg = QuadratureConfig::default();
        assert_eq!(expected_length_known(&bf, 0.7, &cfg).unwrap(), 2.0 * bf.z());
    }

    #[test]
    fn single_knot_examples() {
        let bf = single_knot();
        assert!((eval_b(&bf, 1.0) - (1.0 + Z - 0.15)).abs() < 1e-12);
        assert!((inverse_b(&bf, 1.0 + Z - 0.15) - 1.0).abs() < 1e-9);
        assert_eq!(eval_b(&bf, 7.0), 7.0 + bf.z());
    }

    #[test]
    fn single_knot_length_against_trapezoid() {
        let bf = single_knot();
        let got = expected_length_known(&bf, 0.0, &QuadratureConfig::default()).unwrap();
        let n = 1_000_000;
        let h = 4.0 / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let x = -2.0 + i as f64 * h;
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += wgt * bf.eval_e(x) * std_normal_pdf(x);
        }
        let oracle = 2.0 * bf.z() + 2.0 * s * h;
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn quadrature_matches_closed_form_length() {
        let bf = wavy();
        let cfg = QuadratureConfig::default();
        for psi in [-7.0, -2.5, 0.0, 0.3, 1.7, 4.0, 9.0] {
            let quad = expected_length_known(&bf, psi, &cfg).unwrap();
            let exact = 2.0 * bf.z() + bf.excess_gaussian_integral(psi, 1.0) + bf.excess_gaussian_integral(-psi, 1.0);
            assert!((quad - exact).abs() < 1e-12, "psi={psi}: {quad} vs {exact}");
        }
    }

    #[test]
    fn hat_integrals_sum_to_excess_integral() {
        let bf = wavy();
        for (mean, sd) in [(0.0, 1.0), (1.3, 4.1), (-3.0, 0.5)] {
            let via_hats: f64 = (0..bf.knots().len()).map(|k| bf.e_values()[k] * bf.hat_gaussian_integral(k, mean, sd)).sum();
            assert!((via_hats - bf.excess_gaussian_integral(mean, sd)).abs() < 1e-14);
        }
    }

    #[test]
    fn tails_are_standard() {
        let bf = wavy();
        let curve = efficiency_known(&bf, &[-15.0, -bf.q() - 9.0, bf.q() + 9.0, 40.0]).unwrap();
        for r in &curve.records {
            assert!((r.efficiency - 1.0).abs() <= 1e-10);
            assert!((r.expected_length - 2.0 * bf.z()).abs() <= 1e-12);
        }
    }

    #[test]
    fn coverage_against_indicator_quadrature() {
        let bf = wavy();
        let cfg = QuadratureConfig::default();
        for psi in [-3.0, -0.4, 0.0, 1.0, 2.5, 5.0] {
            let lo = inverse_b(&bf, psi);
            let hi = -inverse_b(&bf, -psi);
            // Integrate the indicator directly, but away from where it switches.
            let f = |x: f64| {
                let inside = -eval_b(&bf, -x) <= psi && psi <= eval_b(&bf, x);
                if inside { std_normal_pdf(x - psi) } else { 0.0 }
            };
            let direct = crate::numerics::integrate_with_breaks(f, &[psi - 12.0, lo, hi, psi + 12.0], &cfg).unwrap();
            assert!((direct - coverage_known(&bf, psi)).abs() < 1e-7, "psi={psi}");
        }
    }

    #[test]
    fn symmetric_coverage_is_even() {
        let knots = BFunction::uniform_knots(6.0, 13);
        let e: Vec<f64> = knots.iter().map(|&x: &f64| 0.05 * (36.0 - x * x) * (x * 0.7).cos().abs() * 0.1).collect();
        let mut e = e;
        let n = e.len();
        e[0] = 0.0;
        e[n - 1] = 0.0;
        let bf = BFunction::new(0.05, None, 6.0, 5.0, knots, e).unwrap();
        assert!(bf.is_symmetric(1e-15));
        for psi in [0.1, 0.9, 2.0, 4.4, 7.0] {
            assert!((coverage_known(&bf, psi) - coverage_known(&bf, -psi)).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_reflects_efficiency() {
        let bf = wavy();
        let rf = bf.reflected();
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.37).collect();
        let neg: Vec<f64> = grid.iter().map(|p| -p).collect();
        let a = efficiency_known(&bf, &grid).unwrap();
        let b = efficiency_known(&rf, &neg).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert!((x.efficiency - y.efficiency).abs() < 1e-12);
        }
        // The length integrand e(x) + e(-x) is even, so the curve itself is even.
        let c = efficiency_known(&bf, &neg).unwrap();
        for (x, y) in a.records.iter().zip(&c.records) {
            assert!((x.efficiency - y.efficiency).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_rejects_violations() {
        let q = 2.0;
        let knots = vec![-2.0, 0.0, 2.0];
        // empty interval at x = 0: e(0) + e(-0) < -2z
        let bad = BFunction::new(0.05, None, q, 5.0, knots.clone(), vec![0.0, -Z - 0.05, 0.0]);
        assert!(matches!(bad, Err(Error::InvalidBFunction(_))));
        // slope -1 on a segment
        let bad = BFunction::new(0.05, None, q, 5.0, knots.clone(), vec![0.0, -2.0, 0.0]);
        assert!(bad.is_err());
        // Lipschitz bound
        let bad = BFunction::new(0.05, None, q, 0.1, knots.clone(), vec![0.0, 0.3, 0.0]);
        assert!(bad.is_err());
        // nonzero end value
        assert!(BFunction::new(0.05, None, q, 5.0, knots.clone(), vec![0.1, 0.3, 0.0]).is_err());
        // knots not spanning [-q, q]
        assert!(BFunction::new(0.05, None, 3.0, 5.0, knots.clone(), vec![0.0, 0.3, 0.0]).is_err());
        assert!(BFunction::new(1.0, None, q, 5.0, knots, vec![0.0, 0.3, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip_and_revalidation() {
        let bf = wavy();
        let text = bf.to_json();
        assert!(text.contains("\"lipschitz_L\""));
        assert!(!text.contains("\"z\""));
        let back = BFunction::from_json(&text).unwrap();
        assert_eq!(back, bf);
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["e_values"][12] = serde_json::json!(-5.0);
        assert!(BFunction::from_json(&doc.to_string()).is_err());
        let std = standard_b(0.05).unwrap().to_json();
        assert!(std.contains("\"w\": null"));
    }

    #[test]
    fn grid_helper() {
        let g = linear_grid(0.0, 8.0, 0.05).unwrap();
        assert_eq!(g.len(), 161);
        assert!((g[160] - 8.0).abs() < 1e-12);
        assert!(linear_grid(0.0, 1.0, 0.0).is_err());
        assert!(efficiency_known(&wavy(), &[]).is_err());
    }

    fn arbitrary_bf() -> impl Strategy<Value = BFunction> {
        (3usize..30, 1.0f64..8.0, prop::collection::vec(-0.3f64..0.6, 30)).prop_map(|(k, q, raw)| {
            let knots = BFunction::uniform_knots(q, k);
            let mut e: Vec<f64> = raw[..k].to_vec();
            e[0] = 0.0;
            e[k - 1] = 0.0;
            // Shrink toward zero until every slope lies in [-0.8, 0.8].
            let h = 2.0 * q / (k - 1) as f64;
            let steepest = e.windows(2).map(|p| (p[1] - p[0]).abs() / h).fold(0.0, f64::max);
            let scale = if steepest > 0.8 { 0.8 / steepest } else { 1.0 };
            for v in e.iter_mut() {
                *v *= scale;
            }
            BFunction::new(0.05, None, q, 5.0, knots, e).unwrap()
        })
    }

    proptest! {
        #[test]
        fn inverse_round_trip(bf in arbitrary_bf(), y in -30.0f64..30.0) {
            let x = inverse_b(&bf, y);
            prop_assert!((eval_b(&bf, x) - y).abs() <= 1e-10);
        }

        #[test]
        fn interval_is_never_inverted(bf in arbitrary_bf(), x in -15.0f64..15.0) {
            prop_assert!(eval_b(&bf, x) >= -eval_b(&bf, -x) - 1e-12);
        }

        #[test]
        fn coverage_is_a_probability(bf in arbitrary_bf(), psi in -15.0f64..15.0) {
            let c = coverage_known(&bf, psi);
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
