//! Construction of a b-function by constrained minimization of a weighted
//! expected length.
//!
//! The excess e is symmetric, so the unknowns are its values at the knots in
//! [0, q). The objective
//!
//!   J(e) = (1 - w)·ℓ(0) + w·E[ℓ(ψ)],  ψ ~ N(0, s²)
//!
//! is linear in e: for symmetric e, ℓ(ψ) = 2z + 2∫ e(x) φ(x - ψ) dx, and
//! averaging φ(x - ψ) over ψ gives the N(0, 1 + s²) density. Every hat
//! function therefore contributes a closed-form Gaussian integral.
//!
//! The constraints are coverage ≥ 1 - α on a ψ grid (nonlinear, smooth
//! between knot crossings) plus linear bounds on the segment slopes and on e
//! itself. They are handled by a line-search SQP with damped BFGS curvature
//! and an ℓ1 merit function with per-point penalties. Each QP subproblem
//! carries one elastic variable that absorbs linearized coverage violation,
//! so the subproblem is always feasible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{
    coverage_known, inverse_b, linear_grid, BFunction, DEFAULT_KNOT_COUNT, DEFAULT_LIPSCHITZ_L, DEFAULT_Q,
};
use crate::numerics::{normal_critical_value, std_normal_pdf};
use crate::table::{Cell, Table};

/// Slopes of e kept within ±(1 - SOLVER_SLOPE_MARGIN) so that b⁻¹ stays well conditioned.
const SOLVER_SLOPE_MARGIN: f64 = 1e-3;
/// Coverage violations on the audit grid larger than this trigger a re-solve on a denser grid.
pub const AUDIT_SLACK: f64 = 1e-3;
const MAX_DENSIFY_ROUNDS: usize = 3;
/// Box bound on each QP step.
const STEP_BOUND: f64 = 1.0;
/// Per-unit cost of the elastic variable in the QP subproblem.
const ELASTIC_COST: f64 = 1e4;
const LINE_SEARCH_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub w: f64,
    pub alpha: f64,
    pub q: f64,
    pub knot_count: usize,
    /// ψ values (≥ 0) where coverage is constrained; symmetry covers ψ < 0.
    pub psi_constraint_grid: Vec<f64>,
    /// Standard deviation of the diffuse weight component.
    pub spread_scale: f64,
    pub max_iterations: usize,
    /// Allowed coverage shortfall at a converged solution.
    pub constraint_tol: f64,
    pub lipschitz_l: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            w: 0.1,
            alpha: 0.05,
            q: DEFAULT_Q,
            knot_count: DEFAULT_KNOT_COUNT,
            psi_constraint_grid: default_constraint_grid(DEFAULT_Q),
            spread_scale: 4.0,
            max_iterations: 500,
            constraint_tol: 1e-7,
            lipschitz_l: DEFAULT_LIPSCHITZ_L,
        }
    }
}

/// [0, q + 4] with spacing 0.05.
pub fn default_constraint_grid(q: f64) -> Vec<f64> {
    linear_grid(0.0, q + 4.0, 0.05).expect("q is positive")
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if !(0.0..=1.0).contains(&self.w) {
            return bad(format!("w must lie in [0, 1], got {}", self.w));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return bad(format!("q must be positive, got {}", self.q));
        }
        if self.knot_count < 3 {
            return bad(format!("knot_count must be at least 3, got {}", self.knot_count));
        }
        if !(self.spread_scale > 0.0 && self.spread_scale.is_finite()) {
            return bad(format!("spread_scale must be positive, got {}", self.spread_scale));
        }
        if !(self.lipschitz_l > 0.0 && self.lipschitz_l.is_finite()) {
            return bad(format!("lipschitz_L must be positive, got {}", self.lipschitz_l));
        }
        if !(self.constraint_tol >= 0.0) {
            return bad(format!("constraint_tol must be nonnegative, got {}", self.constraint_tol));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        let grid = &self.psi_constraint_grid;
        if grid.is_empty() || grid.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("psi_constraint_grid must be nonempty, finite and nonnegative".into());
        }
        let mut sorted = grid.clone();
        sorted.sort_by(f64::total_cmp);
        let needed = self.q + 4.0;
        let gaps_ok = sorted.windows(2).all(|p| p[1] - p[0] <= 0.1 + 1e-12);
        if sorted[0] > 1e-12 || sorted[sorted.len() - 1] < needed - 1e-9 || !gaps_ok {
            return bad(format!("psi_constraint_grid must cover [0, {needed}] with spacing at most 0.1"));
        }
        Ok(())
    }

    fn grid_spacing(&self) -> f64 {
        let mut sorted = self.psi_constraint_grid.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).map(|p| p[1] - p[0]).fold(0.1, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Densification round (0 for the initial constraint grid).
    pub round: usize,
    pub iteration: usize,
    pub objective: f64,
    pub max_violation: f64,
    /// Accepted line-search fraction of the QP step (0 when rejected).
    pub step_length: f64,
    pub step_norm: f64,
    pub accepted: bool,
}

pub fn solve_log_table(log: &[IterationRecord]) -> Table {
    let mut t =
        Table::new(&["round", "iteration", "objective", "max_violation", "step_length", "step_norm", "accepted"]);
    for r in log {
        t.push(vec![
            Cell::Int(r.round as u64),
            Cell::Int(r.iteration as u64),
            Cell::Real(r.objective),
            Cell::Real(r.max_violation),
            Cell::Real(r.step_length),
            Cell::Real(r.step_norm),
            Cell::Int(r.accepted as u64),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageAudit {
    pub min_coverage: f64,
    pub argmin_psi: f64,
    /// 1 - α - AUDIT_SLACK.
    pub threshold: f64,
    pub pass: bool,
}

/// Minimum coverage over `fine_grid`, judged against 1 - α - 1e-3.
pub fn audit_coverage(bf: &BFunction, alpha: f64, fine_grid: &[f64]) -> Result<CoverageAudit> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if fine_grid.is_empty() || fine_grid.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("audit grid must be nonempty and finite"));
    }
    let (argmin_psi, min_coverage) = fine_grid
        .iter()
        .map(|&p| (p, coverage_known(bf, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is nonempty");
    let threshold = 1.0 - alpha - AUDIT_SLACK;
    Ok(CoverageAudit { min_coverage, argmin_psi, threshold, pass: min_coverage >= threshold })
}

/// [0, q + 9] with spacing min(0.02, h/2), where h is the constraint-grid spacing.
pub fn default_audit_grid(q: f64, constraint_spacing: f64) -> Vec<f64> {
    linear_grid(0.0, q + 9.0, (0.5 * constraint_spacing).min(0.02)).expect("q is positive")
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub bf: BFunction,
    pub log: Vec<IterationRecord>,
    pub audit: CoverageAudit,
    /// Number of densification rounds performed after the first solve.
    pub densify_rounds: usize,
}

/// Solves for b and returns only the interval.
pub fn solve_b(cfg: &SolverConfig) -> Result<BFunction> {
    solve_b_detailed(cfg).map(|o| o.bf)
}

pub fn solve_b_detailed(cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let problem = Problem::new(cfg)?;
    let mut grid = cfg.psi_constraint_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let audit_grid = default_audit_grid(cfg.q, cfg.grid_spacing());

    let mut theta = vec![0.0; problem.params.len()];
    let mut log = Vec::new();
    let mut round = 0;
    loop {
        theta = problem.sqp(&theta, &grid, round, &mut log)?;
        let bf = problem.bfunction(&theta)?;
        let audit = audit_coverage(&bf, cfg.alpha, &audit_grid)?;
        if audit.pass || round == MAX_DENSIFY_ROUNDS {
            if !audit.pass {
                return Err(Error::Solver {
                    message: format!(
                        "coverage {} at psi = {} still below {} after {MAX_DENSIFY_ROUNDS} densification rounds",
                        audit.min_coverage, audit.argmin_psi, audit.threshold
                    ),
                    log,
                });
            }
            return Ok(SolveOutcome { bf, log, audit, densify_rounds: round });
        }
        // Halve the spacing and add the worst audit points.
        let target = 1.0 - cfg.alpha - cfg.constraint_tol;
        let mut denser: Vec<f64> = grid.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        denser.extend(audit_grid.iter().copied().filter(|&p| coverage_known(&bf, p) < target));
        grid.extend(denser);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        round += 1;
    }
}

/// Fixed data of one solve: parameterization, objective weights, linear constraints.
struct Problem {
    alpha: f64,
    w: Option<f64>,
    q: f64,
    z: f64,
    lipschitz_l: f64,
    knots: Vec<f64>,
    /// Knot indices carrying a free value: knots in [0, q). Knot i is mirrored at n-1-i.
    params: Vec<usize>,
    /// Position of each knot's value in the parameter vector, if free.
    param_of: Vec<Option<usize>>,
    /// ∂J/∂θ, constant.
    gradient: Vec<f64>,
    constant: f64,
    /// Segment slopes of e on [0, q] as linear functionals of θ.
    slopes: Vec<Vec<f64>>,
    max_slope: f64,
    max_iterations: usize,
    constraint_tol: f64,
}

impl Problem {
    fn new(cfg: &SolverConfig) -> Result<Self> {
        let z = normal_critical_value(cfg.alpha)?;
        let knots = BFunction::uniform_knots(cfg.q, cfg.knot_count);
        let n = knots.len();
        let params: Vec<usize> = (0..n - 1).filter(|&i| n - 1 - i <= i).collect();
        let mut param_of = vec![None; n];
        for (j, &i) in params.iter().enumerate() {
            param_of[i] = Some(j);
            param_of[n - 1 - i] = Some(j);
        }
        // A zero template supplies the hat integrals.
        let template = BFunction::new(cfg.alpha, None, cfg.q, cfg.lipschitz_l, knots.clone(), vec![0.0; n])?;
        let wide = (1.0 + cfg.spread_scale * cfg.spread_scale).sqrt();
        let mut gradient = vec![0.0; params.len()];
        for k in 1..n - 1 {
            let weight = (1.0 - cfg.w) * template.hat_gaussian_integral(k, 0.0, 1.0)
                + cfg.w * template.hat_gaussian_integral(k, 0.0, wide);
            gradient[param_of[k].expect("interior knots are parameters")] += 2.0 * weight;
        }
        let mut slopes = Vec::new();
        for &i in &params {
            let h = knots[i + 1] - knots[i];
            let mut row = vec![0.0; params.len()];
            if let Some(j) = param_of[i + 1].filter(|_| i + 1 < n - 1) {
                row[j] += 1.0 / h;
            }
            row[param_of[i].unwrap()] -= 1.0 / h;
            slopes.push(row);
        }
        Ok(Problem {
            alpha: cfg.alpha,
            w: Some(cfg.w),
            q: cfg.q,
            z,
            lipschitz_l: cfg.lipschitz_l,
            knots,
            params,
            param_of,
            gradient,
            constant: 2.0 * z,
            slopes,
            max_slope: (1.0 - SOLVER_SLOPE_MARGIN).min(cfg.lipschitz_l),
            max_iterations: cfg.max_iterations,
            constraint_tol: cfg.constraint_tol,
        })
    }

    fn e_values(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.knots.len();
        (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.0 } else { theta[self.param_of[i].unwrap()] })
            .collect()
    }

    fn bfunction(&self, theta: &[f64]) -> Result<BFunction> {
        BFunction::new(self.alpha, self.w, self.q, self.lipschitz_l, self.knots.clone(), self.e_values(theta))
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        self.constant + dot(&self.gradient, theta)
    }

    /// Coverage on `grid` and its Jacobian with respect to θ.
    fn coverage(&self, bf: &BFunction, grid: &[f64], jacobian: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = self.params.len();
        let mut values = Vec::with_capacity(grid.len());
        let mut rows = Vec::new();
        for &psi in grid {
            values.push(coverage_known(bf, psi));
            if !jacobian {
                continue;
            }
            // c = 1 - Φ(ψ + x₂) - Φ(x₁ - ψ), x₁ = b⁻¹(ψ), x₂ = b⁻¹(-ψ),
            // and ∂x*/∂e_k = -hat_k(x*) / (1 + e'(x*)).
            let mut row = vec![0.0; m];
            let (x1, x2) = (inverse_b(bf, psi), inverse_b(bf, -psi));
            for (x, weight) in [(x1, -std_normal_pdf(x1 - psi)), (x2, -std_normal_pdf(psi + x2))] {
                if let Some(i) = bf.segment(x) {
                    let denom = 1.0 + bf.excess_slope(x);
                    let t = (x - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
                    for (k, hat) in [(i, 1.0 - t), (i + 1, t)] {
                        if let Some(j) = self.param_of[k].filter(|_| k > 0 && k < self.knots.len() - 1) {
                            row[j] += weight * (-hat / denom);
                        }
                    }
                }
            }
            rows.push(row);
        }
        (values, rows)
    }

    fn violation(&self, cov: &[f64]) -> f64 {
        let target = 1.0 - self.alpha;
        cov.iter().map(|c| target - c).fold(0.0, f64::max)
    }

    /// Line-search SQP on the ℓ1 merit f + Σ ρᵢ·max(0, 1 - α - cᵢ).
    fn sqp(&self, start: &[f64], grid: &[f64], round: usize, log: &mut Vec<IterationRecord>) -> Result<Vec<f64>> {
        let m = self.params.len();
        let target = 1.0 - self.alpha;
        let mut theta = start.to_vec();
        let (mut cov, mut jac) = self.coverage(&self.bfunction(&theta)?, grid, true);
        let mut hess = scaled_identity(m, 1.0);
        let mut rho = vec![0.0; grid.len()];
        let mut fresh_hessian = true;

        for iteration in 0..self.max_iterations {
            let f = self.objective(&theta);
            let v = self.violation(&cov);
            let step = match self.subproblem(&theta, &cov, &jac, &hess, STEP_BOUND, target) {
                Ok(step) => step,
                Err(_) => {
                    // BFGS lost numerical definiteness; restart the curvature model.
                    hess = scaled_identity(m, 1.0);
                    fresh_hessian = true;
                    self.subproblem(&theta, &cov, &jac, &hess, STEP_BOUND, target).map_err(|e| match e {
                        Error::Solver { message, .. } => Error::Solver { message, log: std::mem::take(log) },
                        other => other,
                    })?
                }
            };
            let d = &step.d;
            let step_norm = d.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            for (r, &l) in rho.iter_mut().zip(&step.lambda) {
                *r = l.max(0.5 * (*r + l));
            }
            let merit = |c: &[f64], fv: f64| {
                fv + c.iter().zip(&rho).map(|(ci, r)| r * (target - ci).max(0.0)).sum::<f64>()
            };
            let phi0 = merit(&cov, f);
            // Directional derivative of the merit along d under the linearized constraints.
            let slope = dot(&self.gradient, d)
                + cov
                    .iter()
                    .zip(&jac)
                    .zip(&rho)
                    .map(|((c, row), r)| r * ((target - c - dot(row, d)).max(0.0) - (target - c).max(0.0)))
                    .sum::<f64>();

            if step_norm <= 1e-12 || slope.abs() <= 1e-13 * (1.0 + f.abs()) {
                log.push(IterationRecord {
                    round,
                    iteration,
                    objective: f,
                    max_violation: v,
                    step_length: 0.0,
                    step_norm,
                    accepted: false,
                });
                if v <= self.constraint_tol {
                    return Ok(theta);
                }
                return Err(Error::Solver {
                    message: format!("stalled at an infeasible point (coverage shortfall {v})"),
                    log: std::mem::take(log),
                });
            }

            let mut alpha_step = 1.0;
            let mut accepted = None;
            if slope < 0.0 {
                for _ in 0..LINE_SEARCH_STEPS {
                    let trial: Vec<f64> = theta.iter().zip(d).map(|(a, b)| a + alpha_step * b).collect();
                    let trial_bf = self.bfunction(&trial)?;
                    let (trial_cov, trial_jac) = self.coverage(&trial_bf, grid, true);
                    let phi = merit(&trial_cov, self.objective(&trial));
                    if phi <= phi0 + 1e-4 * alpha_step * slope {
                        accepted = Some((trial, trial_cov, trial_jac));
                        break;
                    }
                    // Safeguarded quadratic interpolation of the merit along d.
                    let curvature = phi - phi0 - alpha_step * slope;
                    let next = if curvature > 0.0 { -slope * alpha_step * alpha_step / (2.0 * curvature) } else { 0.0 };
                    alpha_step = next.clamp(0.1 * alpha_step, 0.5 * alpha_step);
                }
            }
            log.push(IterationRecord {
                round,
                iteration,
                objective: f,
                max_violation: v,
                step_length: if accepted.is_some() { alpha_step } else { 0.0 },
                step_norm,
                accepted: accepted.is_some(),
            });

            let Some((trial, trial_cov, trial_jac)) = accepted else {
                if fresh_hessian {
                    if v <= self.constraint_tol {
                        return Ok(theta);
                    }
                    return Err(Error::Solver {
                        message: format!("line search failed at an infeasible point (coverage shortfall {v})"),
                        log: std::mem::take(log),
                    });
                }
                hess = scaled_identity(m, 1.0);
                fresh_hessian = true;
                continue;
            };

            let grad_lagrangian = |rows: &[Vec<f64>]| -> Vec<f64> {
                let mut g = self.gradient.clone();
                for (row, &l) in rows.iter().zip(&step.lambda) {
                    if l != 0.0 {
                        for (gi, ri) in g.iter_mut().zip(row) {
                            *gi -= l * ri;
                        }
                    }
                }
                g
            };
            let s_vec: Vec<f64> = d.iter().map(|x| alpha_step * x).collect();
            let y: Vec<f64> =
                grad_lagrangian(&trial_jac).iter().zip(grad_lagrangian(&jac)).map(|(a, b)| a - b).collect();
            damped_bfgs_update(&mut hess, &s_vec, &y);
            fresh_hessian = false;

            theta = trial;
            cov = trial_cov;
            jac = trial_jac;
        }
        Err(Error::Solver {
            message: format!("no convergence within {} iterations", self.max_iterations),
            log: std::mem::take(log),
        })
    }

    /// Solves min g·d + ½dᵀBd + Mt + ½εt² over (d, t) subject to
    /// cov + J d + t ≥ target, the linear slope and level bounds, |d| ≤ Δ and t ≥ 0.
    fn subproblem(
        &self,
        theta: &[f64],
        cov: &[f64],
        jac: &[Vec<f64>],
        hess: &[f64],
        bound: f64,
        target: f64,
    ) -> Result<Step> {
        let m = theta.len();
        let nv = m + 1;
        let mut qmat = vec![0.0; nv * nv];
        for i in 0..m {
            qmat[i * nv..i * nv + m].copy_from_slice(&hess[i * m..(i + 1) * m]);
        }
        qmat[nv * nv - 1] = 1e-6;
        let mut cvec = self.gradient.clone();
        cvec.push(ELASTIC_COST);

        let mut amat = Vec::new();
        let mut bvec = Vec::new();
        let mut push = |coeffs: &[f64], t: f64, bound: f64| {
            amat.extend_from_slice(coeffs);
            amat.push(t);
            bvec.push(bound);
        };
        // coverage: -J d - t ≤ cov - target
        for (c, row) in cov.iter().zip(jac) {
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            push(&neg, -1.0, c - target);
        }
        for row in &self.slopes {
            let s = dot(row, theta);
            push(row, 0.0, self.max_slope - s);
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            push(&neg, 0.0, self.max_slope + s);
        }
        let floor = self.z * (1.0 - 1e-9);
        let mut unit = vec![0.0; m];
        for j in 0..m {
            unit[j] = -1.0;
            push(&unit, 0.0, theta[j] + floor);
            push(&unit, 0.0, bound);
            unit[j] = 1.0;
            push(&unit, 0.0, bound);
            unit[j] = 0.0;
        }
        push(&unit, -1.0, 0.0);

        let sol = quadprog::solve_qp(&mut qmat, &cvec, &amat, &bvec, 0, false).map_err(|e| Error::Solver {
            message: format!("QP subproblem failed: {e}"),
            log: Vec::new(),
        })?;
        let d = sol.sol[..m].to_vec();
        let lambda = sol.lagr[..cov.len()].iter().map(|l| l.max(0.0)).collect();
        Ok(Step { d, lambda })
    }
}

struct Step {
    d: Vec<f64>,
    /// Multipliers of the linearized coverage constraints.
    lambda: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled_identity(m: usize, s: f64) -> Vec<f64> {
    let mut h = vec![0.0; m * m];
    for i in 0..m {
        h[i * m + i] = s;
    }
    h
}

fn mat_vec(h: &[f64], v: &[f64]) -> Vec<f64> {
    let m = v.len();
    (0..m).map(|i| dot(&h[i * m..(i + 1) * m], v)).collect()
}

/// BFGS update with Powell damping; keeps `h` symmetric positive definite.
fn damped_bfgs_update(h: &mut [f64], s: &[f64], y: &[f64]) {
    let m = s.len();
    let hs = mat_vec(h, s);
    let shs = dot(s, &hs);
    if !(shs > 0.0) {
        return;
    }
    let sy = dot(s, y);
    let phi = if sy >= 0.2 * shs { 1.0 } else { 0.8 * shs / (shs - sy) };
    let r: Vec<f64> = y.iter().zip(&hs).map(|(yi, hi)| phi * yi + (1.0 - phi) * hi).collect();
    let sr = dot(s, &r);
    if !(sr > 1e-12 * dot(s, s).sqrt() * dot(&r, &r).sqrt()) {
        return;
    }
    for i in 0..m {
        for j in 0..m {
            h[i * m + j] += r[i] * r[j] / sr - hs[i] * hs[j] / shs;
        }
    }
}
