//! One function per subcommand. Each resolves its settings, computes, and
//! writes artifacts through `Outputs`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use vwci_core::asymptotics::theorem1_csv;
use vwci_core::estimators::DEFAULT_SCAD_A;
use vwci_core::interval::linear_grid;
use vwci_core::solver::{solve_b_detailed, solve_log_table};
use vwci_core::table::format_real;
use vwci_core::var_unknown::theorem2_table;
use vwci_core::{
    audit_coverage, efficiency_known, efficiency_unknown, eval_b, figure_profile, standard_b, tau_max, theorem1_table,
    theorem2_diagnostics, BFunction, EstimatorKind, EstimatorSpec, QuadratureConfig, SolverConfig, Theorem1Schedule,
    UnknownVarContext,
};

use crate::config::Settings;
use crate::output::Outputs;
use crate::{
    AuditArgs, Cli, CliError, Command, CurveArgs, ProfileArgs, SolveArgs, TauArgs, Theorem1Args, Theorem2Args,
};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let mut out = Outputs::new(&cli.out_dir)?;
    let name = cli.command.name();
    match cli.command {
        Command::SolveB(a) => solve(a, &mut settings, &mut out)?,
        Command::EfficiencyCurve(a) => curve(a, &mut settings, &mut out)?,
        Command::CoverageAudit(a) => audit(a, &mut settings, &mut out)?,
        Command::TauMax(a) => tau(a, &mut settings, &mut out)?,
        Command::FigureProfile(a) => profile(a, &mut settings, &mut out)?,
        Command::Theorem1(a) => theorem1(a, &mut settings, &mut out)?,
        Command::Theorem2(a) => theorem2(a, &mut settings, &mut out)?,
    }
    out.finish(name, settings.effective())
}

/// `standard` builds e ≡ 0 at the resolved alpha; anything else is a JSON file
/// whose own alpha wins (an explicit conflicting `--alpha` is an error).
fn load_bfun(settings: &mut Settings, bfun: Option<String>, alpha: Option<f64>) -> Result<BFunction, CliError> {
    let source: String = settings.require("bfun", bfun)?;
    if source == "standard" {
        let alpha = settings.get("alpha", alpha, 0.05)?;
        return Ok(standard_b(alpha)?);
    }
    let text = std::fs::read_to_string(&source).map_err(|e| CliError::usage(format!("cannot read b-function {source}: {e}")))?;
    let bf = BFunction::from_json(&text)?;
    if let Some(requested) = settings.lookup::<f64>("alpha", alpha)? {
        if requested != bf.alpha() {
            return Err(CliError::usage(format!("--alpha {requested} conflicts with alpha {} stored in {source}", bf.alpha())));
        }
    }
    settings.record("alpha", bf.alpha());
    Ok(bf)
}

/// [-end, end] built from a grid on [0, end], so 0 and ±ψ appear exactly.
fn symmetric_grid(end: f64, step: f64) -> Result<Vec<f64>, CliError> {
    let half = linear_grid(0.0, end, step)?;
    let mut grid: Vec<f64> = half.iter().rev().filter(|&&p| p > 0.0).map(|p| -p).collect();
    grid.extend(half);
    Ok(grid)
}

fn solve(a: SolveArgs, s: &mut Settings, out: &mut Outputs) -> Result<(), CliError> {
    let defaults = SolverConfig::default();
    let q = s.get("q", a.q, defaults.q)?;
    let grid_step = s.get("grid-step", a.grid_step, 0.05)?;
    let grid_max = s.get("grid-max", a.grid_max, q + 4.0)?;
    let cfg = SolverConfig {
        w: s.get("w", a.w, defaults.w)?,
        alpha: s.get("alpha", a.alpha, defaults.alpha)?,
        q,
        knot_count: s.get("knots", a.knots, defaults.knot_count)?,
        psi_constraint_grid: linear_grid(0.0, grid_max, grid_step)?,
        spread_scale: s.get("spread", a.spread, defaults.spread_scale)?,
        max_iterations: s.get("max-iter", a.max_iter, defaults.max_iterations)?,
        constraint_tol: s.get("constraint-tol", a.constraint_tol, defaults.constraint_tol)?,
        lipschitz_l: s.get("lipschitz", a.lipschitz, defaults.lipschitz_l)?,
    };
    let out_path: String = s.get("out", a.out, "bfun.json".to_string())?;
    let log_path: String = s.get("log", a.log, "solve_log.csv".to_string())?;

    let outcome = match solve_b_detailed(&cfg) {
        Ok(o) => o,
        Err(e) => {
            if let vwci_core::Error::Solver { log, .. } = &e {
                out.write(&log_path, solve_log_table(log).to_csv().as_bytes())?;
            }
            return Err(e.into());
        }
    };
    let mut json = outcome.bf.to_json();
    json.push('\n');
    out.write(&out_path, json.as_bytes())?;
    out.write(&log_path, solve_log_table(&outcome.log).to_csv().as_bytes())?;
    println!(
        "solved in {} iterations ({} densify rounds); min audit coverage {} at psi = {} ({})",
        outcome.log.len(),
        outcome.densify_rounds,
        format_real(outcome.audit.min_coverage),
        format_real(outcome.audit.argmin_psi),
        if outcome.audit.pass { "pass" } else { "FAIL" },
    );
    Ok(())
}

fn curve(a: CurveArgs, s: &mut Settings, out: &mut Outputs) -> Result<(), CliError> {
    let bf = load_bfun(s, a.bfun, a.alpha)?;
    let psi_max = s.get("psi-max", a.psi_max, bf.q() + 9.0)?;
    let step = s.get("step", a.step, 0.05)?;
    let grid = symmetric_grid(psi_max, step)?;
    let curve = match s.lookup::<u64>("n", a.n)? {
        Some(n) => {
            s.record("n", n);
            efficiency_unknown(&UnknownVarContext::new(n, bf)?, &grid)?
        }
        None => efficiency_known(&bf, &grid)?,
    };
    let path: String = s.get("out", a.out, "efficiency.csv".to_string())?;
    out.write(&path, curve.to_table().to_csv().as_bytes())?;
    if let Some(max) = curve.max_efficiency() {
        println!("max efficiency {} at psi = {}", format_real(max.efficiency), format_real(max.psi));
    }
    Ok(())
}

/// Fraction of `draws` samples X ~ N(ψ, 1) with ψ ∈ [-b(-X), b(X)], and its standard error.
fn mc_coverage(bf: &BFunction, psi: f64, draws: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..draws {
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = psi + z;
        if -eval_b(bf, -x) <= psi && psi <= eval_b(bf, x) {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

fn audit(a: AuditArgs, s: &mut Settings, out: &mut Outputs) -> Result<(), CliError> {
    let bf = load_bfun(s, a.bfun, a.alpha)?;
    let step = s.get("step", a.step, 0.01)?;
    let psi_max = s.get("psi-max", a.psi_max, bf.q() + 9.0)?;
    let draws = s.get("mc-draws", a.mc_draws, 0)?;
    let seed = s.get("seed", a.seed, 1)?;
    let grid = symmetric_grid(psi_max, step)?;
    let report = audit_coverage(&bf, bf.alpha(), &grid)?;
    let monte_carlo = if draws > 0 {
        let (p, se) = mc_coverage(&bf, report.argmin_psi, draws, seed);
        let z_score = (report.min_coverage - p) / se.max(f64::MIN_POSITIVE);
        Some(json!({ "psi": report.argmin_psi, "draws": draws, "seed": seed, "estimate": p, "std_error": se, "z_score": z_score }))
    } else {
        None
    };
    let record = json!({
        "min_coverage": report.min_coverage,
        "argmin_psi": report.argmin_psi,
        "threshold": report.threshold,
        "pass": report.pass,
        "grid_points": grid.len(),
        "monte_carlo": monte_carlo,
    });
    let path: String = s.get("out", a.out, "audit.json".to_string())?;
    let mut text = serde_json::to_string_pretty(&record).expect("audit record serializes");
    text.push('\n');
    out.write(&path, text.as_bytes())?;
    println!(
        "min coverage {} at psi = {} ({})",
        format_real(report.min_coverage),
        format_real(report.argmin_psi),
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(())
}

fn tau(a: TauArgs, s: &mut Settings, out: &mut Outputs) -> Result<(), CliError> {
    let bf = load_bfun(s, a.bfun, a.alpha)?;
    let kind: EstimatorKind = s.require("kind", a.kind)?.parse()?;
    let scad_a = s.get("a", a.a, DEFAULT_SCAD_A)?;
    let tol = s.get("tol", a.tol, 1e-6)?;
    let result = tau_max(&bf, kind, scad_a, tol)?;
    let path: String = s.get("out", a.out, "tau_max.json".to_string())?;
    let mut text = serde_json::to_string_pretty(&result).expect("tau_max result serializes");
    text.push('\n');
    out.write(&path, text.as_bytes())?;
    println!("{}", format_real(result.tau_max));
    Ok(())
}

fn profile(a: ProfileArgs, s: &mut Settings, out: &mut Outputs) -> Result<(), CliError> {
    let bf = load_bfun(s, a.bfun, a.alpha)?;
    let kind: EstimatorKind = s.require("kind", a.kind)?.parse()?;
    let tau = s.get("tau", a.tau, bf.z())?;
    let scad_a = s.get("a", a.a, DEFAULT_SCAD_A)?;
    let x_min = s.get("x-min", a.x_min, -8.0)?;
    let x_max = s.get("x-max", a.x_max, 8.0)?;
    let step = s.get("step", a.step, 0.01)?;
    let spec = EstimatorSpec::with_scad_a(kind, tau, scad_a)?;
    let table = figure_profile(&bf, &spec, &linear_grid(x_min, x_max, step)?)?;
    let path: String = s.get("out", a.out, "profile.csv".to_string())?;
    out.write(&path, table.to_csv().as_bytes())?;
    Ok(())
}

fn theorem1(a: Theorem1Args, s: &mut Settings, out: &mut Outputs) -> Result<(), CliError> {
    let defaults = Theorem1Schedule::default();
    let schedule = Theorem1Schedule {
        gamma: s.get("gamma", a.gamma, defaults.gamma)?,
        alpha: s.get("alpha", a.alpha, defaults.alpha)?,
        n_values: s.get_list("n-values", a.n_values, &defaults.n_values)?,
    };
    let rows = theorem1_table(&schedule, &QuadratureConfig::default())?;
    let path: String = s.get("out", a.out, "theorem1.csv".to_string())?;
    out.write(&path, theorem1_csv(&rows).to_csv().as_bytes())?;
    Ok(())
}

fn theorem2(a: Theorem2Args, s: &mut Settings, out: &mut Outputs) -> Result<(), CliError> {
    let bf = load_bfun(s, a.bfun, a.alpha)?;
    let n_values: Vec<u64> = s.get_list("n-values", a.n_values, &[10, 50, 200])?;
    let psi_max = s.get("psi-max", a.psi_max, bf.q() + 9.0)?;
    let step = s.get("step", a.step, 0.05)?;
    let rows = theorem2_diagnostics(&bf, &n_values, &linear_grid(0.0, psi_max, step)?, &QuadratureConfig::default())?;
    let path: String = s.get("out", a.out, "theorem2.csv".to_string())?;
    out.write(&path, theorem2_table(&rows).to_csv().as_bytes())?;
    Ok(())
}
