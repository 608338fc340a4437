//! Variable-width confidence intervals for a normal mean that contain
//! thresholding and penalized point estimates (hard thresholding, LASSO,
//! adaptive LASSO, SCAD) for every data value.
//!
//! Everything works in scaled coordinates ψ = (√n/σ)θ, where the data reduce
//! to X ~ N(ψ, 1) (known variance) or to the pair (X, R) with R = Σ̂/σ
//! (unknown variance). σ never appears as a parameter.

// `!(x > 0.0)` rejects NaN together with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod containment;
pub mod error;
pub mod estimators;
pub mod interval;
pub mod numerics;
pub mod solver;
pub mod table;
pub mod var_unknown;

pub use asymptotics::{prob_a_complement, theorem1_lower_bound, theorem1_table, Theorem1Row, Theorem1Schedule};
pub use containment::{check_containment, figure_profile, tau_max, ContainmentReport, TauMaxResult};
pub use error::{Error, Result};
pub use estimators::{psi_hat, psi_tilde, theta_from_psi, EstimatorKind, EstimatorSpec, ScaledObservation};
pub use interval::{
    coverage_known, efficiency_known, eval_b, expected_length_known, inverse_b, standard_b, BFunction,
    EfficiencyCurve, EfficiencyRecord,
};
pub use numerics::QuadratureConfig;
pub use solver::{audit_coverage, solve_b, CoverageAudit, IterationRecord, SolveOutcome, SolverConfig};
pub use table::{Cell, Table};
pub use var_unknown::{
    coverage_unknown, efficiency_unknown, expected_length_unknown, theorem2_diagnostics, RDistribution,
    Theorem2Row, UnknownVarContext,
};
