//! Conic modelling layer and its interior-point backend.
//!
//! Problems are stated over complex Hermitian expressions ([`model`]), lowered
//! once to a real symmetric form ([`realify`]) and solved by [`ipm`].

pub mod dump;
pub mod ipm;
pub mod model;
pub mod realify;

pub use ipm::SolveStatus;
pub use model::{AffExpr, ConicProblem, HermExpr, LmiBlock, LmiPart, SparseHerm, VarId};

use crate::error::Result;
use crate::linalg::{fro, min_eig, CMat};

#[derive(Clone, Debug)]
pub struct SolverSettings {
    /// Primal/dual feasibility and relative gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 120 }
    }
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Smallest `lambda_min / max(1, ||block||_F)` over the LMI blocks.
    pub min_psd_residual: f64,
    /// Most negative affine inequality value (0 when all hold).
    pub min_ineq_residual: f64,
    pub max_eq_residual: f64,
    pub iterations: usize,
    /// Accepted at the stall tolerance rather than the requested one.
    pub reduced_accuracy: bool,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn scalar(&self, v: VarId) -> f64 {
        self.x[v.0]
    }

    pub fn eval(&self, e: &AffExpr) -> f64 {
        e.eval(&self.x)
    }

    pub fn value(&self, e: &HermExpr) -> CMat {
        e.eval(&self.x)
    }
}

/// Lower and solve. Malformed problems are reported as errors; solver
/// outcomes (including infeasibility) are reported through the status.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    let real = realify::lower(problem)?;
    let ipm_settings = ipm::IpmSettings {
        tol_feas: settings.tol,
        tol_gap: settings.tol,
        max_iter: settings.max_iter,
        ..Default::default()
    };
    let r = ipm::solve_real(&real, &ipm_settings);
    let mut sol = ConicSolution {
        status: r.status,
        primal_objective: problem.objective.eval(&r.x),
        dual_objective: r.dual_objective,
        x: r.x,
        min_psd_residual: 0.0,
        min_ineq_residual: 0.0,
        max_eq_residual: 0.0,
        iterations: r.iterations,
        reduced_accuracy: r.reduced_accuracy,
    };
    let (psd, ineq, eq) = residuals(problem, &sol.x);
    sol.min_psd_residual = psd;
    sol.min_ineq_residual = ineq;
    sol.max_eq_residual = eq;
    Ok(sol)
}

/// Constraint residuals of a point: (min scaled LMI eigenvalue, min inequality, max |equality|).
pub fn residuals(problem: &ConicProblem, x: &[f64]) -> (f64, f64, f64) {
    let mut psd = f64::INFINITY;
    for b in &problem.lmis {
        let m = b.eval(x);
        psd = psd.min(min_eig(&m) / fro(&m).max(1.0));
    }
    let ineq = problem.ineqs.iter().map(|k| k.expr.eval(x)).fold(0.0, f64::min);
    let eq = problem.eqs.iter().map(|k| k.expr.eval(x).abs()).fold(0.0, f64::max);
    (if psd.is_finite() { psd } else { 0.0 }, ineq, eq)
}
