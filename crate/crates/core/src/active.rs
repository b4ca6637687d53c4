//! Active beamforming for a fixed reflection vector: the iterative convex
//! program over `W1`, `W2`, `W_AN` with AGM/Taylor SIC surrogates and the
//! sequential rank-one constraint relaxation.

use std::time::Instant;

use crate::channel::{effective_channels, ChannelSet};
use crate::conic::model::{AffExpr, ConicProblem, HermExpr, LmiBlock, LmiPart, VarId};
use crate::conic::{self, SolveStatus, SolverSettings};
use crate::error::Result;
use crate::linalg::{cr, outer, principal_eig, rank_one_ratio, CMat, CVec};
use crate::rates::{quad, BeamformerSolution};
use crate::robustify::{active_secrecy_lmi, sinr_threshold, w_prime_expr};
use crate::trace::{IterationTrace, Stage, TraceRow};

/// Smallest SINR reference used to keep `varpi` positive.
const GAMMA_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ActiveParams {
    pub r_q: f64,
    pub r_m: f64,
    /// Convergence accuracy on the transmit power.
    pub delta: f64,
    /// Initial SROCR backoff step.
    pub eps0: f64,
    pub max_iters: usize,
    /// Accepted `1 - lambda_max / Tr` at extraction.
    pub rank_tol: f64,
    /// Add `Tr(W1) = Tr(W2)`.
    pub equal_power: bool,
    pub solver: SolverSettings,
}

impl Default for ActiveParams {
    fn default() -> Self {
        Self {
            r_q: 1.0,
            r_m: 0.5,
            delta: 0.1,
            eps0: 0.1,
            max_iters: 60,
            rank_tol: 1e-3,
            equal_power: false,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrocrState {
    pub w1_ratio: f64,
    pub w2_ratio: f64,
    pub eigvec1: CVec,
    pub eigvec2: CVec,
    pub eps_step: f64,
    pub iter: usize,
}

impl SrocrState {
    /// No rank constraint (`w = 0`).
    pub fn relaxed(nt: usize, eps0: f64) -> Self {
        let mut e = CVec::zeros(nt);
        e[0] = cr(1.0);
        Self { w1_ratio: 0.0, w2_ratio: 0.0, eigvec1: e.clone(), eigvec2: e, eps_step: eps0, iter: 0 }
    }

    /// `w_i = min(1, lambda_max(W_i) / Tr(W_i) + eps)` and the new principal eigenvectors.
    pub fn advance(&mut self, w1: &CMat, w2: &CMat) {
        self.eigvec1 = principal_eig(w1).1;
        self.eigvec2 = principal_eig(w2).1;
        self.w1_ratio = (rank_one_ratio(w1) + self.eps_step).min(1.0);
        self.w2_ratio = (rank_one_ratio(w2) + self.eps_step).min(1.0);
    }

    pub fn rank_one(&self) -> bool {
        self.w1_ratio >= 1.0 && self.w2_ratio >= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgmTaylorState {
    pub varpi: f64,
    pub nu_tilde: f64,
    pub gamma_t_prev: f64,
}

impl AgmTaylorState {
    /// Tight references at a point with SINR reference `gamma_t` and brackets
    /// `b = Tr(H1 W_AN) + Tr(H1 W1) + 1`, `c = Tr(H2 W_AN) + Tr(H2 W1) + 1`.
    pub fn at_point(gamma_t: f64, b: f64, c: f64) -> Self {
        let g = gamma_t.max(GAMMA_FLOOR);
        Self { varpi: agm_varpi(g, b), nu_tilde: (c * g).sqrt(), gamma_t_prev: gamma_t }
    }
}

/// `varpi = sqrt(gamma_t / b)`, the AGM equality point.
pub fn agm_varpi(gamma_t: f64, b: f64) -> f64 {
    (gamma_t.max(GAMMA_FLOOR) / b).sqrt()
}

/// Traces of every (channel, covariance) pair entering the QoS and SIC constraints.
#[derive(Clone, Debug)]
pub struct TraceTerms {
    pub h1_w1: AffExpr,
    pub h1_w2: AffExpr,
    pub h1_an: AffExpr,
    pub h2_w1: AffExpr,
    pub h2_w2: AffExpr,
    pub h2_an: AffExpr,
}

impl TraceTerms {
    pub fn from_covariances(h1: &CVec, h2: &CVec, w1: &HermExpr, w2: &HermExpr, w_an: &HermExpr) -> Self {
        let g1 = outer(h1, h1);
        let g2 = outer(h2, h2);
        Self {
            h1_w1: w1.trace_with(&g1),
            h1_w2: w2.trace_with(&g1),
            h1_an: w_an.trace_with(&g1),
            h2_w1: w1.trace_with(&g2),
            h2_w2: w2.trace_with(&g2),
            h2_an: w_an.trace_with(&g2),
        }
    }

    /// `Tr(H1 W_AN) + Tr(H1 W1) + 1`.
    pub fn b(&self) -> AffExpr {
        self.h1_an.clone().add(&self.h1_w1).plus_const(1.0)
    }

    /// `Tr(H2 W_AN) + Tr(H2 W1) + 1`.
    pub fn c(&self) -> AffExpr {
        self.h2_an.clone().add(&self.h2_w1).plus_const(1.0)
    }
}

/// QoS rows (`>= 0`): `Tr(H1 W1) - gamma_Q (Tr(H1 W_AN) + 1)` and
/// `Tr(H2 W2) - gamma_Q (Tr(H2 W_AN) + Tr(H2 W1) + 1)`.
pub fn qos_constraints(t: &TraceTerms, r_q: f64) -> [AffExpr; 2] {
    let g = sinr_threshold(r_q);
    [
        t.h1_w1.clone().sub(&t.h1_an.clone().plus_const(1.0).scale(g)),
        t.h2_w2.clone().sub(&t.c().scale(g)),
    ]
}

/// AGM restriction, Taylor bound and 2x2 Schur block of the SIC condition.
pub fn add_sic_constraints(p: &mut ConicProblem, t: &TraceTerms, gamma_t: &AffExpr, nu: &AffExpr, st: &AgmTaylorState) {
    // 2 Tr(H1 W2) >= (b varpi)^2 + (gamma_t / varpi)^2
    p.add_rotated_soc(
        &t.h1_w2,
        &AffExpr::constant(1.0),
        &t.b().scale(st.varpi),
        &gamma_t.scale(1.0 / st.varpi),
        "sic agm",
    );
    // Tr(H2 W2) <= 2 nu_tilde nu - nu_tilde^2
    p.add_ineq(nu.scale(2.0 * st.nu_tilde).plus_const(-st.nu_tilde * st.nu_tilde).sub(&t.h2_w2), "sic taylor");
    p.add_psd2(&t.c(), nu, gamma_t, "sic schur");
}

/// SIC condition with the SINR reference held at a constant, which makes
/// both halves linear. When the constant equals the QoS threshold the second
/// half and the second QoS row pin `Tr(H2 W2)`, so they are stated as one
/// equality (the caller then skips that QoS row).
pub fn add_sic_fixed(p: &mut ConicProblem, t: &TraceTerms, gamma_t: f64, pins_qos: bool) {
    p.add_ineq(t.h1_w2.clone().sub(&t.b().scale(gamma_t)), "sic fixed 1");
    let second = t.c().scale(gamma_t).sub(&t.h2_w2);
    if pins_qos {
        p.add_eq(second, "sic fixed 2");
    } else {
        p.add_ineq(second, "sic fixed 2");
    }
}

/// `v^H W v - ratio * Tr(W) >= 0`.
pub fn sro_linear_constraint(w: &HermExpr, eigvec: &CVec, ratio: f64) -> AffExpr {
    w.trace_with(&outer(eigvec, eigvec)).sub(&w.trace().scale(ratio))
}

#[derive(Clone, Copy, Debug)]
pub enum SicMode {
    Fixed(f64),
    Convex(AgmTaylorState),
}

#[derive(Clone, Debug)]
pub struct IcpVars {
    pub w1: HermExpr,
    pub w2: HermExpr,
    pub w_an: HermExpr,
    pub tau1: Option<VarId>,
    pub tau2: Option<VarId>,
    pub gamma_t: Option<VarId>,
    pub nu: Option<VarId>,
}

/// A full PSD matrix variable, or `p v v^H` with `p >= 0` when the trace
/// ratio parameter has reached 1 (the two feasible sets coincide).
fn beam_var(p: &mut ConicProblem, nt: usize, name: &str, ratio: f64, eigvec: &CVec) -> HermExpr {
    if ratio >= 1.0 {
        let s = p.add_nonneg(format!("p_{name}"));
        HermExpr::scalar_times(s, &outer(eigvec, eigvec))
    } else {
        let w = p.add_psd_var(nt, name);
        if ratio > 0.0 {
            p.add_ineq(sro_linear_constraint(&w, eigvec, ratio), format!("{name} sro"));
        }
        w
    }
}

/// Secrecy for one stream when the eavesdropper channel is exact:
/// `G_e^H W' G_e + gamma_M I >= 0`.
fn nonrobust_secrecy_lmi(g_e: &CMat, w_prime: HermExpr, r_m: f64, label: &str) -> LmiBlock {
    let ne = g_e.ncols();
    LmiBlock::new(ne, label)
        .with_part(LmiPart::congruence(g_e.clone(), w_prime))
        .with_part(LmiPart::direct(HermExpr::constant(CMat::identity(ne, ne) * cr(sinr_threshold(r_m)))))
}

/// Assemble the iterative convex program for one inner iteration.
pub fn build_icp(cs: &ChannelSet, theta: &CVec, sic: &SicMode, srocr: &SrocrState, params: &ActiveParams) -> Result<(ConicProblem, IcpVars)> {
    let e = effective_channels(cs, None, theta)?;
    let nt = cs.dims().nt;
    let mut p = ConicProblem::new();
    let w1 = beam_var(&mut p, nt, "W1", srocr.w1_ratio, &srocr.eigvec1);
    let w2 = beam_var(&mut p, nt, "W2", srocr.w2_ratio, &srocr.eigvec2);
    let w_an = p.add_psd_var(nt, "W_AN");
    let t = TraceTerms::from_covariances(&e.h1, &e.h2, &w1, &w2, &w_an);
    let g_q = sinr_threshold(params.r_q);
    let pins_qos = matches!(sic, SicMode::Fixed(g) if (g - g_q).abs() <= 1e-12 * g_q.max(1.0));
    for (k, row) in qos_constraints(&t, params.r_q).into_iter().enumerate() {
        if !(pins_qos && k == 1) {
            p.add_ineq(row, format!("qos {}", k + 1));
        }
    }
    let (gamma_t, nu) = match sic {
        SicMode::Fixed(g) => {
            add_sic_fixed(&mut p, &t, *g, pins_qos);
            (None, None)
        }
        SicMode::Convex(st) => {
            let g = p.add_var("gamma_t");
            let n = p.add_var("nu");
            add_sic_constraints(&mut p, &t, &AffExpr::var(g), &AffExpr::var(n), st);
            (Some(g), Some(n))
        }
    };
    let mut taus = [None, None];
    for (k, wi) in [&w1, &w2].into_iter().enumerate() {
        let wp = w_prime_expr(&w_an, wi, params.r_m);
        let label = format!("secrecy {}", k + 1);
        if cs.eps_e > 0.0 {
            let tau = p.add_nonneg(format!("tau{}", k + 1));
            p.add_lmi(active_secrecy_lmi(cs, theta, wp, tau, params.r_m, &label)?);
            taus[k] = Some(tau);
        } else {
            p.add_lmi(nonrobust_secrecy_lmi(&e.g_e, wp, params.r_m, &label));
        }
    }
    if params.equal_power {
        p.add_eq(w1.trace().sub(&w2.trace()), "equal power");
    }
    p.minimize(w1.trace().add(&w2.trace()).add(&w_an.trace()));
    let vars = IcpVars { w1, w2, w_an, tau1: taus[0], tau2: taus[1], gamma_t, nu };
    Ok((p, vars))
}

#[derive(Clone, Debug)]
pub struct IcpSolution {
    pub w1: CMat,
    pub w2: CMat,
    pub w_an: CMat,
    pub tau1: f64,
    pub tau2: f64,
    pub gamma_t: f64,
    pub nu: f64,
    pub objective: f64,
    /// `Tr(H1 W_AN) + Tr(H1 W1) + 1` at the solution.
    pub b: f64,
    /// `Tr(H2 W_AN) + Tr(H2 W1) + 1` at the solution.
    pub c: f64,
    pub solver_iterations: usize,
    pub reduced_accuracy: bool,
}

#[derive(Clone, Debug)]
pub enum IcpOutcome {
    Solved(IcpSolution),
    Infeasible,
    NumericalFailure,
}

fn herm(m: CMat) -> CMat {
    crate::linalg::hermitian_part(&m)
}

/// Solve one iterative convex program.
pub fn solve_icp(cs: &ChannelSet, theta: &CVec, sic: &SicMode, srocr: &SrocrState, params: &ActiveParams) -> Result<IcpOutcome> {
    let (p, v) = build_icp(cs, theta, sic, srocr, params)?;
    let s = conic::solve(&p, &params.solver)?;
    match s.status {
        SolveStatus::Infeasible => return Ok(IcpOutcome::Infeasible),
        SolveStatus::NumericalFailure => return Ok(IcpOutcome::NumericalFailure),
        SolveStatus::Optimal => {}
    }
    let e = effective_channels(cs, None, theta)?;
    let w1 = herm(s.value(&v.w1));
    let w2 = herm(s.value(&v.w2));
    let w_an = herm(s.value(&v.w_an));
    let b = quad(&e.h1, &w_an) + quad(&e.h1, &w1) + 1.0;
    let c = quad(&e.h2, &w_an) + quad(&e.h2, &w1) + 1.0;
    let gamma_t = match (sic, v.gamma_t) {
        (_, Some(g)) => s.scalar(g),
        (SicMode::Fixed(g), None) => *g,
        (SicMode::Convex(_), None) => unreachable!(),
    };
    let nu = v.nu.map_or((c * gamma_t.max(0.0)).sqrt(), |n| s.scalar(n));
    Ok(IcpOutcome::Solved(IcpSolution {
        objective: s.primal_objective,
        tau1: v.tau1.map_or(0.0, |t| s.scalar(t)),
        tau2: v.tau2.map_or(0.0, |t| s.scalar(t)),
        w1,
        w2,
        w_an,
        gamma_t,
        nu,
        b,
        c,
        solver_iterations: s.iterations,
        reduced_accuracy: s.reduced_accuracy,
    }))
}

/// References for the next inner iteration: `varpi` at its equality point for
/// the solved `gamma_t`, `nu_tilde` at the solved `nu`.
pub fn update_agm_taylor(sol: &IcpSolution) -> AgmTaylorState {
    AgmTaylorState { varpi: agm_varpi(sol.gamma_t, sol.b), nu_tilde: sol.nu, gamma_t_prev: sol.gamma_t }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm1Status {
    Converged,
    /// Iteration or backoff budget exhausted; the last feasible iterate is kept.
    NotConverged,
    /// The relaxation without rank constraints already failed.
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct Algorithm1Result {
    pub status: Algorithm1Status,
    /// Last feasible iterate.
    pub last: Option<IcpSolution>,
    /// Whether `last` was solved with both trace ratios at 1.
    pub last_rank_one: bool,
    pub srocr: SrocrState,
    pub agm: AgmTaylorState,
    pub trace: IterationTrace,
    pub solves: usize,
}

impl Algorithm1Result {
    /// Beamformer with `w_i = sqrt(lambda_max) * principal eigenvector`.
    pub fn beamformer(&self, theta: &CVec) -> Option<BeamformerSolution> {
        self.last.as_ref().map(|s| to_beamformer(s, theta))
    }

    pub fn power(&self) -> f64 {
        self.last.as_ref().map_or(f64::INFINITY, |s| s.objective)
    }

    /// Usable as a final answer: rank-one and feasible.
    pub fn accepted(&self) -> bool {
        self.last.is_some() && self.last_rank_one
    }
}

pub fn extract_beam(w: &CMat) -> CVec {
    let (l, v) = principal_eig(w);
    v * cr(l.max(0.0).sqrt())
}

pub fn to_beamformer(s: &IcpSolution, theta: &CVec) -> BeamformerSolution {
    BeamformerSolution {
        w1: Some(extract_beam(&s.w1)),
        w2: Some(extract_beam(&s.w2)),
        w1_mat: s.w1.clone(),
        w2_mat: s.w2.clone(),
        w_an: s.w_an.clone(),
        theta: theta.clone(),
        tau1: s.tau1,
        tau2: s.tau2,
    }
}

/// Starting point of the inner loop when a previous rank-one iterate exists.
#[derive(Clone, Debug)]
pub struct WarmStart {
    pub srocr: SrocrState,
    pub agm: AgmTaylorState,
    pub power: f64,
}

fn row(outer: usize, stage: Stage, iter: usize, objective: f64, st: &SrocrState, feasible: bool, t0: Instant) -> TraceRow {
    TraceRow {
        outer_iter: outer,
        stage,
        iter,
        objective,
        ratio1: st.w1_ratio,
        ratio2: st.w2_ratio,
        eps_step: st.eps_step,
        feasible,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    }
}

/// The inner iterative algorithm for a fixed reflection vector.
///
/// Without `warm`, a relaxation with the SINR reference pinned to `gamma_Q`
/// and no rank constraint seeds the references and eigenvectors. With `warm`,
/// iterations start directly from the given rank-one state.
pub fn run_algorithm1(cs: &ChannelSet, theta: &CVec, params: &ActiveParams, warm: Option<&WarmStart>, outer_iter: usize) -> Result<Algorithm1Result> {
    let nt = cs.dims().nt;
    let mut trace = IterationTrace::default();
    let mut solves = 0usize;
    let stage = if warm.is_some() { Stage::Warm } else { Stage::Active };

    let (mut srocr, mut agm, mut last, mut last_rank_one, mut prev_power) = match warm {
        Some(w) => (w.srocr.clone(), w.agm, None, false, w.power),
        None => {
            let t0 = Instant::now();
            let relaxed = SrocrState::relaxed(nt, params.eps0);
            let g = sinr_threshold(params.r_q).max(GAMMA_FLOOR);
            let out = solve_icp(cs, theta, &SicMode::Fixed(g), &relaxed, params)?;
            solves += 1;
            let IcpOutcome::Solved(s) = out else {
                trace.push(row(outer_iter, Stage::Bootstrap, 0, f64::NAN, &relaxed, false, t0));
                return Ok(Algorithm1Result {
                    status: Algorithm1Status::Infeasible,
                    last: None,
                    last_rank_one: false,
                    srocr: relaxed,
                    agm: AgmTaylorState { varpi: 1.0, nu_tilde: 1.0, gamma_t_prev: g },
                    trace,
                    solves,
                });
            };
            trace.push(row(outer_iter, Stage::Bootstrap, 0, s.objective, &relaxed, true, t0));
            let agm = AgmTaylorState::at_point(s.gamma_t, s.b, s.c);
            let mut st = relaxed;
            st.advance(&s.w1, &s.w2);
            let p = s.objective;
            (st, agm, Some(s), false, p)
        }
    };

    let mut status = Algorithm1Status::NotConverged;
    for n in 1..=params.max_iters {
        let t0 = Instant::now();
        srocr.iter = n;
        let used_rank_one = srocr.rank_one();
        let out = solve_icp(cs, theta, &SicMode::Convex(agm), &srocr, params)?;
        solves += 1;
        match out {
            IcpOutcome::Solved(s) => {
                trace.push(row(outer_iter, stage, n, s.objective, &srocr, true, t0));
                let dp = (s.objective - prev_power).abs();
                prev_power = s.objective;
                agm = update_agm_taylor(&s);
                srocr.advance(&s.w1, &s.w2);
                last = Some(s);
                last_rank_one = used_rank_one;
                if used_rank_one && dp <= params.delta {
                    status = Algorithm1Status::Converged;
                    break;
                }
            }
            IcpOutcome::Infeasible | IcpOutcome::NumericalFailure => {
                trace.push(row(outer_iter, stage, n, f64::NAN, &srocr, false, t0));
                let Some(prev) = &last else { break };
                srocr.eps_step *= 0.5;
                if srocr.eps_step < 1e-7 {
                    break;
                }
                let (w1, w2) = (prev.w1.clone(), prev.w2.clone());
                srocr.advance(&w1, &w2);
            }
        }
    }
    Ok(Algorithm1Result { status, last, last_rank_one, srocr, agm, trace, solves })
}
