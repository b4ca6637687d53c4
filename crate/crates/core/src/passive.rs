//! Passive beamforming for fixed transmit covariances: the lifted feasibility
//! program over `U = u u^H`, `u = [conj(theta); 1]`, with the same rank-one
//! relaxation schedule as the active stage.

use std::time::Instant;

use crate::active::{add_sic_constraints, qos_constraints, AgmTaylorState, TraceTerms};
use crate::channel::ChannelSet;
use crate::conic::model::{AffExpr, ConicProblem, HermExpr, LmiBlock, LmiPart, SparseHerm, VarId};
use crate::conic::{self, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{c, cr, outer, principal_eig, rank_one_ratio, CMat, CVec};
use crate::robustify::{build_sprocedure_lmi, build_v_affine_in_u, build_w_prime, lift, sinr_threshold, svd_outer_terms};
use crate::trace::{IterationTrace, Stage, TraceRow};

/// Lifted legitimate channels: `h_i^H = u^H H_Ui`.
#[derive(Clone, Debug)]
pub struct LiftedChannels {
    /// `[diag(h_I1^H) H_BI; h_B1^H]`, `(M+1) x N_t`.
    pub h_u1: CMat,
    /// `[diag(h_I2^H) H_BI; 0]`.
    pub h_u2: CMat,
    /// `diag(h_Ii^H) H_BI`.
    pub q1: CMat,
    pub q2: CMat,
    /// `Tr(J1 U) + ||h_B1||^2 = ||h1||^2` on a rank-one lift.
    pub j1: CMat,
    /// `Tr(J2 U) = ||h2||^2`.
    pub j2: CMat,
    pub h_b1_sq: f64,
}

fn diag_times(h: &CVec, m: &CMat) -> CMat {
    let mut out = m.clone();
    for (r, mut row) in out.row_iter_mut().enumerate() {
        row *= h[r].conj();
    }
    out
}

pub fn lift_channels(cs: &ChannelSet) -> LiftedChannels {
    let m = cs.h_bi.nrows();
    let nt = cs.h_bi.ncols();
    let q1 = diag_times(&cs.h_i1, &cs.h_bi);
    let q2 = diag_times(&cs.h_i2, &cs.h_bi);
    let mut h_u1 = CMat::zeros(m + 1, nt);
    h_u1.view_mut((0, 0), (m, nt)).copy_from(&q1);
    h_u1.row_mut(m).copy_from(&cs.h_b1.adjoint());
    let mut h_u2 = CMat::zeros(m + 1, nt);
    h_u2.view_mut((0, 0), (m, nt)).copy_from(&q2);
    let mut j1 = CMat::zeros(m + 1, m + 1);
    j1.view_mut((0, 0), (m, m)).copy_from(&(&q1 * q1.adjoint()));
    let qh = &q1 * &cs.h_b1;
    j1.view_mut((0, m), (m, 1)).copy_from(&qh);
    j1.view_mut((m, 0), (1, m)).copy_from(&qh.adjoint());
    let mut j2 = CMat::zeros(m + 1, m + 1);
    j2.view_mut((0, 0), (m, m)).copy_from(&(&q2 * q2.adjoint()));
    LiftedChannels { h_u1, h_u2, q1, q2, j1, j2, h_b1_sq: cs.h_b1.norm_squared() }
}

/// `Tr(U'_(rho,i))` for every covariance and user, with
/// `U'_(rho,i) = H_Ui W_rho H_Ui^H U`.
pub fn lifted_trace_terms(lc: &LiftedChannels, u: &HermExpr, w1: &CMat, w2: &CMat, w_an: &CMat) -> TraceTerms {
    let g = |h: &CMat, w: &CMat| u.trace_with(&(h * w * h.adjoint()));
    TraceTerms {
        h1_w1: g(&lc.h_u1, w1),
        h1_w2: g(&lc.h_u1, w2),
        h1_an: g(&lc.h_u1, w_an),
        h2_w1: g(&lc.h_u2, w1),
        h2_w2: g(&lc.h_u2, w2),
        h2_an: g(&lc.h_u2, w_an),
    }
}

/// `Tr(J1 U) + ||h_B1||^2 - Tr(J2 U) >= 0`.
pub fn ordering_constraint(lc: &LiftedChannels, u: &HermExpr) -> AffExpr {
    u.trace_with(&lc.j1).plus_const(lc.h_b1_sq).sub(&u.trace_with(&lc.j2))
}

/// The lifted variable with `U_(M+1,M+1)` fixed to 1.
pub fn lifted_variable(p: &mut ConicProblem, m: usize) -> HermExpr {
    let mut u = HermExpr::zeros(m + 1);
    u.constant[(m, m)] = cr(1.0);
    for a in 0..m {
        let v = p.add_var(format!("U[{a},{a}]"));
        u.terms.push((v, SparseHerm::unit_diag(a)));
    }
    for b in 0..=m {
        for a in 0..b {
            let re = p.add_var(format!("re U[{a},{b}]"));
            u.terms.push((re, SparseHerm::unit_re(a, b)));
            let im = p.add_var(format!("im U[{a},{b}]"));
            u.terms.push((im, SparseHerm::unit_im(a, b)));
        }
    }
    u
}

/// Objective of the lifted program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassiveObjective {
    /// Maximize a common relative QoS margin `t in [0, 1]`.
    SlackMargin,
    /// Plain feasibility.
    Find,
}

#[derive(Clone, Debug)]
pub struct PassiveParams {
    pub r_q: f64,
    pub r_m: f64,
    pub eps0: f64,
    pub max_iters: usize,
    pub rank_tol: f64,
    pub objective: PassiveObjective,
    pub solver: SolverSettings,
}

impl Default for PassiveParams {
    fn default() -> Self {
        Self {
            r_q: 1.0,
            r_m: 0.5,
            eps0: 0.1,
            max_iters: 40,
            rank_tol: 1e-3,
            objective: PassiveObjective::SlackMargin,
            solver: SolverSettings::default(),
        }
    }
}

/// Fixed data of one passive stage.
#[derive(Clone, Debug)]
pub struct PassiveInput<'a> {
    pub cs: &'a ChannelSet,
    pub w1: &'a CMat,
    pub w2: &'a CMat,
    pub w_an: &'a CMat,
    pub agm: AgmTaylorState,
    /// Reflection vector the covariances were designed for.
    pub theta_prev: &'a CVec,
}

/// SROCR state of the lifted variable.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedVariable {
    pub u: CMat,
    pub u_ratio: f64,
    pub eigvec: CVec,
}

#[derive(Clone, Debug)]
pub struct IcfpSolution {
    pub u: CMat,
    pub slack: f64,
    pub gamma_t: f64,
    pub nu: f64,
    pub solver_iterations: usize,
}

#[derive(Clone, Debug)]
pub enum IcfpOutcome {
    Solved(IcfpSolution),
    Infeasible,
    NumericalFailure,
}

/// Build the lifted program. `u_fixed` replaces the matrix variable by a
/// constant (the trace ratio 1 case); otherwise the rank-one cut is added with
/// `ratio`/`eigvec` when `ratio > 0`.
fn build_icfp(
    input: &PassiveInput<'_>,
    lc: &LiftedChannels,
    u_fixed: Option<&CMat>,
    ratio: f64,
    eigvec: &CVec,
    params: &PassiveParams,
) -> Result<Option<(ConicProblem, HermExpr, VarId, VarId, Option<VarId>)>> {
    let cs = input.cs;
    let m = cs.h_bi.nrows();
    let mut p = ConicProblem::new();
    let u = match u_fixed {
        Some(val) => HermExpr::constant(val.clone()),
        None => {
            let u = lifted_variable(&mut p, m);
            p.add_lmi(LmiBlock::from_expr(u.clone(), "U psd"));
            for a in 0..m {
                p.add_ineq(u.entry_re(a, a).scale(-1.0).plus_const(1.0), format!("U[{a},{a}] <= 1"));
            }
            if ratio > 0.0 {
                p.add_ineq(u.trace_with(&outer(eigvec, eigvec)).sub(&u.trace().scale(ratio)), "U sro");
            }
            u
        }
    };
    let order = ordering_constraint(lc, &u);
    if order.terms.is_empty() {
        if order.constant < 0.0 {
            return Ok(None);
        }
    } else {
        p.add_ineq(order, "ordering");
    }

    let t = lifted_trace_terms(lc, &u, input.w1, input.w2, input.w_an);
    let slack = match params.objective {
        PassiveObjective::SlackMargin => {
            let s = p.add_nonneg("t");
            p.add_ineq(AffExpr::constant(1.0).plus_var(s, -1.0), "t <= 1");
            Some(s)
        }
        PassiveObjective::Find => None,
    };
    // Margins are relative to the signal terms at the previous reflection vector.
    let prev = lift(input.theta_prev);
    let prev_u = outer(&prev, &prev);
    let prev_t = lifted_trace_terms(lc, &HermExpr::constant(prev_u), input.w1, input.w2, input.w_an);
    let scales = [prev_t.h1_w1.constant.max(1e-12), prev_t.h2_w2.constant.max(1e-12)];
    for (k, row) in qos_constraints(&t, params.r_q).into_iter().enumerate() {
        let row = match slack {
            Some(s) => row.plus_var(s, -scales[k]),
            None => row,
        };
        if row.terms.is_empty() {
            if row.constant < 0.0 {
                return Ok(None);
            }
        } else {
            p.add_ineq(row, format!("qos {}", k + 1));
        }
    }
    let gamma_t = p.add_var("gamma_t");
    let nu = p.add_var("nu");
    add_sic_constraints(&mut p, &t, &AffExpr::var(gamma_t), &AffExpr::var(nu), &input.agm);

    let x_hat = cs.x_hat();
    for (k, wi) in [input.w1, input.w2].into_iter().enumerate() {
        let wp = build_w_prime(input.w_an, wi, params.r_m);
        let terms = svd_outer_terms(&cs.h_bi, &wp);
        let v = build_v_affine_in_u(&u, &cs.h_bi, &wp, &terms)?;
        let label = format!("secrecy {}", k + 1);
        if cs.eps_e > 0.0 {
            let tau = p.add_nonneg(format!("tau{}", k + 1));
            p.add_lmi(build_sprocedure_lmi(&x_hat, vec![LmiPart::direct(v)], tau, params.r_m, cs.eps_e, &label)?);
        } else {
            let ne = x_hat.ncols();
            p.add_lmi(
                LmiBlock::new(ne, label)
                    .with_part(LmiPart::congruence(x_hat.clone(), v))
                    .with_part(LmiPart::direct(HermExpr::constant(CMat::identity(ne, ne) * cr(sinr_threshold(params.r_m))))),
            );
        }
    }
    match slack {
        Some(s) => p.minimize(AffExpr::var(s).scale(-1.0)),
        None => p.minimize(AffExpr::constant(0.0)),
    }
    Ok(Some((p, u, gamma_t, nu, slack)))
}

/// The lifted program with a free matrix variable, for inspection or an
/// external solver. `None` when a constant row is already violated.
pub fn icfp_problem(input: &PassiveInput<'_>, ratio: f64, eigvec: &CVec, params: &PassiveParams) -> Result<Option<ConicProblem>> {
    let lc = lift_channels(input.cs);
    Ok(build_icfp(input, &lc, None, ratio, eigvec, params)?.map(|b| b.0))
}

fn solve_icfp_inner(
    input: &PassiveInput<'_>,
    lc: &LiftedChannels,
    u_fixed: Option<&CMat>,
    ratio: f64,
    eigvec: &CVec,
    params: &PassiveParams,
) -> Result<IcfpOutcome> {
    let Some((p, u, gamma_t, nu, slack)) = build_icfp(input, lc, u_fixed, ratio, eigvec, params)? else {
        return Ok(IcfpOutcome::Infeasible);
    };
    let s = conic::solve(&p, &params.solver)?;
    match s.status {
        SolveStatus::Infeasible => Ok(IcfpOutcome::Infeasible),
        SolveStatus::NumericalFailure => Ok(IcfpOutcome::NumericalFailure),
        SolveStatus::Optimal => Ok(IcfpOutcome::Solved(IcfpSolution {
            u: crate::linalg::hermitian_part(&s.value(&u)),
            slack: slack.map_or(0.0, |v| s.scalar(v)),
            gamma_t: s.scalar(gamma_t),
            nu: s.scalar(nu),
            solver_iterations: s.iterations,
        })),
    }
}

/// One lifted program with the rank-one relaxation at `state`. At ratio 1
/// the lift is pinned to the normalized principal direction of `state.u`.
pub fn solve_icfp(input: &PassiveInput<'_>, state: &LiftedVariable, params: &PassiveParams) -> Result<IcfpOutcome> {
    let lc = lift_channels(input.cs);
    if state.u_ratio >= 1.0 {
        let Ok(ex) = extract_theta(&outer(&state.eigvec, &state.eigvec), 0.5) else {
            return Ok(IcfpOutcome::Infeasible);
        };
        let l = lift(&ex.theta);
        return solve_icfp_inner(input, &lc, Some(&outer(&l, &l)), 1.0, &state.eigvec, params);
    }
    solve_icfp_inner(input, &lc, None, state.u_ratio, &state.eigvec, params)
}

/// Recovered reflection vector.
#[derive(Clone, Debug)]
pub struct ThetaExtraction {
    pub theta: CVec,
    /// Same vector read from row `M+1` of `U`.
    pub theta_row: CVec,
    /// Largest `|theta_m| - 1` removed by clipping.
    pub clip: f64,
    pub rank_ratio: f64,
}

/// `theta` from a (near) rank-one lift: principal eigenvector scaled so that
/// its last entry is 1, conjugated and clipped to the unit disc.
pub fn extract_theta(u: &CMat, rank_tol: f64) -> Result<ThetaExtraction> {
    let n = u.nrows();
    if n < 2 || u.ncols() != n {
        return Err(Error::DimensionMismatch("extract_theta needs a square lift of size >= 2".into()));
    }
    let m = n - 1;
    let rank_ratio = rank_one_ratio(u);
    if !(rank_ratio >= 1.0 - rank_tol) {
        return Err(Error::InvalidArgument(format!("lift is not rank one (ratio {rank_ratio:.6})")));
    }
    let (l, v) = principal_eig(u);
    let last = v[m];
    if last.norm() < 1e-12 {
        return Err(Error::InvalidArgument("lift has no weight on its last entry".into()));
    }
    // u = sqrt(l) v, rotated and scaled so that u_(M+1) = 1
    let uu = &v * (cr(l.sqrt()) / (last * cr(l.sqrt())));
    let mut clip: f64 = 0.0;
    let theta = CVec::from_iterator(
        m,
        uu.iter().take(m).map(|z| {
            let t = z.conj();
            let r = t.norm();
            if r > 1.0 {
                clip = clip.max(r - 1.0);
                t / cr(r)
            } else {
                t
            }
        }),
    );
    let scale = u[(m, m)].re.max(1e-300);
    let theta_row = CVec::from_iterator(m, (0..m).map(|k| u[(m, k)] / cr(scale)));
    Ok(ThetaExtraction { theta, theta_row, clip, rank_ratio })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum PassiveStatus {
    /// A rank-one lift passed the program at trace ratio 1.
    Converged,
    NotConverged,
    /// The relaxation without the rank constraint failed.
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct PassiveResult {
    pub status: PassiveStatus,
    /// Present only when converged.
    pub theta: Option<CVec>,
    /// Accepted rank-one lift.
    pub u: Option<CMat>,
    pub slack: f64,
    /// SINR reference of the accepted program.
    pub gamma_t: f64,
    pub clip: f64,
    pub trace: IterationTrace,
    pub solves: usize,
}

fn row(outer: usize, iter: usize, objective: f64, st: &LiftedVariable, eps: f64, feasible: bool, t0: Instant) -> TraceRow {
    TraceRow {
        outer_iter: outer,
        stage: Stage::Passive,
        iter,
        objective,
        ratio1: st.u_ratio,
        ratio2: f64::NAN,
        eps_step: eps,
        feasible,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    }
}

/// The passive iterative algorithm: start without the rank constraint, then
/// raise `u = min(1, lambda_max / Tr + eps)` and halve `eps` on failure.
pub fn run_passive(input: &PassiveInput<'_>, params: &PassiveParams, outer_iter: usize) -> Result<PassiveResult> {
    let lc = lift_channels(input.cs);
    let prev = lift(input.theta_prev);
    let mut state = LiftedVariable { u: outer(&prev, &prev), u_ratio: 0.0, eigvec: &prev / cr(prev.norm()) };
    let mut eps = params.eps0;
    let mut trace = IterationTrace::default();
    let mut solves = 0usize;
    let mut last: Option<IcfpSolution> = None;
    let mut result = PassiveResult { status: PassiveStatus::NotConverged, theta: None, u: None, slack: 0.0, gamma_t: 0.0, clip: 0.0, trace: IterationTrace::default(), solves: 0 };

    for n in 0..params.max_iters {
        let t0 = Instant::now();
        let pinned = state.u_ratio >= 1.0;
        let out = if pinned {
            match extract_theta(&outer(&state.eigvec, &state.eigvec), 0.5) {
                Ok(ex) => {
                    let l = lift(&ex.theta);
                    result.clip = ex.clip;
                    solve_icfp_inner(input, &lc, Some(&outer(&l, &l)), 1.0, &state.eigvec, params)?
                }
                Err(_) => IcfpOutcome::Infeasible,
            }
        } else {
            solve_icfp_inner(input, &lc, None, state.u_ratio, &state.eigvec, params)?
        };
        solves += 1;
        match out {
            IcfpOutcome::Solved(s) => {
                trace.push(row(outer_iter, n, s.slack, &state, eps, true, t0));
                if pinned {
                    let ex = extract_theta(&s.u, params.rank_tol)?;
                    result.status = PassiveStatus::Converged;
                    result.theta = Some(ex.theta);
                    result.slack = s.slack;
                    result.gamma_t = s.gamma_t;
                    result.u = Some(s.u);
                    break;
                }
                let (_, v) = principal_eig(&s.u);
                state.eigvec = v;
                state.u_ratio = (rank_one_ratio(&s.u) + eps).min(1.0);
                state.u = s.u.clone();
                last = Some(s);
            }
            IcfpOutcome::Infeasible | IcfpOutcome::NumericalFailure => {
                trace.push(row(outer_iter, n, f64::NAN, &state, eps, false, t0));
                let Some(prev) = &last else {
                    result.status = PassiveStatus::Infeasible;
                    break;
                };
                let r = rank_one_ratio(&prev.u);
                eps *= 0.5;
                // a pinned program that failed would be rebuilt unchanged
                while pinned && r + eps >= 1.0 && eps >= 1e-7 {
                    eps *= 0.5;
                }
                if eps < 1e-7 {
                    break;
                }
                let (_, v) = principal_eig(&prev.u);
                state.eigvec = v;
                state.u_ratio = (r + eps).min(1.0);
            }
        }
    }
    result.trace = trace;
    result.solves = solves;
    Ok(result)
}

/// Lift of a reflection vector as a matrix, `U = u u^H`.
pub fn lift_matrix(theta: &CVec) -> CMat {
    let l = lift(theta);
    outer(&l, &l)
}

/// Unit-modulus vector with the phases of `theta`.
pub fn unit_modulus(theta: &CVec) -> CVec {
    theta.map(|z| if z.norm() > 0.0 { z / cr(z.norm()) } else { c(1.0, 0.0) })
}
