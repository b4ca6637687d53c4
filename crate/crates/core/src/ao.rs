//! Outer alternating optimization between the active and passive stages,
//! plus the random-phase and equal-power baselines.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::active::{run_algorithm1, ActiveParams, AgmTaylorState, Algorithm1Result, SrocrState, WarmStart};
use crate::channel::{effective_channels, random_phases, ChannelSet};
use crate::conic::SolverSettings;
use crate::error::{Error, Result};
use crate::linalg::{cr, principal_eig, rank_one_ratio, CVec};
use crate::passive::{extract_theta, run_passive, PassiveInput, PassiveObjective, PassiveParams, PassiveStatus};
use crate::rates::{quad, BeamformerSolution};
use crate::trace::{IterationTrace, Stage, TraceRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitTheta {
    #[default]
    RandomPhase,
    AllOnes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ao,
    RandomPhase,
    Epa,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ao => "ao",
            Scheme::RandomPhase => "random_phase",
            Scheme::Epa => "epa",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ao" => Ok(Scheme::Ao),
            "random_phase" => Ok(Scheme::RandomPhase),
            "epa" => Ok(Scheme::Epa),
            _ => Err(Error::InvalidArgument(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AoConfig {
    /// Outer and inner convergence accuracy on the transmit power.
    pub delta: f64,
    pub max_outer_iters: usize,
    pub init_theta: InitTheta,
    pub r_q: f64,
    pub r_m: f64,
    /// Initial SROCR step for both stages.
    pub eps0: f64,
    pub max_inner_iters: usize,
    pub rank_tol: f64,
    /// Also restart the active stage from scratch at every outer iteration
    /// and keep the better of the two candidates.
    pub fresh_active: bool,
    pub passive_objective: PassiveObjective,
    pub solver: SolverSettings,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            max_outer_iters: 30,
            init_theta: InitTheta::RandomPhase,
            r_q: 1.0,
            r_m: 0.5,
            eps0: 0.1,
            max_inner_iters: 40,
            rank_tol: 1e-3,
            fresh_active: true,
            passive_objective: PassiveObjective::SlackMargin,
            solver: SolverSettings::default(),
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.r_q >= 0.0) || !(self.r_m >= 0.0) {
            return Err(Error::InvalidArgument("target rates must be nonnegative".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidArgument("max_outer_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn active_params(&self, equal_power: bool) -> ActiveParams {
        ActiveParams {
            r_q: self.r_q,
            r_m: self.r_m,
            delta: self.delta,
            eps0: self.eps0,
            max_iters: self.max_inner_iters,
            rank_tol: self.rank_tol,
            equal_power,
            solver: self.solver.clone(),
        }
    }

    pub fn passive_params(&self) -> PassiveParams {
        PassiveParams {
            r_q: self.r_q,
            r_m: self.r_m,
            eps0: self.eps0,
            max_iters: self.max_inner_iters,
            rank_tol: self.rank_tol,
            objective: self.passive_objective,
            solver: self.solver.clone(),
        }
    }
}

pub fn init_theta<R: Rng + ?Sized>(mode: InitTheta, m: usize, rng: &mut R) -> CVec {
    match mode {
        InitTheta::RandomPhase => random_phases(m, rng),
        InitTheta::AllOnes => CVec::from_element(m, cr(1.0)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AoStatus {
    /// Outer power gap reached `delta`.
    Converged,
    /// The passive stage found no better reflection vector; the last
    /// iterate is returned.
    PassiveStalled,
    MaxIterations,
    /// The first active stage produced no rank-one solution.
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct AoResult {
    pub status: AoStatus,
    pub solution: Option<BeamformerSolution>,
    pub power: f64,
    /// Accepted power after the initial active stage and each outer iteration.
    pub powers: Vec<f64>,
    pub trace: IterationTrace,
    pub outer_iters: usize,
    pub solves: usize,
    /// `lambda_max / Tr` of the last accepted lift, if a passive stage succeeded.
    pub lift_ratio: Option<f64>,
    /// Largest gap between the eigen and last-row recoveries of the reflection vector.
    pub extraction_gap: Option<f64>,
}

impl AoResult {
    pub fn feasible(&self) -> bool {
        self.solution.is_some()
    }

    fn infeasible(trace: IterationTrace, solves: usize) -> Self {
        Self {
            status: AoStatus::Infeasible,
            solution: None,
            power: f64::INFINITY,
            powers: Vec::new(),
            trace,
            outer_iters: 0,
            solves,
            lift_ratio: None,
            extraction_gap: None,
        }
    }
}

fn outer_row(outer_iter: usize, power: f64, t0: Instant) -> TraceRow {
    TraceRow {
        outer_iter,
        stage: Stage::Outer,
        iter: 0,
        objective: power,
        ratio1: f64::NAN,
        ratio2: f64::NAN,
        eps_step: f64::NAN,
        feasible: power.is_finite(),
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    }
}

/// Warm start for the active stage at a new reflection vector: the previous
/// signal directions pinned at ratio 1 and Taylor references tight at the
/// previous covariances.
fn warm_start(cs: &ChannelSet, theta: &CVec, sol: &BeamformerSolution, gamma_t: f64, power: f64, eps0: f64) -> Result<WarmStart> {
    let e = effective_channels(cs, None, theta)?;
    let w1 = sol.covariance(1);
    let w2 = sol.covariance(2);
    let b = quad(&e.h1, &sol.w_an) + quad(&e.h1, &w1) + 1.0;
    let c = quad(&e.h2, &sol.w_an) + quad(&e.h2, &w1) + 1.0;
    let srocr = SrocrState {
        w1_ratio: 1.0,
        w2_ratio: 1.0,
        eigvec1: principal_eig(&w1).1,
        eigvec2: principal_eig(&w2).1,
        eps_step: eps0,
        iter: 0,
    };
    Ok(WarmStart { srocr, agm: AgmTaylorState::at_point(gamma_t, b, c), power })
}

/// Alternate active and passive stages from `theta0`.
pub fn run_ao(cs: &ChannelSet, theta0: &CVec, cfg: &AoConfig, equal_power: bool) -> Result<AoResult> {
    cfg.validate()?;
    let t_start = Instant::now();
    let ap = cfg.active_params(equal_power);
    let pp = cfg.passive_params();
    let mut trace = IterationTrace::default();
    let mut solves = 0usize;

    let first = run_algorithm1(cs, theta0, &ap, None, 0)?;
    solves += first.solves;
    trace.extend(first.trace.clone());
    if !first.accepted() {
        return Ok(AoResult::infeasible(trace, solves));
    }
    let mut theta = theta0.clone();
    let mut best = first;
    let mut sol = best.beamformer(&theta).expect("accepted result has an iterate");
    let mut power = best.power();
    let mut powers = vec![power];
    trace.push(outer_row(0, power, t_start));

    let mut status = AoStatus::MaxIterations;
    let mut lift_ratio = None;
    let mut extraction_gap = None;
    let mut outer_iters = 0;
    for k in 1..=cfg.max_outer_iters {
        outer_iters = k;
        let last = best.last.as_ref().expect("accepted result has an iterate");
        let (w1, w2) = (sol.covariance(1), sol.covariance(2));
        let input = PassiveInput { cs, w1: &w1, w2: &w2, w_an: &last.w_an, agm: best.agm, theta_prev: &theta };
        let pr = run_passive(&input, &pp, k)?;
        solves += pr.solves;
        trace.extend(pr.trace.clone());
        let (Some(new_theta), PassiveStatus::Converged) = (pr.theta.clone(), pr.status) else {
            trace.push(outer_row(k, power, t_start));
            powers.push(power);
            status = AoStatus::PassiveStalled;
            break;
        };
        if let Some(u) = &pr.u {
            lift_ratio = Some(rank_one_ratio(u));
            if let Ok(ex) = extract_theta(u, 1.0) {
                extraction_gap = Some((&ex.theta - &ex.theta_row).camax());
            }
        }

        let warm = warm_start(cs, &new_theta, &sol, pr.gamma_t, power, cfg.eps0)?;
        let mut candidates: Vec<Algorithm1Result> = Vec::new();
        let wr = run_algorithm1(cs, &new_theta, &ap, Some(&warm), k)?;
        solves += wr.solves;
        trace.extend(wr.trace.clone());
        candidates.push(wr);
        if cfg.fresh_active {
            let fr = run_algorithm1(cs, &new_theta, &ap, None, k)?;
            solves += fr.solves;
            trace.extend(fr.trace.clone());
            candidates.push(fr);
        }
        let pick = candidates
            .into_iter()
            .filter(|r| r.accepted())
            .min_by(|a, b| a.power().total_cmp(&b.power()));
        let Some(next) = pick.filter(|r| r.power() <= power) else {
            trace.push(outer_row(k, power, t_start));
            powers.push(power);
            status = AoStatus::PassiveStalled;
            break;
        };
        let gap = (power - next.power()).abs();
        theta = new_theta;
        power = next.power();
        sol = next.beamformer(&theta).expect("accepted result has an iterate");
        best = next;
        powers.push(power);
        trace.push(outer_row(k, power, t_start));
        if gap <= cfg.delta {
            status = AoStatus::Converged;
            break;
        }
    }
    Ok(AoResult { status, solution: Some(sol), power, powers, trace, outer_iters, solves, lift_ratio, extraction_gap })
}

/// Active stage only, at the given reflection vector.
pub fn baseline_fixed_theta(cs: &ChannelSet, theta: &CVec, cfg: &AoConfig) -> Result<AoResult> {
    cfg.validate()?;
    let t0 = Instant::now();
    let r = run_algorithm1(cs, theta, &cfg.active_params(false), None, 0)?;
    let mut trace = r.trace.clone();
    if !r.accepted() {
        return Ok(AoResult::infeasible(trace, r.solves));
    }
    trace.push(outer_row(0, r.power(), t0));
    let status = match r.status {
        crate::active::Algorithm1Status::Converged => AoStatus::Converged,
        _ => AoStatus::MaxIterations,
    };
    Ok(AoResult {
        status,
        solution: r.beamformer(theta),
        power: r.power(),
        powers: vec![r.power()],
        trace,
        outer_iters: 0,
        solves: r.solves,
        lift_ratio: None,
        extraction_gap: None,
    })
}

/// Dispatch one scheme from a common initial reflection vector.
pub fn run_scheme(cs: &ChannelSet, theta0: &CVec, scheme: Scheme, cfg: &AoConfig) -> Result<AoResult> {
    match scheme {
        Scheme::Ao => run_ao(cs, theta0, cfg, false),
        Scheme::Epa => run_ao(cs, theta0, cfg, true),
        Scheme::RandomPhase => baseline_fixed_theta(cs, theta0, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_instance, Dims, FadingParams, Layout};
    use rand::SeedableRng;

    #[test]
    fn init_modes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let t = init_theta(InitTheta::RandomPhase, 7, &mut rng);
        assert!(t.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!(init_theta(InitTheta::AllOnes, 3, &mut rng).iter().all(|z| *z == cr(1.0)));
        let a = init_theta(InitTheta::RandomPhase, 5, &mut rand_chacha::ChaCha8Rng::seed_from_u64(4));
        let b = init_theta(InitTheta::RandomPhase, 5, &mut rand_chacha::ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn config_checks() {
        assert!(AoConfig { delta: 0.0, ..AoConfig::default() }.validate().is_err());
        assert!(AoConfig { r_q: -1.0, ..AoConfig::default() }.validate().is_err());
        assert!(AoConfig::default().validate().is_ok());
        assert_eq!("epa".parse::<Scheme>().unwrap(), Scheme::Epa);
        assert!("x".parse::<Scheme>().is_err());
    }

    #[test]
    fn small_instance_improves_on_fixed_phase() {
        let (_, cs) = sample_instance(&Layout::default(), &FadingParams::default(), Dims::new(3, 3, 1), 0.01, 2).unwrap();
        let theta = random_phases(3, &mut rand_chacha::ChaCha8Rng::seed_from_u64(2));
        let cfg = AoConfig::default();
        let ao = run_ao(&cs, &theta, &cfg, false).unwrap();
        let rp = baseline_fixed_theta(&cs, &theta, &cfg).unwrap();
        assert!(ao.feasible() && rp.feasible());
        assert!(ao.power <= rp.power * (1.0 + 1e-4));
        for w in ao.powers.windows(2) {
            assert!(w[1] <= w[0] + cfg.delta);
        }
        assert_eq!(ao.trace.outer_objectives().len(), ao.powers.len());
    }
}
