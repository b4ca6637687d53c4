//! Monte-Carlo sweeps: every (sweep point, trial) draws one channel
//! instance and runs each requested scheme on it from the same initial
//! reflection vector.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use irsnoma::ao::{init_theta, run_scheme, AoConfig, AoResult, Scheme};
use irsnoma::batch::{map_trials, trial_seed};
use irsnoma::channel::{sample_instance, Dims};
use irsnoma::conic::SolverSettings;
use irsnoma::linalg::trace_re;
use irsnoma::rates::{check_feasibility, OracleParams};
use irsnoma::trace::IterationTrace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub nt: usize,
    pub m: usize,
    pub ne: usize,
    pub r_q: f64,
    pub r_m: f64,
    pub xi_n: f64,
}

impl SweepPoint {
    pub fn dims(&self) -> Dims {
        Dims::new(self.nt, self.m, self.ne)
    }
}

/// Cartesian product of the sweep lists, in the order nt, m, ne, r_q, r_m, xi_n.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for nt in cfg.dims.nt.values() {
        for m in cfg.dims.m.values() {
            for ne in cfg.dims.ne.values() {
                for r_q in cfg.r_q.values() {
                    for r_m in cfg.r_m.values() {
                        for xi_n in cfg.xi_n.values() {
                            out.push(SweepPoint { nt, m, ne, r_q, r_m, xi_n });
                        }
                    }
                }
            }
        }
    }
    out
}

/// One line of the raw CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub point: usize,
    pub nt: usize,
    pub m: usize,
    pub ne: usize,
    pub r_q: f64,
    pub r_m: f64,
    pub xi_n: f64,
    pub scheme: String,
    pub trial: usize,
    pub seed: u64,
    pub feasible: bool,
    pub status: String,
    pub power: f64,
    pub power_db: f64,
    pub signal_power: f64,
    pub an_power: f64,
    pub outer_iters: usize,
    pub solves: usize,
    pub r11: f64,
    pub r12: f64,
    pub r22: f64,
    pub re_wc: f64,
    pub secrecy_margin: f64,
    pub oracle_ok: bool,
}

/// One line of the aggregate CSV; means and 95% half-widths are over the
/// feasible trials only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub point: usize,
    pub nt: usize,
    pub m: usize,
    pub ne: usize,
    pub r_q: f64,
    pub r_m: f64,
    pub xi_n: f64,
    pub scheme: String,
    pub trials: usize,
    pub feasible: usize,
    pub infeasible: usize,
    pub oracle_failures: usize,
    pub power_mean: f64,
    pub power_ci95: f64,
    pub power_db_mean: f64,
    pub power_db_ci95: f64,
    pub signal_mean: f64,
    pub signal_ci95: f64,
    pub an_mean: f64,
    pub an_ci95: f64,
    pub outer_iters_mean: f64,
}

pub fn to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Sample mean and 95% Student-t half-width; the half-width is NaN below
/// two samples.
pub fn mean_ci95(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof").inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

pub fn aggregate(points: &[SweepPoint], schemes: &[Scheme], raw: &[RawRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for (pi, p) in points.iter().enumerate() {
        for s in schemes {
            let rows: Vec<&RawRow> = raw.iter().filter(|r| r.point == pi && r.scheme == s.name()).collect();
            let ok: Vec<&&RawRow> = rows.iter().filter(|r| r.feasible).collect();
            let col = |f: fn(&RawRow) -> f64| mean_ci95(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (power_mean, power_ci95) = col(|r| r.power);
            let (power_db_mean, power_db_ci95) = col(|r| r.power_db);
            let (signal_mean, signal_ci95) = col(|r| r.signal_power);
            let (an_mean, an_ci95) = col(|r| r.an_power);
            out.push(AggregateRow {
                point: pi,
                nt: p.nt,
                m: p.m,
                ne: p.ne,
                r_q: p.r_q,
                r_m: p.r_m,
                xi_n: p.xi_n,
                scheme: s.name().to_string(),
                trials: rows.len(),
                feasible: ok.len(),
                infeasible: rows.len() - ok.len(),
                oracle_failures: ok.iter().filter(|r| !r.oracle_ok).count(),
                power_mean,
                power_ci95,
                power_db_mean,
                power_db_ci95,
                signal_mean,
                signal_ci95,
                an_mean,
                an_ci95,
                outer_iters_mean: col(|r| r.outer_iters as f64).0,
            });
        }
    }
    out
}

pub fn ao_config(cfg: &ExperimentConfig, p: &SweepPoint) -> AoConfig {
    AoConfig {
        delta: cfg.delta,
        max_outer_iters: cfg.max_outer_iters,
        init_theta: cfg.init_theta,
        passive_objective: cfg.passive_objective,
        r_q: p.r_q,
        r_m: p.r_m,
        solver: SolverSettings { tol: cfg.solver_tol, ..SolverSettings::default() },
        ..AoConfig::default()
    }
}

fn oracle(cfg: &ExperimentConfig) -> OracleParams {
    OracleParams { n_plain: cfg.oracle.n_plain, n_ascent_starts: cfg.oracle.n_ascent_starts, n_ascent_steps: cfg.oracle.n_ascent_steps }
}

struct TrialOutput {
    rows: Vec<RawRow>,
    traces: Vec<IterationTrace>,
}

fn raw_row(pi: usize, p: &SweepPoint, scheme: Scheme, trial: usize, seed: u64, r: &AoResult) -> RawRow {
    RawRow {
        point: pi,
        nt: p.nt,
        m: p.m,
        ne: p.ne,
        r_q: p.r_q,
        r_m: p.r_m,
        xi_n: p.xi_n,
        scheme: scheme.name().to_string(),
        trial,
        seed,
        feasible: r.feasible(),
        status: format!("{:?}", r.status),
        power: r.power,
        power_db: to_db(r.power),
        signal_power: f64::NAN,
        an_power: f64::NAN,
        outer_iters: r.outer_iters,
        solves: r.solves,
        r11: f64::NAN,
        r12: f64::NAN,
        r22: f64::NAN,
        re_wc: f64::NAN,
        secrecy_margin: f64::NAN,
        oracle_ok: false,
    }
}

fn run_trial(cfg: &ExperimentConfig, pi: usize, p: &SweepPoint, trial: usize) -> Result<TrialOutput, String> {
    let seed = trial_seed(cfg.seed, trial);
    let (_, cs) = sample_instance(&cfg.layout(), &cfg.fading(), p.dims(), p.xi_n, seed).map_err(|e| e.to_string())?;
    let theta0 = init_theta(cfg.init_theta, p.m, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    let ao = ao_config(cfg, p);
    let mut out = TrialOutput { rows: Vec::new(), traces: Vec::new() };
    for &scheme in &cfg.schemes {
        let r = run_scheme(&cs, &theta0, scheme, &ao).map_err(|e| e.to_string())?;
        let mut row = raw_row(pi, p, scheme, trial, seed, &r);
        if let Some(sol) = &r.solution {
            let rep = check_feasibility(&cs, sol, p.r_q, p.r_m, cfg.oracle.tol, &oracle(cfg), &mut ChaCha8Rng::seed_from_u64(seed ^ 0x0a1c1e));
            row.signal_power = trace_re(&sol.covariance(1)) + trace_re(&sol.covariance(2));
            row.an_power = trace_re(&sol.w_an);
            row.r11 = rep.r11;
            row.r12 = rep.r12;
            row.r22 = rep.r22;
            row.re_wc = rep.re1_wc.max(rep.re2_wc);
            row.secrecy_margin = rep.secrecy_margin(p.r_m);
            row.oracle_ok = rep.all_ok();
        }
        out.rows.push(row);
        out.traces.push(r.trace);
    }
    Ok(out)
}

/// Paths written by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct Outputs {
    pub raw: PathBuf,
    pub aggregate: PathBuf,
    pub trace_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub outputs: Outputs,
    pub aggregate: Vec<AggregateRow>,
}

impl Summary {
    /// Every (sweep point, scheme) pair has a feasible trial.
    pub fn all_points_feasible(&self) -> bool {
        self.aggregate.iter().all(|a| a.feasible > 0)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> String {
    format!("{}: {e}", path.display())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary, String> {
    cfg.validate().map_err(|e| e.to_string())?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let outputs = Outputs {
        raw: dir.join("raw.csv"),
        aggregate: dir.join("aggregate.csv"),
        trace_dir: cfg.output.trace.then(|| dir.join("traces")),
    };
    // open everything before the first solve so a bad path fails fast
    let mut raw_w = csv::Writer::from_writer(File::create(&outputs.raw).map_err(|e| io_err(&outputs.raw, e))?);
    let mut agg_w = csv::Writer::from_writer(File::create(&outputs.aggregate).map_err(|e| io_err(&outputs.aggregate, e))?);
    if let Some(t) = &outputs.trace_dir {
        fs::create_dir_all(t).map_err(|e| io_err(t, e))?;
    }

    let points = sweep_points(cfg);
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|pi| (0..cfg.trials).map(move |t| (pi, t))).collect();
    let results = map_trials(jobs.len(), |j| {
        let (pi, t) = jobs[j];
        run_trial(cfg, pi, &points[pi], t)
    });

    let mut raw = Vec::new();
    for (j, res) in results.into_iter().enumerate() {
        let out = res?;
        if let Some(tdir) = &outputs.trace_dir {
            for (row, trace) in out.rows.iter().zip(&out.traces) {
                let path = tdir.join(format!("p{}_{}_t{}.csv", row.point, row.scheme, jobs[j].1));
                let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
                trace.write_csv(&mut w).map_err(|e| io_err(&path, e))?;
                w.flush().map_err(|e| io_err(&path, e))?;
            }
        }
        raw.extend(out.rows);
    }
    for r in &raw {
        raw_w.serialize(r).map_err(|e| io_err(&outputs.raw, e))?;
    }
    raw_w.flush().map_err(|e| io_err(&outputs.raw, e))?;
    let agg = aggregate(&points, &cfg.schemes, &raw);
    for a in &agg {
        agg_w.serialize(a).map_err(|e| io_err(&outputs.aggregate, e))?;
    }
    agg_w.flush().map_err(|e| io_err(&outputs.aggregate, e))?;
    Ok(Summary { outputs, aggregate: agg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_of_constant_sample_is_zero() {
        let (m, h) = mean_ci95(&[2.0, 2.0, 2.0]);
        assert_eq!(m, 2.0);
        assert_eq!(h, 0.0);
        assert!(mean_ci95(&[1.0]).1.is_nan());
        assert!(mean_ci95(&[]).0.is_nan());
    }

    #[test]
    fn ci_matches_t_table() {
        // n = 2, t_0.975(1) = 12.706, s = sqrt(2), half-width = 12.706
        let (_, h) = mean_ci95(&[0.0, 2.0]);
        assert!((h - 12.7062).abs() < 1e-3, "{h}");
    }

    #[test]
    fn sweep_order_is_lexicographic() {
        let cfg = crate::config::ExperimentConfig::from_toml("r_m = [0.1, 1.0]\nxi_n = [0.01, 0.1]\n[dims]\nnt = [6, 8]\nm = 5\nne = 2\n").unwrap();
        let p = sweep_points(&cfg);
        assert_eq!(p.len(), 8);
        assert_eq!((p[0].nt, p[0].r_m, p[0].xi_n), (6, 0.1, 0.01));
        assert_eq!((p[1].nt, p[1].r_m, p[1].xi_n), (6, 0.1, 0.1));
        assert_eq!(p[7].nt, 8);
    }

    #[test]
    fn db_conversion() {
        assert_eq!(to_db(10.0), 10.0);
        assert_eq!(to_db(1.0), 0.0);
    }
}
