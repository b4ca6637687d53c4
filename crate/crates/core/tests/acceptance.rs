//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with `harness = false` so the report is always printed. The process
//! fails only if a criterion could not be evaluated; a FAIL line is a
//! measured outcome, not a crash.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use irsnoma::active::{run_algorithm1, ActiveParams};
use irsnoma::ao::{init_theta, run_scheme, AoConfig, AoResult, AoStatus, InitTheta, Scheme};
use irsnoma::batch::{map_trials, trial_seed};
use irsnoma::channel::{sample_instance, ChannelSet, Dims, FadingParams, Layout};
use irsnoma::conic::model::HermExpr;
use irsnoma::linalg::{c, fro, rank_one_ratio, trace_re, CVec};
use irsnoma::passive::{lift_channels, lift_matrix, lifted_trace_terms, ordering_constraint};
use irsnoma::rates::{check_feasibility, quad, sampled_max_eaves_rate, worst_case_eaves_rate, OracleParams};
use irsnoma::robustify::{build_joint_v, build_v_affine_in_u, build_w_prime, svd_outer_terms};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BASE_SEED: u64 = 2024;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Case {
    nt: usize,
    m: usize,
    ne: usize,
    r_q: f64,
    r_m: f64,
    xi: f64,
    trial: usize,
    scheme: Scheme,
}

impl Case {
    fn key(&self) -> String {
        format!("{}-{}-{}-{}-{}-{}-{}-{}", self.nt, self.m, self.ne, self.r_q, self.r_m, self.xi, self.trial, self.scheme.name())
    }
}

fn base(nt: usize, m: usize, ne: usize, xi: f64) -> Case {
    Case { nt, m, ne, r_q: 1.0, r_m: 0.5, xi, trial: 0, scheme: Scheme::Ao }
}

struct Run {
    case: Case,
    cs: ChannelSet,
    res: AoResult,
}

impl Run {
    fn ok(&self) -> bool {
        self.res.feasible()
    }
    fn power(&self) -> f64 {
        self.res.power
    }
    fn an(&self) -> f64 {
        trace_re(&self.res.solution.as_ref().unwrap().w_an)
    }
    fn signal(&self) -> f64 {
        let s = self.res.solution.as_ref().unwrap();
        trace_re(&s.covariance(1)) + trace_re(&s.covariance(2))
    }
}

fn solve_case(c: &Case) -> Run {
    let seed = trial_seed(BASE_SEED, c.trial);
    let (_, cs) = sample_instance(&Layout::default(), &FadingParams::default(), Dims::new(c.nt, c.m, c.ne), c.xi, seed).unwrap();
    let theta0 = init_theta(InitTheta::RandomPhase, c.m, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    let cfg = AoConfig { r_q: c.r_q, r_m: c.r_m, ..AoConfig::default() };
    let res = run_scheme(&cs, &theta0, c.scheme, &cfg).unwrap();
    Run { case: *c, cs, res }
}

/// Memoized runs; criteria that share a configuration share its solutions.
struct Cache {
    runs: Mutex<HashMap<String, std::sync::Arc<Run>>>,
}

impl Cache {
    fn get(&self, cases: &[Case]) -> Vec<std::sync::Arc<Run>> {
        let missing: Vec<Case> = {
            let runs = self.runs.lock().unwrap();
            cases.iter().filter(|c| !runs.contains_key(&c.key())).copied().collect()
        };
        let fresh = map_trials(missing.len(), |i| solve_case(&missing[i]));
        let mut runs = self.runs.lock().unwrap();
        for r in fresh {
            runs.insert(r.case.key(), std::sync::Arc::new(r));
        }
        cases.iter().map(|c| runs[&c.key()].clone()).collect()
    }

    fn all(&self) -> Vec<std::sync::Arc<Run>> {
        let runs = self.runs.lock().unwrap();
        let mut v: Vec<_> = runs.values().cloned().collect();
        v.sort_by_key(|r| r.case.key());
        v
    }
}

fn trials(c: Case, n: usize, scheme: Scheme) -> Vec<Case> {
    (0..n).map(|trial| Case { trial, scheme, ..c }).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn db(p: f64) -> f64 {
    10.0 * p.log10()
}

struct Report {
    lines: Vec<String>,
}

impl Report {
    fn line(&mut self, id: usize, pass: bool, name: &str, detail: String, t0: Instant) {
        let s = format!(
            "{} criterion {id:>2} {name}: {detail} [{:.0} s]",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
        println!("{s}");
        self.lines.push(s);
    }
}

/// Every pair of runs with the same trial index where both are feasible.
fn paired<'a>(a: &'a [std::sync::Arc<Run>], b: &'a [std::sync::Arc<Run>]) -> Vec<(&'a Run, &'a Run)> {
    a.iter().zip(b).filter(|(x, y)| x.ok() && y.ok()).map(|(x, y)| (x.as_ref(), y.as_ref())).collect()
}

fn criterion_1(cache: &Cache, rep: &mut Report) {
    let t0 = Instant::now();
    let runs = cache.get(&trials(base(8, 10, 2, 0.01), 20, Scheme::Ao));
    let feasible: Vec<_> = runs.iter().filter(|r| r.ok()).collect();
    let mut monotone = 0;
    let mut converged = 0;
    let mut stalled = 0;
    let mut max_iters = 0;
    for r in &feasible {
        let p = &r.res.powers;
        if p.windows(2).all(|w| w[1] <= w[0] + 0.1) {
            monotone += 1;
        }
        match r.res.status {
            AoStatus::Converged => converged += 1,
            AoStatus::PassiveStalled => stalled += 1,
            _ => {}
        }
        max_iters = max_iters.max(r.res.outer_iters);
    }
    let n = feasible.len();
    let pass = n > 0 && monotone == n && converged + stalled == n && max_iters <= 30;
    rep.line(
        1,
        pass,
        "outer-loop monotonicity",
        format!(
            "{n}/20 feasible; monotone within 0.1 on {monotone}/{n}; power gap <= 0.1 on {converged}, passive fixed point on {stalled}; max outer iterations {max_iters}"
        ),
        t0,
    );
}

fn criterion_2(cache: &Cache, rep: &mut Report) {
    let t0 = Instant::now();
    let a = cache.get(&trials(base(8, 10, 2, 0.01), 20, Scheme::Ao));
    let b = cache.get(&trials(base(6, 10, 2, 0.01), 20, Scheme::Ao));
    let pairs = paired(&a, &b);
    let p8 = mean(&pairs.iter().map(|(x, _)| x.power()).collect::<Vec<_>>());
    let p6 = mean(&pairs.iter().map(|(_, y)| y.power()).collect::<Vec<_>>());
    rep.line(
        2,
        pairs.len() >= 20 && p8 < p6,
        "antenna-count trend",
        format!("{} shared feasible seeds; mean power N_t=8 {:.2} ({:.2} dB) vs N_t=6 {:.2} ({:.2} dB)", pairs.len(), p8, db(p8), p6, db(p6)),
        t0,
    );
}

fn criterion_3(cache: &Cache, rep: &mut Report) {
    let t0 = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    let mut gaps = Vec::new();
    for m in [5usize, 10] {
        let bcase = base(8, m, 2, 0.01);
        let ao = cache.get(&trials(bcase, 50, Scheme::Ao));
        let epa = cache.get(&trials(bcase, 50, Scheme::Epa));
        let rp = cache.get(&trials(bcase, 50, Scheme::RandomPhase));
        let triples: Vec<_> = (0..50).filter(|&i| ao[i].ok() && epa[i].ok() && rp[i].ok()).collect();
        let tol = 1e-4;
        let ao_le_rp = triples.iter().filter(|&&i| ao[i].power() <= rp[i].power() * (1.0 + tol)).count();
        let ao_le_epa = triples.iter().filter(|&&i| ao[i].power() <= epa[i].power() * (1.0 + tol)).count();
        let epa_excess = triples.iter().map(|&i| ao[i].power() / epa[i].power() - 1.0).fold(0.0, f64::max);
        let m_ao = mean(&triples.iter().map(|&i| ao[i].power()).collect::<Vec<_>>());
        let m_epa = mean(&triples.iter().map(|&i| epa[i].power()).collect::<Vec<_>>());
        let m_rp = mean(&triples.iter().map(|&i| rp[i].power()).collect::<Vec<_>>());
        let gap = mean(&triples.iter().map(|&i| db(rp[i].power()) - db(ao[i].power())).collect::<Vec<_>>());
        gaps.push(gap);
        let n = triples.len();
        ok &= n >= 50 && ao_le_rp == n && ao_le_epa == n && m_rp >= m_epa && m_epa >= m_ao;
        detail.push(format!(
            "M={m}: {n}/50 feasible for all schemes, AO<=RP on {ao_le_rp}, AO<=EPA on {ao_le_epa} (worst AO excess {:.1}%), means RP {:.2} / EPA {:.2} / AO {:.2} dB, RP-AO gap {gap:.2} dB",
            100.0 * epa_excess,
            db(m_rp),
            db(m_epa),
            db(m_ao)
        ));
    }
    ok &= gaps[1] > gaps[0];
    rep.line(3, ok, "baseline dominance", detail.join("; "), t0);
}

fn criterion_4(cache: &Cache, rep: &mut Report) {
    let t0 = Instant::now();
    let xis = [0.01, 0.05, 0.1];
    let n = 8;
    let per_xi: Vec<Vec<std::sync::Arc<Run>>> = xis.iter().map(|&xi| cache.get(&trials(base(8, 5, 2, xi), n, Scheme::Ao))).collect();
    let mut up = 0;
    let mut down = 0;
    let mut mixed = 0;
    let mut used = 0;
    let tol = 1e-3;
    for i in 0..n {
        if !per_xi.iter().all(|v| v[i].ok()) {
            continue;
        }
        used += 1;
        let p: Vec<f64> = per_xi.iter().map(|v| v[i].power()).collect();
        let nondec = p.windows(2).all(|w| w[1] >= w[0] * (1.0 - tol));
        let noninc = p.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol));
        match (nondec, noninc) {
            (true, _) => up += 1,
            (false, true) => down += 1,
            _ => mixed += 1,
        }
    }
    let means: Vec<String> = per_xi
        .iter()
        .map(|v| {
            let ok: Vec<f64> = v.iter().filter(|r| r.ok()).map(|r| r.power()).collect();
            format!("{:.2} dB", db(mean(&ok)))
        })
        .collect();
    rep.line(
        4,
        used > 0 && up == used,
        "robustness trend",
        format!(
            "{used} fixed instances feasible at all of xi=0.01/0.05/0.1; nondecreasing {up}, nonincreasing {down}, non-monotone {mixed}; mean power {}; measured direction: {}",
            means.join(" / "),
            if up == used { "power grows with xi" } else { "not uniformly increasing" }
        ),
        t0,
    );
}

fn criterion_5(cache: &Cache, rep: &mut Report) {
    let t0 = Instant::now();
    let n = 50;
    let b = base(8, 5, 2, 0.1);
    let rm: Vec<Vec<std::sync::Arc<Run>>> =
        [0.1, 0.5, 1.0].iter().map(|&r_m| cache.get(&trials(Case { r_m, ..b }, n, Scheme::Ao))).collect();
    let ne3 = cache.get(&trials(Case { ne: 3, ..b }, n, Scheme::Ao));
    let rq2 = cache.get(&trials(Case { r_q: 2.0, ..b }, n, Scheme::Ao));

    let common: Vec<usize> = (0..n).filter(|&i| rm.iter().all(|v| v[i].ok())).collect();
    let an: Vec<f64> = rm.iter().map(|v| mean(&common.iter().map(|&i| v[i].an()).collect::<Vec<_>>())).collect();
    let sig: Vec<f64> = rm.iter().map(|v| mean(&common.iter().map(|&i| v[i].signal()).collect::<Vec<_>>())).collect();
    let an_dec = an[0] > an[1] && an[1] > an[2];
    let sig_spread = (sig.iter().cloned().fold(f64::MIN, f64::max) - sig.iter().cloned().fold(f64::MAX, f64::min))
        / sig.iter().cloned().fold(f64::MAX, f64::min);

    let ne_pairs = paired(&rm[1], &ne3);
    let an2 = mean(&ne_pairs.iter().map(|(x, _)| x.an()).collect::<Vec<_>>());
    let an3 = mean(&ne_pairs.iter().map(|(_, y)| y.an()).collect::<Vec<_>>());

    let rq_pairs = paired(&rm[1], &rq2);
    let (s1, a1) = (
        mean(&rq_pairs.iter().map(|(x, _)| x.signal()).collect::<Vec<_>>()),
        mean(&rq_pairs.iter().map(|(x, _)| x.an()).collect::<Vec<_>>()),
    );
    let (s2, a2) = (
        mean(&rq_pairs.iter().map(|(_, y)| y.signal()).collect::<Vec<_>>()),
        mean(&rq_pairs.iter().map(|(_, y)| y.an()).collect::<Vec<_>>()),
    );
    let enough = common.len() >= 50 && ne_pairs.len() >= 50 && rq_pairs.len() >= 50;
    let pass = enough && an_dec && an3 > an2 && sig_spread < 0.2 && s2 > s1 && a2 > a1;
    rep.line(
        5,
        pass,
        "AN allocation trends",
        format!(
            "R_M sweep on {} trials: AN {:.3}/{:.3}/{:.3}, signal {:.2}/{:.2}/{:.2} (spread {:.1}%); N_e 2->3 on {}: AN {:.3} -> {:.3}; R_Q 1->2 on {}: signal {:.2} -> {:.2}, AN {:.3} -> {:.3}",
            common.len(),
            an[0],
            an[1],
            an[2],
            sig[0],
            sig[1],
            sig[2],
            100.0 * sig_spread,
            ne_pairs.len(),
            an2,
            an3,
            rq_pairs.len(),
            s1,
            s2,
            a1,
            a2
        ),
        t0,
    );
}

struct OracleOutcome {
    sampled_ok: bool,
    ascent_ok: bool,
    worst_excess: f64,
}

fn oracle(r: &Run) -> OracleOutcome {
    let sol = r.res.solution.as_ref().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(BASE_SEED ^ 0x0a1c1e, r.case.trial));
    let mut sampled: f64 = f64::MIN;
    let mut ascent: f64 = f64::MIN;
    for i in [1, 2] {
        sampled = sampled.max(sampled_max_eaves_rate(&r.cs, sol, i, 10_000, &mut rng));
        ascent = ascent.max(worst_case_eaves_rate(&r.cs, sol, i, 8, 25, &mut rng));
    }
    let lim = r.case.r_m + 1e-6;
    OracleOutcome { sampled_ok: sampled <= lim, ascent_ok: ascent <= lim, worst_excess: sampled.max(ascent) - r.case.r_m }
}

fn criterion_6(cache: &Cache, rep: &mut Report) {
    let t0 = Instant::now();
    let runs: Vec<_> = cache.all().into_iter().filter(|r| r.ok()).collect();
    let out = map_trials(runs.len(), |i| oracle(&runs[i]));
    let sampled = out.iter().filter(|o| o.sampled_ok).count();
    let ascent = out.iter().filter(|o| o.ascent_ok).count();
    let worst = out.iter().map(|o| o.worst_excess).fold(f64::MIN, f64::max);
    let n = runs.len();
    rep.line(
        6,
        n > 0 && sampled == n && ascent == n,
        "robustification soundness",
        format!("{n} solutions; 1e4-sample check clean on {sampled}, ascent oracle clean on {ascent}; largest R_e - R_M = {worst:.3e}"),
        t0,
    );
}

fn criterion_7(cache: &Cache, rep: &mut Report) {
    let t0 = Instant::now();
    let runs: Vec<_> = cache.all().into_iter().filter(|r| r.ok()).collect();
    let w_good = runs
        .iter()
        .filter(|r| {
            let (a, b) = r.res.solution.as_ref().unwrap().rank_ratios();
            a >= 0.999 && b >= 0.999
        })
        .count();
    let lifted: Vec<_> = runs.iter().filter_map(|r| r.res.lift_ratio.map(|u| (u, r.res.extraction_gap))).collect();
    let u_good = lifted.iter().filter(|(u, _)| *u >= 0.999).count();
    let gap = lifted.iter().filter_map(|(_, g)| *g).fold(0.0f64, f64::max);
    let n = runs.len();
    let frac_w = w_good as f64 / n.max(1) as f64;
    let frac_u = u_good as f64 / lifted.len().max(1) as f64;
    rep.line(
        7,
        n > 0 && frac_w >= 0.95 && frac_u >= 0.95 && gap <= 1e-6,
        "rank-one quality",
        format!(
            "W1,W2 ratio >= 0.999 on {w_good}/{n}; U ratio >= 0.999 on {u_good}/{}; largest eigen/last-row theta gap {gap:.2e}",
            lifted.len()
        ),
        t0,
    );
}

fn criterion_8(rep: &mut Report) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for k in 0..1000u64 {
        let dims = Dims::new(rng.random_range(1..6), rng.random_range(1..9), rng.random_range(1..4));
        let (_, cs) = sample_instance(&Layout::default(), &FadingParams::default(), dims, 0.05, k).unwrap();
        let theta = CVec::from_fn(dims.m, |_, _| c(0.0, rng.random_range(0.0..std::f64::consts::TAU)).exp() * c(rng.random::<f64>().sqrt(), 0.0));
        let e = irsnoma::channel::effective_channels(&cs, None, &theta).unwrap();
        let lc = lift_channels(&cs);
        let u = HermExpr::constant(lift_matrix(&theta));
        let rnd = |rng: &mut ChaCha8Rng| {
            let a = irsnoma::channel::sample_ball(dims.nt, dims.nt, 1.0, true, rng);
            &a * a.adjoint()
        };
        let (w1, w2, an) = (rnd(&mut rng), rnd(&mut rng), rnd(&mut rng));
        let t = lifted_trace_terms(&lc, &u, &w1, &w2, &an);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        for (lhs, h, w) in [(&t.h1_w1, &e.h1, &w1), (&t.h1_w2, &e.h1, &w2), (&t.h1_an, &e.h1, &an), (&t.h2_w1, &e.h2, &w1), (&t.h2_w2, &e.h2, &w2), (&t.h2_an, &e.h2, &an)] {
            worst = worst.max(rel(lhs.constant, quad(h, w)));
        }
        let order = ordering_constraint(&lc, &u).constant;
        worst = worst.max((order - (e.h1.norm_squared() - e.h2.norm_squared())).abs() / e.h1.norm_squared().max(1e-300));
        for wi in [&w1, &w2] {
            let wp = build_w_prime(&an, wi, 0.5);
            let v_theta = build_joint_v(&theta, &cs.h_bi, &wp).unwrap();
            let v_u = build_v_affine_in_u(&u, &cs.h_bi, &wp, &svd_outer_terms(&cs.h_bi, &wp)).unwrap().eval(&[]);
            worst = worst.max(fro(&(&v_u - &v_theta)) / fro(&v_theta).max(1e-300));
        }
        let um = lift_matrix(&theta);
        worst = worst.max((rank_one_ratio(&um) - 1.0).abs());
    }
    rep.line(8, worst <= 1e-9, "lift equivalence", format!("1000 random lifts; largest relative error {worst:.2e}"), t0);
}

fn criterion_9(rep: &mut Report) {
    let t0 = Instant::now();
    let grid: Vec<f64> = (0..16).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect();
    let mut results = Vec::new();
    let mut trial = 0;
    while results.len() < 10 && trial < 40 {
        let seed = trial_seed(BASE_SEED ^ 0x9, trial);
        trial += 1;
        let (_, cs) = sample_instance(&Layout::default(), &FadingParams::default(), Dims::new(2, 2, 1), 0.01, seed).unwrap();
        let points: Vec<(f64, f64)> = grid.iter().flat_map(|&a| grid.iter().map(move |&b| (a, b))).collect();
        let powers = map_trials(points.len(), |i| {
            let th = CVec::from_vec(vec![c(0.0, points[i].0).exp(), c(0.0, points[i].1).exp()]);
            let r = run_algorithm1(&cs, &th, &ActiveParams::default(), None, 0).unwrap();
            if r.accepted() { r.power() } else { f64::INFINITY }
        });
        let best = powers.iter().cloned().fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            continue;
        }
        let theta0 = init_theta(InitTheta::RandomPhase, 2, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        let ao = run_scheme(&cs, &theta0, Scheme::Ao, &AoConfig::default()).unwrap();
        results.push((ao.power, best));
    }
    let within = results.iter().filter(|(a, g)| *a <= g * 1.05).count();
    let worst = results.iter().map(|(a, g)| a / g - 1.0).fold(f64::MIN, f64::max);
    rep.line(
        9,
        results.len() >= 10 && within == results.len(),
        "tiny-instance grid oracle",
        format!("{} seeds with a feasible grid point; AO within 5% of the 16x16 grid best on {within}; largest excess {:.2}%", results.len(), 100.0 * worst),
        t0,
    );
}

fn criterion_10(cache: &Cache, rep: &mut Report) {
    let t0 = Instant::now();
    let runs: Vec<_> = cache.all().into_iter().filter(|r| r.ok()).collect();
    let none = OracleParams { n_plain: 0, n_ascent_starts: 0, n_ascent_steps: 0 };
    let mut qos = 0;
    let mut sic = 0;
    let mut order = 0;
    for r in &runs {
        let rep = check_feasibility(&r.cs, r.res.solution.as_ref().unwrap(), r.case.r_q, r.case.r_m, 1e-3, &none, &mut ChaCha8Rng::seed_from_u64(0));
        qos += rep.qos_ok as usize;
        sic += rep.sic_ok as usize;
        order += rep.order_ok as usize;
    }
    let n = runs.len();
    rep.line(
        10,
        n > 0 && qos == n && sic == n && order == n,
        "SIC/QoS feasibility",
        format!("{n} accepted solutions; QoS ok {qos}, SIC ok {sic}, ordering ok {order}"),
        t0,
    );
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture` or a filter; a
    // filter that does not name this suite skips it.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let t0 = Instant::now();
    let cache = Cache { runs: Mutex::new(HashMap::new()) };
    let mut rep = Report { lines: Vec::new() };
    criterion_8(&mut rep);
    criterion_1(&cache, &mut rep);
    criterion_2(&cache, &mut rep);
    criterion_3(&cache, &mut rep);
    criterion_4(&cache, &mut rep);
    criterion_5(&cache, &mut rep);
    criterion_6(&cache, &mut rep);
    criterion_7(&cache, &mut rep);
    criterion_9(&mut rep);
    criterion_10(&cache, &mut rep);
    let mut lines = rep.lines.clone();
    lines.sort_by_key(|l| l.split_whitespace().nth(2).and_then(|n| n.parse::<usize>().ok()));
    println!("--- summary ---");
    for l in &lines {
        println!("{l}");
    }
    let passed = rep.lines.iter().filter(|l| l.starts_with("PASS")).count();
    println!("acceptance: {passed}/{} criteria pass, {} AO runs, {:.0} s", rep.lines.len(), cache.all().len(), t0.elapsed().as_secs_f64());
    assert_eq!(rep.lines.len(), 10, "every criterion must report");
}
