//! Infeasible-start primal-dual path-following method for the lowered problem
//!
//! ```text
//! minimize c^T x  s.t.  S_b(x) = C_b + sum_i x_i A_bi  PSD,  g + A_lp x >= 0,  E^T x = f
//! ```
//!
//! HKM search direction with Mehrotra predictor-corrector. The Schur
//! complement `M_ij = Tr(A_i Y A_j Z^-1)` is assembled part by part from the
//! factored coefficients `A_bi = sum_p K_p^T S_pi K_p`, so each entry costs
//! `nnz(S_pi) * nnz(S_pj)` once the small products `K Y K^T`, `K Z^-1 K^T`
//! are formed.

use nalgebra::{DMatrix, DVector};

use super::realify::{block_constant, RealBlock, RealPart, RealProblem, RealTerm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct IpmSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    /// Accuracy accepted when progress stalls.
    pub tol_reduced: f64,
    pub tol_infeas: f64,
    pub max_iter: usize,
    /// Print one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self { tol_feas: 1e-8, tol_gap: 1e-8, tol_reduced: 1e-6, tol_infeas: 1e-8, max_iter: 120, verbose: false }
    }
}

#[derive(Clone, Debug)]
pub struct IpmResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub reduced_accuracy: bool,
}

type Mat = DMatrix<f64>;

fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn spd_inverse(m: &Mat) -> Option<Mat> {
    m.clone().cholesky().map(|c| c.inverse())
}

/// Largest `alpha` with `X + alpha dX` PSD (infinite when `dX` is PSD).
fn max_step_psd(x: &Mat, dx: &Mat) -> f64 {
    let Some(ch) = x.clone().cholesky() else { return 0.0 };
    let l = ch.l();
    let Some(t) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(w) = l.solve_lower_triangular(&t.transpose()) else { return 0.0 };
    let lmin = sym(&w).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter().zip(dx).filter(|(_, d)| **d < 0.0).map(|(v, d)| -v / d).fold(f64::INFINITY, f64::min)
}

impl RealPart {
    fn lift(&self, inner: &Mat) -> Mat {
        match &self.factor {
            None => inner.clone(),
            Some(k) => k.transpose() * inner * k,
        }
    }

    fn compress(&self, m: &Mat) -> Mat {
        match &self.factor {
            None => m.clone(),
            Some(k) => k * m * k.transpose(),
        }
    }

    fn inner_combination(&self, x: &[f64]) -> Mat {
        let mut acc = Mat::zeros(self.r, self.r);
        for t in &self.terms {
            let xv = x[t.var];
            if xv != 0.0 {
                for &(i, j, v) in &t.entries {
                    acc[(i, j)] += v * xv;
                }
            }
        }
        acc
    }
}

impl RealBlock {
    fn linear_map(&self, x: &[f64]) -> Mat {
        let mut out = Mat::zeros(self.n, self.n);
        for p in &self.parts {
            out += p.lift(&p.inner_combination(x));
        }
        out
    }

    fn adjoint_into(&self, b: &Mat, out: &mut [f64]) {
        for p in &self.parts {
            let bp = p.compress(b);
            for t in &p.terms {
                out[t.var] += term_dot(t, &bp);
            }
        }
    }
}

fn term_dot(t: &RealTerm, m: &Mat) -> f64 {
    match &t.dense {
        Some(d) => inner(d, m),
        None => t.entries.iter().map(|&(i, j, v)| v * m[(i, j)]).sum(),
    }
}

/// `sum_(p,q,v) v * Tr(S_u[.,.] B)` with `B[s, r]`, i.e. `Tr(S_u B)`.
fn term_trace(t: &RealTerm, b: &Mat) -> f64 {
    match &t.dense {
        Some(d) => inner(d, &b.transpose()),
        None => t.entries.iter().map(|&(r, s, w)| w * b[(s, r)]).sum(),
    }
}

struct BlockState {
    constant: Mat,
    z: Mat,
    y: Mat,
}

struct Work {
    zinv: Vec<Mat>,
}

fn schur_block(block: &RealBlock, y: &Mat, zinv: &Mat, m: &mut Mat) {
    let np = block.parts.len();
    let ky: Vec<Mat> = block.parts.iter().map(|p| p.factor.as_ref().map_or_else(|| y.clone(), |k| k * y)).collect();
    let kz: Vec<Mat> = block.parts.iter().map(|p| p.factor.as_ref().map_or_else(|| zinv.clone(), |k| k * zinv)).collect();
    // p_gh = K_g Y K_h^T, qt_gh = K_g Z^-1 K_h^T
    let mut p_gh = Vec::with_capacity(np * np);
    let mut qt_gh = Vec::with_capacity(np * np);
    for g in 0..np {
        for h in 0..np {
            let kh = &block.parts[h].factor;
            p_gh.push(kh.as_ref().map_or_else(|| ky[g].clone(), |k| &ky[g] * k.transpose()));
            qt_gh.push(kh.as_ref().map_or_else(|| kz[g].clone(), |k| &kz[g] * k.transpose()));
        }
    }
    // M is symmetric: visit each unordered pair of (part, term) positions once.
    for (g, pg) in block.parts.iter().enumerate() {
        for (ti, t) in pg.terms.iter().enumerate() {
            for (h, ph) in block.parts.iter().enumerate().skip(g) {
                if ph.terms.is_empty() {
                    continue;
                }
                let p = &p_gh[g * np + h];
                let qt = &qt_gh[g * np + h];
                let (ps, qs, ld) = (p.as_slice(), qt.as_slice(), p.nrows());
                let start = if h == g { ti } else { 0 };
                let mut bmat: Option<Mat> = None;
                for (ui, u) in ph.terms.iter().enumerate().skip(start) {
                    let val = if t.dense.is_none() && u.dense.is_none() {
                        // sum v w qt[p, s] P[q, r] over (p, q, v) in t and (r, s, w) in u
                        let mut acc = 0.0;
                        for &(pi, qi, v) in &t.entries {
                            let mut inner = 0.0;
                            for &(ri, si, w) in &u.entries {
                                inner += w * qs[pi + si * ld] * ps[qi + ri * ld];
                            }
                            acc += v * inner;
                        }
                        acc
                    } else {
                        let b = bmat.get_or_insert_with(|| term_b(t, p, qt, ph.r));
                        term_trace(u, b)
                    };
                    m[(t.var, u.var)] += val;
                    if !(h == g && ui == ti) {
                        m[(u.var, t.var)] += val;
                    }
                }
            }
        }
    }
}

/// `B[s, r] = sum v * qt[p, s] * P[q, r]` over the entries of `t`.
fn term_b(t: &RealTerm, p: &Mat, qt: &Mat, r: usize) -> Mat {
    match &t.dense {
        Some(d) => qt.transpose() * d * p,
        None => {
            let mut b = Mat::zeros(r, r);
            for &(pi, qi, v) in &t.entries {
                for c in 0..r {
                    let pv = v * p[(qi, c)];
                    if pv != 0.0 {
                        for s in 0..r {
                            b[(s, c)] += qt[(pi, s)] * pv;
                        }
                    }
                }
            }
            b
        }
    }
}

struct Direction {
    dx: DVector<f64>,
    dlam: DVector<f64>,
    dz: Vec<Mat>,
    dy: Vec<Mat>,
    dzeta: Vec<f64>,
    ds: Vec<f64>,
}

struct Linear {
    e: Mat,
    kind: LinearKind,
}

enum LinearKind {
    Schur {
        chol: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
        minv_e: Mat,
        schur_e: Option<nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    },
    /// Full KKT matrix, used when `M` is singular (e.g. pure equality problems).
    Full(nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, usize),
}

impl Linear {
    fn new(m: Mat, e: Mat) -> Option<Self> {
        let kind = LinearKind::new(&m, &e)?;
        Some(Linear { e, kind })
    }

    fn solve(&self, rhs: &DVector<f64>, req: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        self.kind.solve(&self.e, rhs, req)
    }
}

impl LinearKind {
    fn new(m: &Mat, e: &Mat) -> Option<Self> {
        let n = m.nrows();
        let maxd = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
        let mut reg = 0.0;
        let mut mr = m.clone();
        while maxd > 0.0 {
            if let Some(chol) = mr.clone().cholesky() {
                let minv_e = chol.solve(e);
                let schur_e = (e.ncols() > 0).then(|| (e.transpose() * &minv_e).lu());
                return Some(LinearKind::Schur { chol, minv_e, schur_e });
            }
            reg = if reg == 0.0 { 1e-14 * maxd } else { reg * 100.0 };
            if reg > 1e-6 * maxd {
                break;
            }
            for i in 0..n {
                mr[(i, i)] += reg;
            }
        }
        let k = e.ncols();
        let mut kkt = Mat::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(m);
        kkt.view_mut((0, n), (n, k)).copy_from(&(-e));
        kkt.view_mut((n, 0), (k, n)).copy_from(&e.transpose());
        let lu = kkt.lu();
        lu.is_invertible().then_some(LinearKind::Full(lu, n))
    }

    /// Solve `M dx - E dlam = rhs`, `E^T dx = req`.
    fn solve(&self, e: &Mat, rhs: &DVector<f64>, req: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        match self {
            LinearKind::Schur { chol, minv_e, schur_e } => {
                let minv_rhs = chol.solve(rhs);
                match schur_e {
                    None => Some((minv_rhs, DVector::zeros(0))),
                    Some(lu) => {
                        // E^T M^-1 (rhs + E dlam) = req
                        let r = req - e.transpose() * &minv_rhs;
                        let dlam = lu.solve(&r)?;
                        let dx = minv_rhs + minv_e * &dlam;
                        Some((dx, dlam))
                    }
                }
            }
            LinearKind::Full(lu, n) => {
                let mut b = DVector::zeros(rhs.len() + req.len());
                b.rows_mut(0, rhs.len()).copy_from(rhs);
                b.rows_mut(rhs.len(), req.len()).copy_from(req);
                let sol = lu.solve(&b)?;
                Some((sol.rows(0, *n).into_owned(), sol.rows(*n, req.len()).into_owned()))
            }
        }
    }
}

/// Solve a lowered problem.
pub fn solve_real(p: &RealProblem, settings: &IpmSettings) -> IpmResult {
    let n = p.n_vars;
    let nb = p.blocks.len();
    let nlp = p.lp.len();
    let neq = p.eq.len();
    let c = DVector::from_column_slice(&p.c);

    let mut e = Mat::zeros(n, neq);
    let mut f = DVector::zeros(neq);
    for (l, row) in p.eq.iter().enumerate() {
        for &(v, a) in &row.coefs {
            e[(v, l)] += a;
        }
        f[l] = -row.constant;
    }
    let g: Vec<f64> = p.lp.iter().map(|r| r.constant).collect();

    // Coefficient norms for the starting point.
    let mut coef_norm = vec![0.0f64; n];
    for b in &p.blocks {
        for part in &b.parts {
            let kf2 = part.factor.as_ref().map_or(1.0, |k| k.norm_squared());
            for t in &part.terms {
                let fro = t.entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                coef_norm[t.var] = coef_norm[t.var].max(fro * kf2);
            }
        }
    }
    let mut states: Vec<BlockState> = p
        .blocks
        .iter()
        .map(|b| {
            let constant = block_constant(b);
            let nn = b.n as f64;
            let amax = coef_norm.iter().copied().fold(0.0, f64::max);
            let xi = (10.0f64).max(nn.sqrt()).max(
                nn * p.c.iter().zip(&coef_norm).map(|(ci, an)| (1.0 + ci.abs()) / (1.0 + an)).fold(0.0, f64::max),
            );
            let eta = (10.0f64).max(nn.sqrt()).max(amax).max(constant.norm());
            BlockState { constant, z: Mat::identity(b.n, b.n) * eta, y: Mat::identity(b.n, b.n) * xi }
        })
        .collect();
    let lp_xi = 10.0f64.max(p.c.iter().map(|ci| 1.0 + ci.abs()).fold(0.0, f64::max));
    let lp_eta = 10.0f64.max(g.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut zeta = vec![lp_eta; nlp];
    let mut s = vec![lp_xi; nlp];
    let mut x = DVector::<f64>::zeros(n);
    let mut lam = DVector::<f64>::zeros(neq);

    let nu = p.blocks.iter().map(|b| b.n).sum::<usize>() + nlp;
    let nu = nu.max(1) as f64;
    let cnorm = 1.0 + c.norm();
    let cb_norm: Vec<f64> = states.iter().map(|st| 1.0 + st.constant.norm()).collect();
    let gnorm = 1.0 + g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let fnorm = 1.0 + f.norm();

    let mut result = IpmResult {
        status: SolveStatus::NumericalFailure,
        x: vec![0.0; n],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        reduced_accuracy: false,
    };
    let mut stalls = 0usize;
    let mut best_merit = f64::INFINITY;
    let mut since_best = 0usize;
    let mut best: Option<(Vec<f64>, f64, f64, f64, f64, f64)> = None;

    for iter in 0..settings.max_iter {
        result.iterations = iter;
        let xs = x.as_slice();
        // Residuals.
        let mut rb = Vec::with_capacity(nb);
        let mut pinf: f64 = 0.0;
        for (b, st) in p.blocks.iter().zip(&states) {
            let sx = &st.constant + b.linear_map(xs);
            let r = sx - &st.z;
            rb.push(r);
        }
        for (k, r) in rb.iter().enumerate() {
            pinf = pinf.max(r.norm() / cb_norm[k]);
        }
        let r_lp: Vec<f64> = p.lp.iter().zip(&zeta).map(|(row, z)| row.eval(xs) - z).collect();
        if nlp > 0 {
            pinf = pinf.max(r_lp.iter().map(|v| v * v).sum::<f64>().sqrt() / gnorm);
        }
        let r_eq = &f - e.transpose() * &x;
        if neq > 0 {
            pinf = pinf.max(r_eq.norm() / fnorm);
        }
        let mut aty = vec![0.0; n];
        for (b, st) in p.blocks.iter().zip(&states) {
            b.adjoint_into(&st.y, &mut aty);
        }
        for (row, sk) in p.lp.iter().zip(&s) {
            for &(v, a) in &row.coefs {
                aty[v] += a * sk;
            }
        }
        let mut aty = DVector::from_vec(aty);
        if neq > 0 {
            aty += &e * &lam;
        }
        let r_c = &c - &aty;
        let dinf = r_c.norm() / cnorm;
        let pobj = c.dot(&x) + p.c0;
        let dray = -states.iter().map(|st| inner(&st.constant, &st.y)).sum::<f64>()
            - g.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>()
            + f.dot(&lam);
        let dobj = dray + p.c0;
        let comp = states.iter().map(|st| inner(&st.y, &st.z)).sum::<f64>()
            + s.iter().zip(&zeta).map(|(a, b)| a * b).sum::<f64>();
        let mu = comp / nu;
        let gap = comp.abs().max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());

        result.primal_residual = pinf;
        result.dual_residual = dinf;
        result.gap = gap;
        if !(pinf.is_finite() && dinf.is_finite() && gap.is_finite()) {
            break;
        }
        if settings.verbose {
            eprintln!("{iter:3} pobj {pobj:+.8e} dobj {dobj:+.8e} pinf {pinf:.2e} dinf {dinf:.2e} gap {gap:.2e} mu {mu:.2e}");
        }
        let merit = pinf.max(dinf).max(gap);
        if merit < best_merit {
            best_merit = merit;
            best = Some((x.as_slice().to_vec(), pobj, dobj, pinf, dinf, gap));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 3 && best_merit <= settings.tol_reduced {
                break;
            }
        }
        if pinf <= settings.tol_feas && dinf <= settings.tol_feas && gap <= settings.tol_gap {
            result.status = SolveStatus::Optimal;
            result.x = x.as_slice().to_vec();
            result.primal_objective = pobj / p.obj_scale;
            result.dual_objective = dobj / p.obj_scale;
            return result;
        }
        // Farkas certificate for an infeasible x-problem: a dual ray with positive value.
        if dray > 0.0 && aty.norm() <= settings.tol_infeas * dray && pinf > settings.tol_feas {
            result.status = SolveStatus::Infeasible;
            result.x = x.as_slice().to_vec();
            return result;
        }

        // Schur complement.
        let mut work = Work { zinv: Vec::with_capacity(nb) };
        let mut ok = true;
        for st in &states {
            match spd_inverse(&st.z) {
                Some(zi) => work.zinv.push(sym(&zi)),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let mut m = Mat::zeros(n, n);
        for ((b, st), zi) in p.blocks.iter().zip(&states).zip(&work.zinv) {
            schur_block(b, &st.y, zi, &mut m);
        }
        let d_lp: Vec<f64> = s.iter().zip(&zeta).map(|(a, b)| a / b).collect();
        for (row, dk) in p.lp.iter().zip(&d_lp) {
            for &(vi, ai) in &row.coefs {
                for &(vj, aj) in &row.coefs {
                    m[(vi, vj)] += dk * ai * aj;
                }
            }
        }
        let m = sym(&m);
        let Some(lin) = Linear::new(m, e.clone()) else { break };

        // x -> sum_k A_k^*(sym(Y_k A_k(x) Z_k^-1)) + sum_lp d a a^T x
        let schur_apply = |v: &[f64]| -> DVector<f64> {
            let mut out = vec![0.0; n];
            for k in 0..nb {
                let ak = p.blocks[k].linear_map(v);
                let t = sym(&(&states[k].y * ak * &work.zinv[k]));
                p.blocks[k].adjoint_into(&t, &mut out);
            }
            for (row, dk) in p.lp.iter().zip(&d_lp) {
                let a: f64 = row.coefs.iter().map(|&(vi, c)| c * v[vi]).sum();
                for &(vi, c) in &row.coefs {
                    out[vi] += dk * c * a;
                }
            }
            DVector::from_vec(out)
        };
        let direction = |sigma_mu: f64, corr: Option<&Direction>| -> Option<Direction> {
            let mut gvec = vec![0.0; n];
            let mut tmats = Vec::with_capacity(nb);
            for k in 0..nb {
                let st = &states[k];
                let zi = &work.zinv[k];
                let mut t = zi * sigma_mu - &st.y - &st.y * &rb[k] * zi;
                if let Some(cd) = corr {
                    t -= &cd.dy[k] * &cd.dz[k] * zi;
                }
                let t = sym(&t);
                p.blocks[k].adjoint_into(&t, &mut gvec);
                tmats.push(t);
            }
            let mut tlp = vec![0.0; nlp];
            for k in 0..nlp {
                let mut t = sigma_mu / zeta[k] - s[k] - d_lp[k] * r_lp[k];
                if let Some(cd) = corr {
                    t -= cd.ds[k] * cd.dzeta[k] / zeta[k];
                }
                tlp[k] = t;
                for &(v, a) in &p.lp[k].coefs {
                    gvec[v] += a * t;
                }
            }
            let rhs = DVector::from_vec(gvec) - &r_c;
            let (mut dx, mut dlam) = lin.solve(&rhs, &r_eq)?;
            // Refine against the operator as it is applied below, so that the
            // dual step stays consistent when Z is badly conditioned.
            for _ in 0..2 {
                let res = &rhs - (schur_apply(dx.as_slice()) - &e * &dlam);
                let res_eq = &r_eq - e.transpose() * &dx;
                let (cx, cl) = lin.solve(&res, &res_eq)?;
                dx += cx;
                dlam += cl;
            }
            let dxs = dx.as_slice();
            let mut dz = Vec::with_capacity(nb);
            let mut dy = Vec::with_capacity(nb);
            for k in 0..nb {
                let dzk = &rb[k] + p.blocks[k].linear_map(dxs);
                let st = &states[k];
                let zi = &work.zinv[k];
                let mut dyk = zi * sigma_mu - &st.y - &st.y * &dzk * zi;
                if let Some(cd) = corr {
                    dyk -= &cd.dy[k] * &cd.dz[k] * zi;
                }
                dy.push(sym(&dyk));
                dz.push(dzk);
            }
            let mut dzeta = vec![0.0; nlp];
            let mut ds = vec![0.0; nlp];
            for k in 0..nlp {
                dzeta[k] = r_lp[k] + p.lp[k].coefs.iter().map(|&(v, a)| a * dxs[v]).sum::<f64>();
                let mut t = sigma_mu / zeta[k] - s[k] - d_lp[k] * dzeta[k];
                if let Some(cd) = corr {
                    t -= cd.ds[k] * cd.dzeta[k] / zeta[k];
                }
                ds[k] = t;
            }
            if dx.iter().any(|v| !v.is_finite()) {
                return None;
            }
            Some(Direction { dx, dlam, dz, dy, dzeta, ds })
        };

        let steps = |d: &Direction| -> (f64, f64) {
            let mut ap = max_step_lp(&zeta, &d.dzeta);
            let mut ad = max_step_lp(&s, &d.ds);
            for k in 0..nb {
                ap = ap.min(max_step_psd(&states[k].z, &d.dz[k]));
                ad = ad.min(max_step_psd(&states[k].y, &d.dy[k]));
            }
            (ap, ad)
        };

        let Some(pred) = direction(0.0, None) else { break };
        let (ap_max, ad_max) = steps(&pred);
        let ap = ap_max.min(1.0);
        let ad = ad_max.min(1.0);
        let mut comp_aff = 0.0;
        for k in 0..nb {
            let yk = &states[k].y + &pred.dy[k] * ad;
            let zk = &states[k].z + &pred.dz[k] * ap;
            comp_aff += inner(&yk, &zk);
        }
        for k in 0..nlp {
            comp_aff += (s[k] + ad * pred.ds[k]) * (zeta[k] + ap * pred.dzeta[k]);
        }
        let mu_aff = (comp_aff / nu).max(0.0);
        let expon = if mu > 1e-6 * mu.max(1.0) { (3.0 * ap.min(ad).powi(2)).max(1.0) } else { 3.0 };
        let sigma = (mu_aff / mu).powf(expon).clamp(0.0, 1.0);

        let Some(dir) = direction(sigma * mu, Some(&pred)) else { break };
        let (ap_max, ad_max) = steps(&dir);
        let gamma = 0.9 + 0.09 * ap.min(ad);
        if settings.verbose {
            eprintln!("    sigma {sigma:.2e} alpha_aff {ap:.3} {ad:.3} max {ap_max:.3e} {ad_max:.3e}");
        }
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }

        x += &dir.dx * ap;
        for k in 0..nb {
            states[k].z += &dir.dz[k] * ap;
            states[k].y += &dir.dy[k] * ad;
        }
        for k in 0..nlp {
            zeta[k] += ap * dir.dzeta[k];
            s[k] += ad * dir.ds[k];
        }
        if neq > 0 {
            lam += &dir.dlam * ad;
        }
        if x.norm() > 1e14 {
            break;
        }
    }

    if let Some((bx, pobj, dobj, pinf, dinf, gap)) = best {
        if pinf <= settings.tol_reduced && dinf <= settings.tol_reduced && gap <= settings.tol_reduced {
            result.status = SolveStatus::Optimal;
            result.reduced_accuracy = true;
            result.x = bx;
            result.primal_objective = pobj / p.obj_scale;
            result.dual_objective = dobj / p.obj_scale;
            result.primal_residual = pinf;
            result.dual_residual = dinf;
            result.gap = gap;
            return result;
        }
        result.x = bx;
    }
    result.status = SolveStatus::NumericalFailure;
    result
}
