//! Achievable rates, eavesdropping rates, transmit power, and a post-hoc
//! feasibility check with a sampled worst-case eavesdropper.

use rand::Rng;
use serde::Serialize;

use crate::channel::{cascade_factor, effective_channels, sample_uncertainty, ChannelSet, EffectiveChannels};
use crate::linalg::{ln_det_hpd, outer, rank_one_ratio, trace_re, CMat, CVec};

/// Transmit covariances, optional rank-one factors, and the reflection vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerSolution {
    pub w1_mat: CMat,
    pub w2_mat: CMat,
    pub w_an: CMat,
    pub w1: Option<CVec>,
    pub w2: Option<CVec>,
    pub theta: CVec,
    pub tau1: f64,
    pub tau2: f64,
}

impl BeamformerSolution {
    pub fn zeros(nt: usize, m: usize) -> Self {
        Self {
            w1_mat: CMat::zeros(nt, nt),
            w2_mat: CMat::zeros(nt, nt),
            w_an: CMat::zeros(nt, nt),
            w1: None,
            w2: None,
            theta: CVec::from_element(m, num_complex::Complex64::new(1.0, 0.0)),
            tau1: 0.0,
            tau2: 0.0,
        }
    }

    /// Signal covariance of stream `i` (1 or 2): `w w^H` when the factor is
    /// present, the matrix otherwise.
    pub fn covariance(&self, i: usize) -> CMat {
        match (i, &self.w1, &self.w2) {
            (1, Some(w), _) | (2, _, Some(w)) => outer(w, w),
            (1, None, _) => self.w1_mat.clone(),
            _ => self.w2_mat.clone(),
        }
    }

    fn gain(&self, h: &CVec, i: usize) -> f64 {
        let f = if i == 1 { &self.w1 } else { &self.w2 };
        match f {
            Some(w) => h.dotc(w).norm_sqr(),
            None => quad(h, if i == 1 { &self.w1_mat } else { &self.w2_mat }),
        }
    }

    pub fn rank_ratios(&self) -> (f64, f64) {
        (rank_one_ratio(&self.w1_mat), rank_one_ratio(&self.w2_mat))
    }
}

/// `h^H W h` (real part).
pub fn quad(h: &CVec, w: &CMat) -> f64 {
    h.dotc(&(w * h)).re
}

fn log2_1p(x: f64) -> f64 {
    (1.0 + x.max(0.0)).log2()
}

/// Rate at U1 for its own stream after SIC.
pub fn rate_u1_s1(h1: &CVec, sol: &BeamformerSolution) -> f64 {
    log2_1p(sol.gain(h1, 1) / (quad(h1, &sol.w_an) + 1.0))
}

/// Rate at U1 for U2's stream (first SIC stage).
pub fn rate_u1_s2(h1: &CVec, sol: &BeamformerSolution) -> f64 {
    log2_1p(sol.gain(h1, 2) / (sol.gain(h1, 1) + quad(h1, &sol.w_an) + 1.0))
}

/// Rate at U2 for its own stream, treating stream 1 as noise.
pub fn rate_u2_s2(h2: &CVec, sol: &BeamformerSolution) -> f64 {
    log2_1p(sol.gain(h2, 2) / (sol.gain(h2, 1) + quad(h2, &sol.w_an) + 1.0))
}

/// `log2 det(I + Q^-1 G^H W_i G)` with `Q = G^H W_AN G + I`.
pub fn eaves_rate(g_e: &CMat, sol: &BeamformerSolution, i: usize) -> f64 {
    eaves_rate_cov(g_e, &sol.covariance(i), &sol.w_an)
}

pub fn eaves_rate_cov(g_e: &CMat, w: &CMat, w_an: &CMat) -> f64 {
    let ne = g_e.ncols();
    let q = g_e.adjoint() * w_an * g_e + CMat::identity(ne, ne);
    let s = &q + g_e.adjoint() * w * g_e;
    let (Some(a), Some(b)) = (ln_det_hpd(&s), ln_det_hpd(&q)) else { return f64::NAN };
    ((a - b) / std::f64::consts::LN_2).max(0.0)
}

pub fn total_power(sol: &BeamformerSolution) -> f64 {
    trace_re(&sol.w1_mat) + trace_re(&sol.w2_mat) + trace_re(&sol.w_an)
}

/// Power with the rank-one factors in place of the signal matrices.
pub fn total_power_factors(sol: &BeamformerSolution) -> f64 {
    trace_re(&sol.covariance(1)) + trace_re(&sol.covariance(2)) + trace_re(&sol.w_an)
}

/// Eavesdropping rate as a function of the stacked perturbation, with the
/// cascade folded in: `G_e^H = (X_hat + D)^H F`, `F = [Theta H_BI; I]`.
///
/// With `A = F W F^H`, `B = F W_AN F^H` and `X = X_hat + D`, the rate is
/// `log det(I + X^H (A + B) X) - log det(I + X^H B X)`.
#[derive(Clone, Debug)]
pub struct EavesModel {
    x_hat: CMat,
    a_plus_b: CMat,
    b: CMat,
    m: usize,
    eps_ie: f64,
    eps_be: f64,
}

impl EavesModel {
    pub fn new(cs: &ChannelSet, sol: &BeamformerSolution, i: usize) -> Self {
        let f = cascade_factor(&sol.theta, &cs.h_bi);
        let a = &f * sol.covariance(i) * f.adjoint();
        let b = &f * &sol.w_an * f.adjoint();
        Self { x_hat: cs.x_hat(), a_plus_b: a + &b, b, m: cs.dims().m, eps_ie: cs.eps_ie, eps_be: cs.eps_be }
    }

    /// Rate at the stacked perturbation `d = [dG_Ie; dG_Be]`.
    pub fn rate(&self, d: &CMat) -> f64 {
        let x = &self.x_hat + d;
        let ne = x.ncols();
        let id = CMat::identity(ne, ne);
        let s = &id + x.adjoint() * &self.a_plus_b * &x;
        let q = id + x.adjoint() * &self.b * &x;
        match (ln_det_hpd(&s), ln_det_hpd(&q)) {
            (Some(a), Some(b)) => ((a - b) / std::f64::consts::LN_2).max(0.0),
            _ => f64::NAN,
        }
    }

    /// Analytic ascent direction `2 df/dD*` (in log2 units).
    pub fn gradient(&self, d: &CMat) -> CMat {
        let x = &self.x_hat + d;
        let ne = x.ncols();
        let id = CMat::identity(ne, ne);
        let ax = &self.a_plus_b * &x;
        let bx = &self.b * &x;
        let s = (&id + x.adjoint() * &ax).try_inverse().unwrap_or_else(|| id.clone());
        let q = (&id + x.adjoint() * &bx).try_inverse().unwrap_or(id);
        (ax * s - bx * q) * num_complex::Complex64::from(2.0 / std::f64::consts::LN_2)
    }

    /// Central-difference gradient with step `h`, entry by entry over real and
    /// imaginary parts.
    pub fn numerical_gradient(&self, d: &CMat, h: f64) -> CMat {
        let mut g = CMat::zeros(d.nrows(), d.ncols());
        let mut p = d.clone();
        for j in 0..d.ncols() {
            for i in 0..d.nrows() {
                let z = d[(i, j)];
                p[(i, j)] = z + num_complex::Complex64::new(h, 0.0);
                let fp = self.rate(&p);
                p[(i, j)] = z - num_complex::Complex64::new(h, 0.0);
                let fm = self.rate(&p);
                let gr = (fp - fm) / (2.0 * h);
                p[(i, j)] = z + num_complex::Complex64::new(0.0, h);
                let fp = self.rate(&p);
                p[(i, j)] = z - num_complex::Complex64::new(0.0, h);
                let fm = self.rate(&p);
                let gi = (fp - fm) / (2.0 * h);
                p[(i, j)] = z;
                g[(i, j)] = num_complex::Complex64::new(gr, gi);
            }
        }
        g
    }

    /// Scale each sub-block back into its ball.
    pub fn project(&self, d: &mut CMat) {
        let m = self.m;
        let ne = d.ncols();
        let nt = d.nrows() - m;
        for (row0, rows, eps) in [(0, m, self.eps_ie), (m, nt, self.eps_be)] {
            let mut blk = d.view_mut((row0, 0), (rows, ne));
            let n = blk.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n > eps {
                blk *= num_complex::Complex64::from(if n > 0.0 { eps / n } else { 0.0 });
            }
        }
    }

    pub fn stack(&self, di: &CMat, db: &CMat) -> CMat {
        crate::linalg::vstack(di, db)
    }

    /// Projected ascent from `d` using central differences, returning the
    /// best rate seen.
    pub fn ascend(&self, mut d: CMat, steps: usize) -> f64 {
        let eps = self.eps_ie + self.eps_be;
        let mut best = self.rate(&d);
        if eps == 0.0 {
            return best;
        }
        let h = 1e-6 * eps;
        let mut step = 0.25 * eps;
        for _ in 0..steps {
            let g = self.numerical_gradient(&d, h);
            let gn = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(gn > 0.0) {
                break;
            }
            loop {
                let mut cand = &d + &g * num_complex::Complex64::from(step / gn);
                self.project(&mut cand);
                let r = self.rate(&cand);
                if r > best {
                    best = r;
                    d = cand;
                    break;
                }
                step *= 0.5;
                if step < 1e-6 * eps {
                    return best;
                }
            }
        }
        best
    }
}

/// Lower bound on the worst-case eavesdropping rate of stream `i`: the
/// estimate itself plus `n_samples` boundary perturbations, each refined by
/// `n_ascent_steps` of projected ascent.
pub fn worst_case_eaves_rate<R: Rng + ?Sized>(
    cs: &ChannelSet,
    sol: &BeamformerSolution,
    i: usize,
    n_samples: usize,
    n_ascent_steps: usize,
    rng: &mut R,
) -> f64 {
    let model = EavesModel::new(cs, sol, i);
    let dims = cs.dims();
    let mut best = model.rate(&CMat::zeros(dims.m + dims.nt, dims.ne));
    if cs.eps_e == 0.0 {
        return best;
    }
    for _ in 0..n_samples {
        let (di, db) = sample_uncertainty(cs.eps_ie, cs.eps_be, dims, true, rng);
        best = best.max(model.ascend(model.stack(&di, &db), n_ascent_steps));
    }
    best
}

/// Largest eavesdropping rate of stream `i` over `n` perturbations drawn
/// uniformly inside the two balls, without refinement.
pub fn sampled_max_eaves_rate<R: Rng + ?Sized>(cs: &ChannelSet, sol: &BeamformerSolution, i: usize, n: usize, rng: &mut R) -> f64 {
    let model = EavesModel::new(cs, sol, i);
    let dims = cs.dims();
    let mut best = model.rate(&CMat::zeros(dims.m + dims.nt, dims.ne));
    for _ in 0..n {
        let (di, db) = sample_uncertainty(cs.eps_ie, cs.eps_be, dims, false, rng);
        best = best.max(model.rate(&model.stack(&di, &db)));
    }
    best
}

#[derive(Clone, Debug)]
pub struct OracleParams {
    /// Uniform interior samples.
    pub n_plain: usize,
    /// Boundary starts refined by ascent.
    pub n_ascent_starts: usize,
    pub n_ascent_steps: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { n_plain: 10_000, n_ascent_starts: 8, n_ascent_steps: 25 }
    }
}

/// Outcome of [`check_feasibility`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub r11: f64,
    pub r12: f64,
    pub r22: f64,
    pub re1_wc: f64,
    pub re2_wc: f64,
    pub qos_ok: bool,
    pub sic_ok: bool,
    pub order_ok: bool,
    pub secrecy_ok: bool,
    pub reflection_ok: bool,
    pub psd_ok: bool,
    pub total_power: f64,
}

impl FeasibilityReport {
    /// Column order of [`FeasibilityReport::csv_row`].
    pub const CSV_HEADER: &'static str =
        "r11,r12,r22,re1_wc,re2_wc,qos_ok,sic_ok,order_ok,secrecy_ok,reflection_ok,psd_ok,total_power";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.r11,
            self.r12,
            self.r22,
            self.re1_wc,
            self.re2_wc,
            self.qos_ok,
            self.sic_ok,
            self.order_ok,
            self.secrecy_ok,
            self.reflection_ok,
            self.psd_ok,
            self.total_power
        )
    }

    pub fn all_ok(&self) -> bool {
        self.qos_ok && self.sic_ok && self.order_ok && self.secrecy_ok && self.reflection_ok && self.psd_ok
    }

    /// Largest sampled eavesdropping rate minus `R_M`.
    pub fn secrecy_margin(&self, r_m: f64) -> f64 {
        self.re1_wc.max(self.re2_wc) - r_m
    }
}

/// Evaluate every constraint family of the design problem at `sol`.
///
/// Rate conditions use `tol` in bps/Hz; the ordering condition uses `tol`
/// relative to `||h1||^2`; the reflection bound is `|theta_m| <= 1 + 1e-9`.
pub fn check_feasibility<R: Rng + ?Sized>(
    cs: &ChannelSet,
    sol: &BeamformerSolution,
    r_q: f64,
    r_m: f64,
    tol: f64,
    oracle: &OracleParams,
    rng: &mut R,
) -> FeasibilityReport {
    let EffectiveChannels { h1, h2, .. } = match effective_channels(cs, None, &sol.theta) {
        Ok(e) => e,
        Err(_) => {
            return FeasibilityReport {
                r11: 0.0,
                r12: 0.0,
                r22: 0.0,
                re1_wc: f64::INFINITY,
                re2_wc: f64::INFINITY,
                qos_ok: false,
                sic_ok: false,
                order_ok: false,
                secrecy_ok: false,
                reflection_ok: false,
                psd_ok: false,
                total_power: total_power(sol),
            }
        }
    };
    let r11 = rate_u1_s1(&h1, sol);
    let r12 = rate_u1_s2(&h1, sol);
    let r22 = rate_u2_s2(&h2, sol);
    let mut wc = [0.0; 2];
    for (k, i) in [1usize, 2].into_iter().enumerate() {
        let a = sampled_max_eaves_rate(cs, sol, i, oracle.n_plain, rng);
        let b = worst_case_eaves_rate(cs, sol, i, oracle.n_ascent_starts, oracle.n_ascent_steps, rng);
        wc[k] = a.max(b);
    }
    let n1 = h1.norm_squared();
    let n2 = h2.norm_squared();
    let psd_tol = 1e-7;
    let psd_ok = [&sol.w1_mat, &sol.w2_mat, &sol.w_an]
        .iter()
        .all(|m| crate::linalg::min_eig(m) >= -psd_tol * trace_re(m).abs().max(1.0));
    FeasibilityReport {
        r11,
        r12,
        r22,
        re1_wc: wc[0],
        re2_wc: wc[1],
        qos_ok: r11 >= r_q - tol && r22 >= r_q - tol,
        sic_ok: r12 >= r22 - tol,
        order_ok: n1 - n2 >= -tol * n1.max(f64::MIN_POSITIVE),
        secrecy_ok: wc[0] <= r_m + tol && wc[1] <= r_m + tol,
        reflection_ok: sol.theta.iter().all(|z| z.norm() <= 1.0 + 1e-9),
        psd_ok,
        total_power: total_power(sol),
    }
}
