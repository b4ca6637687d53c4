//! Finite LMIs certifying the worst-case secrecy constraint.
//!
//! With `W' = gamma_M W_AN - W_i` and `F = [Theta H_BI; I]`, secrecy for every
//! stacked error `||D||_F <= eps` is `(X_hat + D)^H V (X_hat + D) + gamma_M I >= 0`
//! with `V = F W' F^H`. The S-procedure turns this into
//!
//! ```text
//! [ X^H V X + (gamma_M - tau) I    X^H V                  ]
//! [ V X                            V + tau eps^-2 I_(M+Nt) ]  >= 0
//! ```
//!
//! which equals `P^H V P + diag((gamma_M - tau) I, tau eps^-2 I)` for
//! `P = [X_hat, I]`. Blocks are emitted after the congruence `diag(I, eps I)`,
//! i.e. as `P_e^H V P_e + diag((gamma_M - tau) I, tau I)` with
//! `P_e = [X_hat, eps I]`.

use num_complex::Complex64;

use crate::channel::{cascade_factor, ChannelSet};
use crate::conic::model::{HermExpr, LmiBlock, LmiPart, SparseHerm, VarId};
use crate::error::{Error, Result};
use crate::linalg::{cr, herm_eig, hstack, CMat, CVec};

/// `2^R - 1`.
pub fn sinr_threshold(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

pub fn build_w_prime(w_an: &CMat, w_i: &CMat, r_m: f64) -> CMat {
    w_an * cr(sinr_threshold(r_m)) - w_i
}

/// Affine version of `W'` over matrix expressions.
pub fn w_prime_expr(w_an: &HermExpr, w_i: &HermExpr, r_m: f64) -> HermExpr {
    w_an.scale(sinr_threshold(r_m)).add(&w_i.scale(-1.0))
}

#[derive(Clone, Debug)]
pub struct StackedChannel {
    /// `[G_Ie; G_Be]`, IRS block first.
    pub x_hat: CMat,
    pub eps_e: f64,
}

impl StackedChannel {
    pub fn from_channels(cs: &ChannelSet) -> Self {
        Self { x_hat: cs.x_hat(), eps_e: cs.eps_e }
    }
}

/// `V = [Theta H; I] W' [Theta H; I]^H`.
pub fn build_joint_v(theta: &CVec, h_bi: &CMat, w_prime: &CMat) -> Result<CMat> {
    if theta.len() != h_bi.nrows() || w_prime.nrows() != h_bi.ncols() || !w_prime.is_square() {
        return Err(Error::DimensionMismatch("build_joint_v".into()));
    }
    let f = cascade_factor(theta, h_bi);
    Ok(&f * w_prime * f.adjoint())
}

/// `[X_hat, eps I]`: the S-procedure factor with its perturbation columns
/// scaled by `eps`, which keeps the multiplier block of order one.
fn sproc_p(x_hat: &CMat, eps_e: f64) -> CMat {
    let k = x_hat.nrows();
    hstack(x_hat, &(CMat::identity(k, k) * cr(eps_e)))
}

fn tau_part(ne: usize, k: usize, tau: VarId, gamma_m: f64) -> LmiPart {
    let n = ne + k;
    let mut c = CMat::zeros(n, n);
    let mut coef = Vec::with_capacity(n);
    for a in 0..ne {
        c[(a, a)] = cr(gamma_m);
        coef.push((a, a, cr(-1.0)));
    }
    for a in ne..n {
        coef.push((a, a, cr(1.0)));
    }
    let mut e = HermExpr::constant(c);
    e.terms.push((tau, SparseHerm { entries: coef }));
    LmiPart::direct(e)
}

/// S-procedure LMI for a `V` given as a sum of congruence parts, each of
/// output dimension `M + N_t`.
pub fn build_sprocedure_lmi(x_hat: &CMat, v_parts: Vec<LmiPart>, tau: VarId, r_m: f64, eps_e: f64, label: &str) -> Result<LmiBlock> {
    if !(eps_e > 0.0) {
        return Err(Error::DegenerateRadius);
    }
    let k = x_hat.nrows();
    let ne = x_hat.ncols();
    let p = sproc_p(x_hat, eps_e);
    let mut block = LmiBlock::new(ne + k, label);
    for part in v_parts {
        if part.out_dim() != k {
            return Err(Error::DimensionMismatch(format!("{label}: V part has dimension {}, expected {k}", part.out_dim())));
        }
        let factor = match &part.factor {
            None => p.clone(),
            Some(f) => f * &p,
        };
        block.push(LmiPart::congruence(factor, part.inner));
    }
    block.push(tau_part(ne, k, tau, sinr_threshold(r_m)));
    Ok(block)
}

/// Active-stage secrecy LMI: `V = F W' F^H` with `W'` affine in the transmit
/// covariances, kept as the rank-`N_t` congruence `(F^H P)^H W' (F^H P)`.
pub fn active_secrecy_lmi(
    cs: &ChannelSet,
    theta: &CVec,
    w_prime: HermExpr,
    tau: VarId,
    r_m: f64,
    label: &str,
) -> Result<LmiBlock> {
    let f = cascade_factor(theta, &cs.h_bi);
    build_sprocedure_lmi(&cs.x_hat(), vec![LmiPart::congruence(f.adjoint(), w_prime)], tau, r_m, cs.eps_e, label)
}

/// Evaluate the S-procedure matrix for numeric `V` and `tau`, in the
/// coordinates `diag(I, eps I)` used by [`build_sprocedure_lmi`].
pub fn sprocedure_matrix(x_hat: &CMat, v: &CMat, tau: f64, r_m: f64, eps_e: f64) -> CMat {
    let k = x_hat.nrows();
    let ne = x_hat.ncols();
    let p = sproc_p(x_hat, eps_e);
    let mut m = p.adjoint() * v * &p;
    let g = sinr_threshold(r_m);
    for a in 0..ne {
        m[(a, a)] += cr(g - tau);
    }
    for a in ne..ne + k {
        m[(a, a)] += cr(tau);
    }
    m
}

/// The quadratic form of the original semi-infinite constraint at a stacked
/// perturbation `d`: `(X_hat + d)^H V (X_hat + d) + gamma_M I`.
pub fn secrecy_form(x_hat: &CMat, d: &CMat, v: &CMat, r_m: f64) -> CMat {
    let x = x_hat + d;
    let ne = x.ncols();
    x.adjoint() * v * &x + CMat::identity(ne, ne) * cr(sinr_threshold(r_m))
}

/// Rank-one terms `K = sum_p s_p d_p^H` of `K = H_BI W' H_BI^H`.
#[derive(Clone, Debug, Default)]
pub struct SvdTerms {
    pub terms: Vec<(CVec, CVec)>,
}

impl SvdTerms {
    pub fn reconstruct(&self, m: usize) -> CMat {
        let mut k = CMat::zeros(m, m);
        for (s, d) in &self.terms {
            k += s * d.adjoint();
        }
        k
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Eigen-factorization of the Hermitian product, `s_p = lambda_p q_p`,
/// `d_p = q_p`, dropping terms below `1e-12` of the largest magnitude.
pub fn svd_outer_terms(h_bi: &CMat, w_prime: &CMat) -> SvdTerms {
    let k = h_bi * w_prime * h_bi.adjoint();
    let (vals, vecs) = herm_eig(&k);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut terms = Vec::new();
    if top == 0.0 {
        return SvdTerms { terms };
    }
    for (p, &l) in vals.iter().enumerate() {
        if l.abs() > 1e-12 * top {
            let q = vecs.column(p).into_owned();
            terms.push((&q * cr(l), q));
        }
    }
    SvdTerms { terms }
}

/// `V` as an affine function of the lifted variable `U = u u^H`,
/// `u = [conj(theta); 1]`:
///
/// ```text
/// V(U) = [ sum_p diag(s_p) U^T diag(conj d_p)    diag(U_(M+1,1:M)) H W' ]
///        [ (.)^H                                 W'                     ]
/// ```
///
/// The top-left block is `K o U^T`, applied entry-wise to every coefficient.
pub fn build_v_affine_in_u(u: &HermExpr, h_bi: &CMat, w_prime: &CMat, terms: &SvdTerms) -> Result<HermExpr> {
    let m = h_bi.nrows();
    let nt = h_bi.ncols();
    if u.dim != m + 1 || w_prime.nrows() != nt {
        return Err(Error::DimensionMismatch("build_v_affine_in_u".into()));
    }
    let k = terms.reconstruct(m);
    let hw = h_bi * w_prime;
    let map = |s: &SparseHerm| -> SparseHerm {
        let mut out = Vec::new();
        for &(a, b, z) in &s.entries {
            if a < m && b < m {
                // U_ab sits at (b, a) of U^T
                out.push((b, a, k[(b, a)] * z));
            } else if a == m && b < m {
                for j in 0..nt {
                    out.push((b, m + j, z * hw[(b, j)]));
                }
            } else if b == m && a < m {
                for j in 0..nt {
                    out.push((m + j, a, z * hw[(a, j)].conj()));
                }
            }
        }
        SparseHerm { entries: out }.compact()
    };
    let mut v = HermExpr::zeros(m + nt);
    let mut constant = CMat::zeros(m + nt, m + nt);
    constant.view_mut((m, m), (nt, nt)).copy_from(w_prime);
    let cmap = map(&SparseHerm::from_dense(&u.constant));
    for &(i, j, z) in &cmap.entries {
        constant[(i, j)] += z;
    }
    v.constant = constant;
    for (var, s) in &u.terms {
        let t = map(s);
        if !t.entries.is_empty() {
            v.terms.push((*var, t));
        }
    }
    Ok(v)
}

/// Lift of a reflection vector, `u = [conj(theta); 1]`.
pub fn lift(theta: &CVec) -> CVec {
    let m = theta.len();
    CVec::from_iterator(m + 1, theta.iter().map(|z| z.conj()).chain(std::iter::once(Complex64::new(1.0, 0.0))))
}
