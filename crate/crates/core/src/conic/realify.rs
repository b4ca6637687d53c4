//! Lowering of complex Hermitian LMIs to real symmetric form.
//!
//! `H = A + iB` maps to `[[A, -B], [B, A]]`. The map is a *-homomorphism, so a
//! congruence `K^H S K` maps to `phi(K)^T phi(S) phi(K)` and the factored
//! structure survives. Blocks whose data is entirely real skip the doubling.

use nalgebra::DMatrix;

use super::model::{ConicProblem, HermExpr, LmiBlock};
use crate::error::Error;
use crate::linalg::CMat;

/// Real symmetric embedding of a complex square (Hermitian) matrix.
pub fn realify(h: &CMat) -> DMatrix<f64> {
    realify_rect(h)
}

/// Embedding of a rectangular complex matrix, `r x n -> 2r x 2n`.
pub fn realify_rect(k: &CMat) -> DMatrix<f64> {
    let (r, n) = k.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * n);
    for j in 0..n {
        for i in 0..r {
            let z = k[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

/// Checked embedding: rejects a non-Hermitian argument.
pub fn realify_hermitian(h: &CMat, tol: f64) -> Result<DMatrix<f64>, Error> {
    if !crate::linalg::is_hermitian(h, tol) {
        return Err(Error::InvalidArgument("realify: coefficient matrix is not Hermitian".into()));
    }
    Ok(realify(h))
}

/// Inverse of [`realify`]: averages the two copies of the real and imaginary parts.
pub fn delift(m: &DMatrix<f64>) -> CMat {
    let n = m.nrows() / 2;
    CMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + n, j + n)]);
        let im = 0.5 * (m[(i + n, j)] - m[(i, j + n)]);
        num_complex::Complex64::new(re, im)
    })
}

/// One real congruence term of a lowered block.
#[derive(Clone, Debug)]
pub struct RealPart {
    /// `r x n`, `None` for the identity.
    pub factor: Option<DMatrix<f64>>,
    pub r: usize,
    pub constant: DMatrix<f64>,
    pub terms: Vec<RealTerm>,
}

#[derive(Clone, Debug)]
pub struct RealTerm {
    pub var: usize,
    /// Full symmetric entry list.
    pub entries: Vec<(usize, usize, f64)>,
    /// Dense copy, kept when the entry list is long.
    pub dense: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct RealBlock {
    pub n: usize,
    pub parts: Vec<RealPart>,
    /// Positive multiplier applied to the whole block.
    pub scale: f64,
    pub label: String,
    pub complex: bool,
}

/// Sparse row `g + a^T x`.
#[derive(Clone, Debug)]
pub struct RealRow {
    pub constant: f64,
    pub coefs: Vec<(usize, f64)>,
    pub scale: f64,
}

impl RealRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coefs.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

/// Real, scaled problem: minimize `c^T x` s.t. blocks PSD, `lp >= 0`, `eq == 0`.
#[derive(Clone, Debug)]
pub struct RealProblem {
    pub n_vars: usize,
    pub c: Vec<f64>,
    pub c0: f64,
    pub obj_scale: f64,
    pub blocks: Vec<RealBlock>,
    pub lp: Vec<RealRow>,
    pub eq: Vec<RealRow>,
}

const DENSE_TERM_FACTOR: usize = 2;

fn is_real_expr(e: &HermExpr) -> bool {
    e.constant.iter().all(|z| z.im == 0.0) && e.terms.iter().all(|(_, s)| s.is_real())
}

fn block_is_real(b: &LmiBlock) -> bool {
    b.parts.iter().all(|p| is_real_expr(&p.inner) && p.factor.as_ref().is_none_or(|k| k.iter().all(|z| z.im == 0.0)))
}

fn lower_block(b: &LmiBlock) -> RealBlock {
    let complex = !block_is_real(b);
    let mut parts = Vec::with_capacity(b.parts.len());
    let mut coef_bound: f64 = 0.0;
    for p in &b.parts {
        let inner = p.inner.compact();
        let r = if complex { 2 * inner.dim } else { inner.dim };
        let factor = p.factor.as_ref().map(|k| if complex { realify_rect(k) } else { k.map(|z| z.re) });
        let constant = if complex { realify(&inner.constant) } else { inner.constant.map(|z| z.re) };
        let kf2 = factor.as_ref().map_or(1.0, |k| k.norm_squared());
        let mut terms = Vec::with_capacity(inner.terms.len());
        for (v, s) in &inner.terms {
            let mut entries = Vec::with_capacity(s.entries.len() * 4);
            let d = inner.dim;
            for &(i, j, z) in &s.entries {
                if complex {
                    if z.re != 0.0 {
                        entries.push((i, j, z.re));
                        entries.push((i + d, j + d, z.re));
                    }
                    if z.im != 0.0 {
                        entries.push((i, j + d, -z.im));
                        entries.push((i + d, j, z.im));
                    }
                } else if z.re != 0.0 {
                    entries.push((i, j, z.re));
                }
            }
            let fro = entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
            coef_bound = coef_bound.max(fro * kf2);
            let dense = (entries.len() > DENSE_TERM_FACTOR * r).then(|| {
                let mut m = DMatrix::zeros(r, r);
                for &(i, j, v) in &entries {
                    m[(i, j)] += v;
                }
                m
            });
            terms.push(RealTerm { var: v.0, entries, dense });
        }
        terms.sort_by_key(|t| t.var);
        parts.push(RealPart { factor, r, constant, terms });
    }
    let n = if complex { 2 * b.size } else { b.size };
    let mut block = RealBlock { n, parts, scale: 1.0, label: b.label.clone(), complex };
    let cnorm = block_constant(&block).norm();
    let s = 1.0 / cnorm.max(coef_bound).max(1e-300);
    apply_scale(&mut block, s);
    block
}

fn apply_scale(b: &mut RealBlock, s: f64) {
    b.scale *= s;
    for p in &mut b.parts {
        p.constant *= s;
        for t in &mut p.terms {
            for e in &mut t.entries {
                e.2 *= s;
            }
            if let Some(d) = &mut t.dense {
                *d *= s;
            }
        }
    }
}

/// Lifted constant `sum K^T C K` of a real block.
pub fn block_constant(b: &RealBlock) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(b.n, b.n);
    for p in &b.parts {
        match &p.factor {
            None => out += &p.constant,
            Some(k) => out += k.transpose() * &p.constant * k,
        }
    }
    out
}

fn lower_row(e: &super::model::AffExpr) -> RealRow {
    let e = e.compact();
    let norm = e.terms.iter().map(|t| t.1.abs()).fold(e.constant.abs(), f64::max);
    let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
    RealRow {
        constant: e.constant * s,
        coefs: e.terms.iter().map(|&(v, c)| (v.0, c * s)).collect(),
        scale: s,
    }
}

/// Lower a complex problem to scaled real form.
pub fn lower(problem: &ConicProblem) -> Result<RealProblem, Error> {
    problem.validate().map_err(Error::InvalidArgument)?;
    for b in &problem.lmis {
        for p in &b.parts {
            for (_, s) in &p.inner.terms {
                let d = s.to_dense(p.inner.dim);
                if !crate::linalg::is_hermitian(&d, 1e-12) {
                    return Err(Error::InvalidArgument(format!("{}: non-Hermitian coefficient", b.label)));
                }
            }
            if !crate::linalg::is_hermitian(&p.inner.constant, 1e-12) {
                return Err(Error::InvalidArgument(format!("{}: non-Hermitian constant", b.label)));
            }
        }
    }
    let n = problem.n_vars();
    let obj = problem.objective.compact();
    let mut c = vec![0.0; n];
    for &(v, coef) in &obj.terms {
        c[v.0] += coef;
    }
    let cmax = c.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let obj_scale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
    for ci in &mut c {
        *ci *= obj_scale;
    }
    Ok(RealProblem {
        n_vars: n,
        c,
        c0: obj.constant * obj_scale,
        obj_scale,
        blocks: problem.lmis.iter().map(lower_block).collect(),
        lp: problem.ineqs.iter().map(|k| lower_row(&k.expr)).collect(),
        eq: problem.eqs.iter().map(|k| lower_row(&k.expr)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr, sym_eigvals};

    #[test]
    fn identity_maps_to_identity() {
        let r = realify(&CMat::identity(2, 2));
        assert_eq!(r, DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn known_spectrum_is_doubled() {
        let h = CMat::from_row_slice(2, 2, &[cr(0.0), c(0.0, 1.0), c(0.0, -1.0), cr(0.0)]);
        let ev = sym_eigvals(&realify(&h));
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let m = CMat::from_row_slice(2, 2, &[cr(1.0), cr(2.0), cr(0.0), cr(1.0)]);
        assert!(realify_hermitian(&m, 1e-12).is_err());
    }

    #[test]
    fn delift_inverts_realify() {
        let h = CMat::from_row_slice(2, 2, &[cr(1.0), c(2.0, -3.0), c(2.0, 3.0), cr(-4.0)]);
        let back = delift(&realify(&h));
        assert!(crate::linalg::fro(&(back - &h)) < 1e-15);
    }
}
