//! Affine expressions over real decision variables and the conic problem container.
//!
//! Every decision variable is a real scalar. A Hermitian matrix variable of size
//! `n` owns `n^2` scalars (diagonal, real and imaginary parts of the upper
//! triangle). LMI blocks are sums of congruences `K^H E(x) K`, where `E` is a
//! Hermitian expression with sparse coefficients; keeping the factor `K`
//! separate is what lets the solver form its Schur complement cheaply.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::linalg::{cr, CMat, I};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Sparse Hermitian coefficient matrix stored as a full list of entries
/// (both triangles present).
#[derive(Clone, Debug, Default)]
pub struct SparseHerm {
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseHerm {
    pub fn unit_diag(k: usize) -> Self {
        Self { entries: vec![(k, k, cr(1.0))] }
    }

    /// Coefficient of the real part of the `(a, b)` entry, `a != b`.
    pub fn unit_re(a: usize, b: usize) -> Self {
        Self { entries: vec![(a, b, cr(1.0)), (b, a, cr(1.0))] }
    }

    /// Coefficient of the imaginary part of the `(a, b)` entry, `a != b`.
    pub fn unit_im(a: usize, b: usize) -> Self {
        Self { entries: vec![(a, b, I), (b, a, -I)] }
    }

    pub fn from_dense(m: &CMat) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v.norm_sqr() > 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self { entries }
    }

    pub fn to_dense(&self, n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self { entries: self.entries.iter().map(|&(i, j, v)| (i, j, v * s)).collect() }
    }

    /// Transpose, which for a Hermitian matrix is the elementwise conjugate.
    pub fn transpose(&self) -> Self {
        Self { entries: self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect() }
    }

    pub fn shifted(&self, row: usize, col: usize) -> Self {
        Self { entries: self.entries.iter().map(|&(i, j, v)| (i + row, j + col, v)).collect() }
    }

    /// Merge duplicate positions and drop exact zeros.
    pub fn compact(&self) -> Self {
        let mut map: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for &(i, j, v) in &self.entries {
            *map.entry((j, i)).or_insert(cr(0.0)) += v;
        }
        Self {
            entries: map
                .into_iter()
                .filter(|(_, v)| v.norm_sqr() > 0.0)
                .map(|((j, i), v)| (i, j, v))
                .collect(),
        }
    }

    /// `Re Tr(H S)` for a dense Hermitian `H`.
    pub fn trace_with(&self, h: &CMat) -> f64 {
        self.entries.iter().map(|&(i, j, v)| (h[(j, i)] * v).re).sum()
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|(_, _, v)| v.im == 0.0)
    }
}

/// Real affine scalar expression `constant + sum coef * x`.
#[derive(Clone, Debug, Default)]
pub struct AffExpr {
    pub constant: f64,
    pub terms: Vec<(VarId, f64)>,
}

impl AffExpr {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn var(v: VarId) -> Self {
        Self { constant: 0.0, terms: vec![(v, 1.0)] }
    }

    pub fn add(mut self, other: &AffExpr) -> Self {
        self.constant += other.constant;
        self.terms.extend_from_slice(&other.terms);
        self
    }

    pub fn sub(self, other: &AffExpr) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
        }
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus_var(mut self, v: VarId, coef: f64) -> Self {
        self.terms.push((v, coef));
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Merge repeated variables.
    pub fn compact(&self) -> Self {
        let mut map: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *map.entry(v).or_insert(0.0) += c;
        }
        Self {
            constant: self.constant,
            terms: map.into_iter().filter(|(_, c)| *c != 0.0).collect(),
        }
    }
}

/// Hermitian matrix expression `C + sum x_i S_i`.
#[derive(Clone, Debug)]
pub struct HermExpr {
    pub dim: usize,
    pub constant: CMat,
    pub terms: Vec<(VarId, SparseHerm)>,
}

impl HermExpr {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, constant: CMat::zeros(dim, dim), terms: Vec::new() }
    }

    pub fn constant(m: CMat) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self { dim: m.nrows(), constant: m, terms: Vec::new() }
    }

    /// `x * M` for a single scalar variable.
    pub fn scalar_times(v: VarId, m: &CMat) -> Self {
        Self { dim: m.nrows(), constant: CMat::zeros(m.nrows(), m.ncols()), terms: vec![(v, SparseHerm::from_dense(m))] }
    }

    pub fn add(&self, other: &HermExpr) -> Self {
        assert_eq!(self.dim, other.dim, "hermitian expression size mismatch");
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { dim: self.dim, constant: &self.constant + &other.constant, terms }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            constant: &self.constant * cr(s),
            terms: self.terms.iter().map(|(v, m)| (*v, m.scaled(cr(s)))).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            dim: self.dim,
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(v, m)| (*v, m.transpose())).collect(),
        }
    }

    /// Place this expression at `(offset, offset)` inside a zero matrix of size `dim`.
    pub fn embed(&self, dim: usize, offset: usize) -> Self {
        assert!(offset + self.dim <= dim);
        let mut constant = CMat::zeros(dim, dim);
        constant.view_mut((offset, offset), (self.dim, self.dim)).copy_from(&self.constant);
        Self {
            dim,
            constant,
            terms: self.terms.iter().map(|(v, m)| (*v, m.shifted(offset, offset))).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        let mut m = self.constant.clone();
        for (v, s) in &self.terms {
            let xv = x[v.0];
            if xv != 0.0 {
                for &(i, j, c) in &s.entries {
                    m[(i, j)] += c * xv;
                }
            }
        }
        m
    }

    /// `Re Tr(H E)` as an affine scalar, for a constant Hermitian `H`.
    pub fn trace_with(&self, h: &CMat) -> AffExpr {
        AffExpr {
            constant: crate::linalg::trace_prod(h, &self.constant),
            terms: self.terms.iter().map(|(v, s)| (*v, s.trace_with(h))).filter(|(_, c)| *c != 0.0).collect(),
        }
    }

    pub fn trace(&self) -> AffExpr {
        self.trace_with(&CMat::identity(self.dim, self.dim))
    }

    /// Real part of entry `(i, j)` as an affine scalar.
    pub fn entry_re(&self, i: usize, j: usize) -> AffExpr {
        let mut terms = Vec::new();
        for (v, s) in &self.terms {
            let coef: f64 = s.entries.iter().filter(|e| e.0 == i && e.1 == j).map(|e| e.2.re).sum();
            if coef != 0.0 {
                terms.push((*v, coef));
            }
        }
        AffExpr { constant: self.constant[(i, j)].re, terms }
    }

    /// Coefficient matrix of variable `v` (dense, summed over repeats).
    pub fn coefficient(&self, v: VarId) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (w, s) in &self.terms {
            if *w == v {
                m += s.to_dense(self.dim);
            }
        }
        m
    }

    /// Merge repeated variables into one sparse coefficient each.
    pub fn compact(&self) -> Self {
        let mut map: BTreeMap<VarId, Vec<(usize, usize, Complex64)>> = BTreeMap::new();
        for (v, s) in &self.terms {
            map.entry(*v).or_default().extend_from_slice(&s.entries);
        }
        Self {
            dim: self.dim,
            constant: self.constant.clone(),
            terms: map
                .into_iter()
                .map(|(v, e)| (v, SparseHerm { entries: e }.compact()))
                .filter(|(_, s)| !s.entries.is_empty())
                .collect(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|(v, _)| *v)
    }

    /// Write the scalars that make a matrix variable (as built by
    /// [`ConicProblem::add_herm_var`]) evaluate to `value`. Each term must be a
    /// single-entry unit coefficient: a diagonal, a real part or an imaginary part.
    pub fn assign_into(&self, value: &CMat, x: &mut [f64]) {
        for (v, s) in &self.terms {
            let Some(&(a, b, z)) = s.entries.first() else { continue };
            let target = value[(a, b)] - self.constant[(a, b)];
            x[v.0] = if z.im == 0.0 { target.re / z.re } else { target.im / z.im };
        }
    }
}

/// One congruence term `K^H E(x) K` of an LMI block. `factor = None` means `K = I`.
#[derive(Clone, Debug)]
pub struct LmiPart {
    pub factor: Option<CMat>,
    pub inner: HermExpr,
}

impl LmiPart {
    pub fn direct(inner: HermExpr) -> Self {
        Self { factor: None, inner }
    }

    pub fn congruence(factor: CMat, inner: HermExpr) -> Self {
        assert_eq!(factor.nrows(), inner.dim, "factor rows must match inner expression size");
        Self { factor: Some(factor), inner }
    }

    pub fn out_dim(&self) -> usize {
        self.factor.as_ref().map_or(self.inner.dim, |k| k.ncols())
    }

    fn lift(&self, m: &CMat) -> CMat {
        match &self.factor {
            None => m.clone(),
            Some(k) => k.adjoint() * m * k,
        }
    }
}

/// A linear matrix inequality `sum_p K_p^H E_p(x) K_p >= 0` in affine form.
#[derive(Clone, Debug)]
pub struct LmiBlock {
    pub size: usize,
    pub parts: Vec<LmiPart>,
    pub label: String,
}

impl LmiBlock {
    pub fn new(size: usize, label: impl Into<String>) -> Self {
        Self { size, parts: Vec::new(), label: label.into() }
    }

    pub fn with_part(mut self, part: LmiPart) -> Self {
        assert_eq!(part.out_dim(), self.size, "LMI part size mismatch in {}", self.label);
        self.parts.push(part);
        self
    }

    pub fn push(&mut self, part: LmiPart) {
        assert_eq!(part.out_dim(), self.size, "LMI part size mismatch in {}", self.label);
        self.parts.push(part);
    }

    /// Direct Hermitian expression, `K = I`.
    pub fn from_expr(expr: HermExpr, label: impl Into<String>) -> Self {
        let size = expr.dim;
        Self::new(size, label).with_part(LmiPart::direct(expr))
    }

    pub fn constant(&self) -> CMat {
        let mut m = CMat::zeros(self.size, self.size);
        for p in &self.parts {
            m += p.lift(&p.inner.constant);
        }
        m
    }

    pub fn coefficient(&self, v: VarId) -> CMat {
        let mut m = CMat::zeros(self.size, self.size);
        for p in &self.parts {
            let c = p.inner.coefficient(v);
            if c.iter().any(|z| z.norm_sqr() > 0.0) {
                m += p.lift(&c);
            }
        }
        m
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.size, self.size);
        for p in &self.parts {
            m += p.lift(&p.inner.eval(x));
        }
        m
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self.parts.iter().flat_map(|p| p.inner.vars()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Largest deviation from Hermitian symmetry over constant and coefficients.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = crate::linalg::fro(&(self.constant() - self.constant().adjoint()));
        for v in self.vars() {
            let c = self.coefficient(v);
            worst = worst.max(crate::linalg::fro(&(&c - c.adjoint())));
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub expr: AffExpr,
    pub label: String,
}

/// A linear-objective conic program over real scalar variables.
///
/// minimize `objective` subject to `ineqs >= 0`, `eqs == 0` and every LMI block
/// positive semidefinite.
#[derive(Clone, Debug, Default)]
pub struct ConicProblem {
    pub var_names: Vec<String>,
    pub objective: AffExpr,
    pub ineqs: Vec<Constraint>,
    pub eqs: Vec<Constraint>,
    pub lmis: Vec<LmiBlock>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.var_names.push(name.into());
        VarId(self.var_names.len() - 1)
    }

    /// Scalar variable with an `x >= 0` row.
    pub fn add_nonneg(&mut self, name: impl Into<String>) -> VarId {
        let name = name.into();
        let v = self.add_var(name.clone());
        self.add_ineq(AffExpr::var(v), format!("{name} >= 0"));
        v
    }

    /// Hermitian `n x n` matrix variable (no cone membership implied).
    pub fn add_herm_var(&mut self, n: usize, name: &str) -> HermExpr {
        let mut e = HermExpr::zeros(n);
        for a in 0..n {
            let v = self.add_var(format!("{name}[{a},{a}]"));
            e.terms.push((v, SparseHerm::unit_diag(a)));
        }
        for b in 0..n {
            for a in 0..b {
                let re = self.add_var(format!("re {name}[{a},{b}]"));
                e.terms.push((re, SparseHerm::unit_re(a, b)));
                let im = self.add_var(format!("im {name}[{a},{b}]"));
                e.terms.push((im, SparseHerm::unit_im(a, b)));
            }
        }
        e
    }

    /// Hermitian PSD matrix variable.
    pub fn add_psd_var(&mut self, n: usize, name: &str) -> HermExpr {
        let e = self.add_herm_var(n, name);
        self.add_lmi(LmiBlock::from_expr(e.clone(), format!("{name} psd")));
        e
    }

    pub fn add_ineq(&mut self, expr: AffExpr, label: impl Into<String>) {
        self.ineqs.push(Constraint { expr: expr.compact(), label: label.into() });
    }

    /// `lhs >= rhs`.
    pub fn add_ge(&mut self, lhs: &AffExpr, rhs: &AffExpr, label: impl Into<String>) {
        self.add_ineq(lhs.clone().sub(rhs), label);
    }

    pub fn add_eq(&mut self, expr: AffExpr, label: impl Into<String>) {
        self.eqs.push(Constraint { expr: expr.compact(), label: label.into() });
    }

    pub fn add_lmi(&mut self, block: LmiBlock) {
        self.lmis.push(block);
    }

    /// `2 a b >= x^2 + y^2` with `a, b >= 0`, as a 3x3 arrow LMI
    /// `[[2a, x, y], [x, b, 0], [y, 0, b]] >= 0`.
    pub fn add_rotated_soc(&mut self, a: &AffExpr, b: &AffExpr, x: &AffExpr, y: &AffExpr, label: impl Into<String>) {
        let place = |e: &AffExpr, i: usize, j: usize, scale: f64| -> HermExpr {
            let mut m = HermExpr::zeros(3);
            let mut k = CMat::zeros(3, 3);
            k[(i, j)] = cr(scale);
            k[(j, i)] = cr(scale);
            if i == j {
                k[(i, i)] = cr(scale);
            }
            m.constant = &k * cr(e.constant);
            for &(v, coef) in &e.terms {
                m.terms.push((v, SparseHerm::from_dense(&(&k * cr(coef)))));
            }
            m
        };
        let expr = place(a, 0, 0, 2.0)
            .add(&place(b, 1, 1, 1.0))
            .add(&place(b, 2, 2, 1.0))
            .add(&place(x, 0, 1, 1.0))
            .add(&place(y, 0, 2, 1.0));
        self.add_lmi(LmiBlock::from_expr(expr.compact(), label));
    }

    /// `[[a, b], [b, c]] >= 0` for affine scalars.
    pub fn add_psd2(&mut self, a: &AffExpr, b: &AffExpr, c: &AffExpr, label: impl Into<String>) {
        let mut m = HermExpr::zeros(2);
        m.constant[(0, 0)] = cr(a.constant);
        m.constant[(1, 1)] = cr(c.constant);
        m.constant[(0, 1)] = cr(b.constant);
        m.constant[(1, 0)] = cr(b.constant);
        for &(v, coef) in &a.terms {
            m.terms.push((v, SparseHerm { entries: vec![(0, 0, cr(coef))] }));
        }
        for &(v, coef) in &c.terms {
            m.terms.push((v, SparseHerm { entries: vec![(1, 1, cr(coef))] }));
        }
        for &(v, coef) in &b.terms {
            m.terms.push((v, SparseHerm { entries: vec![(0, 1, cr(coef)), (1, 0, cr(coef))] }));
        }
        self.add_lmi(LmiBlock::from_expr(m.compact(), label));
    }

    pub fn minimize(&mut self, objective: AffExpr) {
        self.objective = objective.compact();
    }

    /// Every variable referenced by a constraint or the objective was declared.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.n_vars();
        let check = |v: VarId, what: &str| {
            if v.0 >= n {
                Err(format!("{what} references undeclared variable {}", v.0))
            } else {
                Ok(())
            }
        };
        for &(v, _) in &self.objective.terms {
            check(v, "objective")?;
        }
        for c in self.ineqs.iter().chain(self.eqs.iter()) {
            for &(v, _) in &c.expr.terms {
                check(v, &c.label)?;
            }
        }
        for b in &self.lmis {
            for p in &b.parts {
                if p.inner.constant.nrows() != p.inner.dim {
                    return Err(format!("{}: inner constant has wrong size", b.label));
                }
                for (v, s) in &p.inner.terms {
                    check(*v, &b.label)?;
                    if s.entries.iter().any(|&(i, j, _)| i >= p.inner.dim || j >= p.inner.dim) {
                        return Err(format!("{}: coefficient entry out of range", b.label));
                    }
                }
            }
        }
        Ok(())
    }
}
