//! Node geometry, path-loss plus Rayleigh channels, and the eavesdropper's
//! bounded estimation error.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fro, CMat, CVec};

/// Antenna and element counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub nt: usize,
    pub m: usize,
    pub ne: usize,
}

impl Dims {
    pub fn new(nt: usize, m: usize, ne: usize) -> Self {
        Self { nt, m, ne }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 || self.m == 0 || self.ne == 0 {
            return Err(Error::InvalidArgument(format!("dimensions must be positive, got {self:?}")));
        }
        Ok(())
    }
}

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Node positions in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_pos: Point,
    pub irs_pos: Point,
    pub u1_pos: Point,
    pub u2_pos: Point,
    pub e_pos: Point,
    pub d_bi: f64,
    pub r_b: f64,
    pub r_i: f64,
}

/// Cluster layout: BS at the origin, IRS at `(d_bi, 0)`, U1 and E inside a disk of
/// radius `r_b` around the BS, U2 inside a disk of radius `r_i` around the IRS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub d_bi: f64,
    pub r_b: f64,
    pub r_i: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Self { d_bi: 50.0, r_b: 2.0, r_i: 2.0 }
    }
}

fn uniform_in_disk<R: Rng + ?Sized>(center: Point, radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    [center[0] + r * phi.cos(), center[1] + r * phi.sin()]
}

impl Geometry {
    /// Draw user and eavesdropper positions uniformly in their cluster disks.
    pub fn sample<R: Rng + ?Sized>(layout: &Layout, rng: &mut R) -> Result<Self> {
        if layout.d_bi <= 0.0 || layout.r_b < 0.0 || layout.r_i < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid layout {layout:?}")));
        }
        let bs = [0.0, 0.0];
        let irs = [layout.d_bi, 0.0];
        let g = Self {
            bs_pos: bs,
            irs_pos: irs,
            u1_pos: uniform_in_disk(bs, layout.r_b, rng),
            u2_pos: uniform_in_disk(irs, layout.r_i, rng),
            e_pos: uniform_in_disk(bs, layout.r_b, rng),
            d_bi: layout.d_bi,
            r_b: layout.r_b,
            r_i: layout.r_i,
        };
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let pts = [self.bs_pos, self.irs_pos, self.u1_pos, self.u2_pos, self.e_pos];
        if !(self.d_bi > 0.0) {
            return Err(Error::InvalidArgument("d_BI must be positive".into()));
        }
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                if !(distance(*a, *b) > 0.0) {
                    return Err(Error::InvalidArgument("coincident nodes".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    pub alpha_irs: f64,
    pub alpha_bs: f64,
    pub rng_seed: u64,
    /// Distances are clamped below at this value (meters).
    pub min_distance: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self { alpha_irs: 2.0, alpha_bs: 4.0, rng_seed: 0, min_distance: 1.0 }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_irs < 0.0 || self.alpha_bs < 0.0 {
            return Err(Error::InvalidArgument("path-loss exponents must be nonnegative".into()));
        }
        if !(self.min_distance > 0.0) {
            return Err(Error::InvalidArgument("min_distance must be positive".into()));
        }
        Ok(())
    }
}

/// Amplitude gain `d^(-alpha/2)`.
pub fn path_gain(d: f64, alpha: f64) -> f64 {
    d.powf(-alpha / 2.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub h_i1: CVec,
    pub h_i2: CVec,
    pub h_b1: CVec,
    /// `M x N_t`.
    pub h_bi: CMat,
    /// `N_t x N_e`.
    pub g_be_hat: CMat,
    /// `M x N_e`.
    pub g_ie_hat: CMat,
    pub eps_ie: f64,
    pub eps_be: f64,
    pub eps_e: f64,
}

impl ChannelSet {
    pub fn dims(&self) -> Dims {
        Dims { nt: self.h_b1.len(), m: self.h_i1.len(), ne: self.g_be_hat.ncols() }
    }

    /// Stacked estimate `[G_Ie; G_Be]`, `(M + N_t) x N_e`.
    pub fn x_hat(&self) -> CMat {
        crate::linalg::vstack(&self.g_ie_hat, &self.g_be_hat)
    }

    /// Set the uncertainty radii from a normalized error `xi_n`.
    pub fn with_normalized_error(mut self, xi_n: f64) -> Self {
        let eps = radius_from_normalized_error(xi_n, &self.x_hat());
        let (ie, be) = split_radius(eps, &self.g_ie_hat, &self.g_be_hat);
        self.eps_ie = ie;
        self.eps_be = be;
        self.eps_e = ie + be;
        self
    }
}

/// `CN(0, 1)` sample.
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn cn_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> CMat {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = cn01(rng) * scale;
        }
    }
    m
}

fn cn_vector<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| cn01(rng) * scale))
}

/// Draw every channel of one instance. Radii are left at zero; see
/// [`ChannelSet::with_normalized_error`].
pub fn sample_channels<R: Rng + ?Sized>(geom: &Geometry, fading: &FadingParams, dims: Dims, rng: &mut R) -> Result<ChannelSet> {
    dims.validate()?;
    geom.validate()?;
    fading.validate()?;
    let d = |a: Point, b: Point| distance(a, b).max(fading.min_distance);
    let g_bi = path_gain(d(geom.bs_pos, geom.irs_pos), fading.alpha_irs);
    let g_i1 = path_gain(d(geom.irs_pos, geom.u1_pos), fading.alpha_irs);
    let g_i2 = path_gain(d(geom.irs_pos, geom.u2_pos), fading.alpha_irs);
    let g_ie = path_gain(d(geom.irs_pos, geom.e_pos), fading.alpha_irs);
    let g_b1 = path_gain(d(geom.bs_pos, geom.u1_pos), fading.alpha_bs);
    let g_be = path_gain(d(geom.bs_pos, geom.e_pos), fading.alpha_bs);
    Ok(ChannelSet {
        h_bi: cn_matrix(dims.m, dims.nt, g_bi, rng),
        h_i1: cn_vector(dims.m, g_i1, rng),
        h_i2: cn_vector(dims.m, g_i2, rng),
        h_b1: cn_vector(dims.nt, g_b1, rng),
        g_ie_hat: cn_matrix(dims.m, dims.ne, g_ie, rng),
        g_be_hat: cn_matrix(dims.nt, dims.ne, g_be, rng),
        eps_ie: 0.0,
        eps_be: 0.0,
        eps_e: 0.0,
    })
}

/// Geometry and channels of one Monte-Carlo trial, reproducible from `seed`.
pub fn sample_instance(layout: &Layout, fading: &FadingParams, dims: Dims, xi_n: f64, seed: u64) -> Result<(Geometry, ChannelSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = Geometry::sample(layout, &mut rng)?;
    let cs = sample_channels(&geom, fading, dims, &mut rng)?.with_normalized_error(xi_n);
    Ok((geom, cs))
}

/// `eps_e = xi_n * ||X_hat||_F`.
pub fn radius_from_normalized_error(xi_n: f64, x_hat: &CMat) -> f64 {
    xi_n * fro(x_hat)
}

/// Split `eps_e` in proportion to the Frobenius norms of the two blocks.
pub fn split_radius(eps_e: f64, g_ie: &CMat, g_be: &CMat) -> (f64, f64) {
    let a = fro(g_ie);
    let b = fro(g_be);
    if a + b == 0.0 {
        return (0.5 * eps_e, 0.5 * eps_e);
    }
    let ie = eps_e * a / (a + b);
    (ie, eps_e - ie)
}

/// Uniform draw from the Frobenius ball of the given radius, or from its
/// boundary sphere when `boundary` is set.
pub fn sample_ball<R: Rng + ?Sized>(rows: usize, cols: usize, radius: f64, boundary: bool, rng: &mut R) -> CMat {
    if radius == 0.0 || rows * cols == 0 {
        return CMat::zeros(rows, cols);
    }
    let g = cn_matrix(rows, cols, 1.0, rng);
    let norm = fro(&g);
    let r = if boundary {
        radius
    } else {
        radius * rng.random::<f64>().powf(1.0 / (2 * rows * cols) as f64)
    };
    g * Complex64::from(r / norm)
}

/// Perturbations `(dG_Ie, dG_Be)` inside (or on) their balls.
pub fn sample_uncertainty<R: Rng + ?Sized>(eps_ie: f64, eps_be: f64, dims: Dims, boundary: bool, rng: &mut R) -> (CMat, CMat) {
    let di = sample_ball(dims.m, dims.ne, eps_ie, boundary, rng);
    let db = sample_ball(dims.nt, dims.ne, eps_be, boundary, rng);
    (di, db)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannels {
    pub h1: CVec,
    pub h2: CVec,
    /// `N_t x N_e`.
    pub g_e: CMat,
}

/// `[Theta H_BI; I]`, the map from the stacked eavesdropper channel to `G_e^H`.
pub fn cascade_factor(theta: &CVec, h_bi: &CMat) -> CMat {
    let nt = h_bi.ncols();
    let th = scale_rows(h_bi, theta);
    crate::linalg::vstack(&th, &CMat::identity(nt, nt))
}

/// `diag(v) * m`.
pub fn scale_rows(m: &CMat, v: &CVec) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= v[i];
    }
    out
}

/// Compose the effective channels for reflection vector `theta`, using the
/// estimate plus `delta = (dG_Ie, dG_Be)` for the eavesdropper when given.
pub fn effective_channels(cs: &ChannelSet, delta: Option<(&CMat, &CMat)>, theta: &CVec) -> Result<EffectiveChannels> {
    let d = cs.dims();
    if theta.len() != d.m {
        return Err(Error::DimensionMismatch(format!("theta has length {}, expected M = {}", theta.len(), d.m)));
    }
    let th = scale_rows(&cs.h_bi, theta);
    let h1 = th.adjoint() * &cs.h_i1 + &cs.h_b1;
    let h2 = th.adjoint() * &cs.h_i2;
    let (g_ie, g_be) = match delta {
        None => (cs.g_ie_hat.clone(), cs.g_be_hat.clone()),
        Some((di, db)) => {
            if di.shape() != cs.g_ie_hat.shape() || db.shape() != cs.g_be_hat.shape() {
                return Err(Error::DimensionMismatch("perturbation shape".into()));
            }
            (&cs.g_ie_hat + di, &cs.g_be_hat + db)
        }
    };
    let g_e = th.adjoint() * g_ie + g_be;
    Ok(EffectiveChannels { h1, h2, g_e })
}

/// NOMA decoding order `||h1||^2 >= ||h2||^2`.
pub fn check_ordering(cs: &ChannelSet, theta: &CVec) -> Result<bool> {
    let e = effective_channels(cs, None, theta)?;
    Ok(e.h1.norm_squared() >= e.h2.norm_squared())
}

/// Unit-modulus phases.
pub fn random_phases<R: Rng + ?Sized>(m: usize, rng: &mut R) -> CVec {
    CVec::from_iterator(m, (0..m).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)))
}
