//! EM estimation for both PPLS models.
//!
//! Both fitters work from the sufficient statistic `G = [X Y]ᵀ[X Y]` of the
//! centered data, so an iteration costs `O((p+q)³)` whatever the sample size.
//! With `Σ` the joint covariance of `(x, y)` and `K = Cov((x, y), z)` for the
//! latent vector `z`:
//!
//! ```text
//! [X Y]ᵀ E[Z]  = G Σ⁻¹ K
//! E[ZᵀZ]       = n (Var z − Kᵀ Σ⁻¹ K) + Kᵀ Σ⁻¹ G Σ⁻¹ K
//! log L        = −½ (n (p+q) ln 2π + n ln|Σ| + Tr(Σ⁻¹ G))
//! ```
//!
//! The original model uses `z = (t, u)` and has exact closed-form M-steps.
//! The extended model uses `z = t`; its loading updates are one warm-started
//! Stiefel ascent each, which is a generalized EM step.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Cholesky, Dyn};

use crate::classical::{center_columns, pls_svd_from_cross};
use crate::error::{PplsError, Result};
use crate::linalg::{
    canonical_sign, polar_factor, sample_semi_orthogonal, spd_inverse, sym_eig_desc, symmetrize,
    Mat, RngStream,
};
use crate::model::{
    extended_covariance_unchecked, original_covariance_unchecked, validate_extended,
    validate_original, Diagonal, ExtendedPplsParams, JointCovariance, OriginalPplsParams,
};
use crate::stiefel::{maximize_on_stiefel, StiefelConfig, TraceQuadObjective};

/// Floor used by the starting values, relative to the mean data variance.
const INIT_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// Method-of-moments start from the PLS-SVD of the cross-product.
    #[default]
    SvdStart,
    /// Haar-random loadings with generic variances.
    RandomStart,
}

#[derive(Debug, Clone)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once `|Δ log L| ≤ loglik_tol · max(1, |log L|)`.
    pub loglik_tol: f64,
    pub init: InitStrategy,
    pub stiefel: StiefelConfig,
    /// Relative eigenvalue floor for noise covariances, as a fraction of
    /// their mean diagonal. Only binds when a noise estimate is near singular.
    pub ridge: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            loglik_tol: 1e-7,
            init: InitStrategy::SvdStart,
            stiefel: StiefelConfig::default(),
            ridge: 1e-8,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(PplsError::Config("max_iters must be at least 1".into()));
        }
        if !(self.loglik_tol > 0.0) || !self.loglik_tol.is_finite() {
            return Err(PplsError::Config(format!(
                "loglik_tol must be positive, got {}",
                self.loglik_tol
            )));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(PplsError::Config(format!(
                "ridge must be nonnegative, got {}",
                self.ridge
            )));
        }
        self.stiefel.validate()
    }
}

/// `n` and the Gram matrix of the stacked data `[X Y]`.
#[derive(Debug, Clone)]
pub struct GramStats {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub gram: Mat,
}

impl GramStats {
    /// Raw (uncentered) cross-products.
    pub fn from_data(x: &Mat, y: &Mat) -> Result<Self> {
        let z = hstack(x, y)?;
        Ok(Self {
            n: z.nrows(),
            p: x.ncols(),
            q: y.ncols(),
            gram: symmetrize(&(z.transpose() * &z)),
        })
    }

    /// Cross-products of the column-centered data.
    pub fn centered(x: &Mat, y: &Mat) -> Result<Self> {
        Self::from_data(&center_columns(x), &center_columns(y))
    }

    /// Statistics of an idealized sample whose moments equal the population ones.
    pub fn population(cov: &JointCovariance, n: usize) -> Self {
        Self {
            n,
            p: cov.p(),
            q: cov.q(),
            gram: cov.stacked() * n as f64,
        }
    }

    pub fn xx(&self) -> Mat {
        self.gram.view((0, 0), (self.p, self.p)).into_owned()
    }

    pub fn yy(&self) -> Mat {
        self.gram
            .view((self.p, self.p), (self.q, self.q))
            .into_owned()
    }

    pub fn xy(&self) -> Mat {
        self.gram.view((0, self.p), (self.p, self.q)).into_owned()
    }
}

/// Conditional moments of the latent scores.
#[derive(Debug, Clone)]
pub struct EStepMoments {
    /// Rows `E(Tᵢ | Xᵢ, Yᵢ)`.
    pub cond_mean: Mat,
    /// `Σᵢ E(Tᵢᵀ Tᵢ | Xᵢ, Yᵢ)`.
    pub cond_second: Mat,
}

/// Latent moments reduced to what the M-steps need: `Xᵀ E[T]`, `Yᵀ E[T]`
/// and `E[TᵀT]`.
#[derive(Debug, Clone)]
struct CrossMoments {
    xt: Mat,
    yt: Mat,
    tt: Mat,
}

/// Moments of the two-layer latent `(t, u)` of the original model.
#[derive(Debug, Clone)]
struct OriginalMoments {
    xt: Mat,
    yu: Mat,
    tt: Mat,
    tu: Mat,
    uu: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmTraceRow {
    pub iteration: usize,
    pub loglik: f64,
    pub param_delta: f64,
    pub stiefel_iters_w: usize,
    pub stiefel_iters_c: usize,
}

/// Per-iteration record of an EM run. Row 0 is the starting point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmTrace {
    pub rows: Vec<EmTraceRow>,
    pub converged: bool,
}

impl EmTrace {
    pub fn logliks(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loglik).collect()
    }

    pub fn final_loglik(&self) -> Option<f64> {
        self.rows.last().map(|r| r.loglik)
    }

    /// Largest decrease between consecutive iterates, relative to `max(1, |log L|)`.
    pub fn max_relative_decrease(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| (w[0].loglik - w[1].loglik) / w[0].loglik.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.max_relative_decrease() <= slack
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iteration,loglik,param_delta,stiefel_iters_W,stiefel_iters_C\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{},{}",
                r.iteration, r.loglik, r.param_delta, r.stiefel_iters_w, r.stiefel_iters_c
            );
        }
        out
    }
}

fn hstack(x: &Mat, y: &Mat) -> Result<Mat> {
    if x.nrows() != y.nrows() {
        return Err(PplsError::Dimension(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let (n, p, q) = (x.nrows(), x.ncols(), y.ncols());
    let mut z = Mat::zeros(n, p + q);
    z.view_mut((0, 0), (n, p)).copy_from(x);
    z.view_mut((0, p), (n, q)).copy_from(y);
    Ok(z)
}

/// Cholesky factor of the joint covariance with its log-determinant.
struct Factored {
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
}

impl Factored {
    fn new(sigma: &Mat) -> Result<Self> {
        let chol = Cholesky::new(sigma.clone()).ok_or_else(|| {
            PplsError::Numerical("joint covariance is not positive definite".into())
        })?;
        let logdet = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        if !logdet.is_finite() {
            return Err(PplsError::Numerical(
                "joint covariance has a non-finite log-determinant".into(),
            ));
        }
        Ok(Self { chol, logdet })
    }

    fn loglik(&self, stats: &GramStats) -> f64 {
        let n = stats.n as f64;
        let d = (stats.p + stats.q) as f64;
        let quad = self.chol.solve(&stats.gram).trace();
        -0.5 * (n * d * (2.0 * PI).ln() + n * self.logdet + quad)
    }
}

fn loglik_from_stats(stats: &GramStats, cov: &JointCovariance) -> Result<f64> {
    Ok(Factored::new(&cov.stacked())?.loglik(stats))
}

/// Sum over rows of the zero-mean Gaussian log-density with covariance `cov`.
pub fn observed_loglik(x: &Mat, y: &Mat, cov: &JointCovariance) -> Result<f64> {
    if x.ncols() != cov.p() || y.ncols() != cov.q() {
        return Err(PplsError::Dimension(format!(
            "data has {}+{} columns, covariance is for {}+{}",
            x.ncols(),
            y.ncols(),
            cov.p(),
            cov.q()
        )));
    }
    loglik_from_stats(&GramStats::from_data(x, y)?, cov)
}

/// `[WΣ_t; CΣ_t]`, the covariance between `(x, y)` and `t`.
fn extended_k(params: &ExtendedPplsParams) -> Mat {
    let (p, q, r) = (params.p(), params.q(), params.r());
    let mut k = Mat::zeros(p + q, r);
    k.view_mut((0, 0), (p, r))
        .copy_from(&params.sigma_t.scale_columns(&params.w));
    k.view_mut((p, 0), (q, r))
        .copy_from(&params.sigma_t.scale_columns(&params.c));
    k
}

/// Conditional moments of `T` given the observed data.
pub fn estep_extended(x: &Mat, y: &Mat, params: &ExtendedPplsParams) -> Result<EStepMoments> {
    if x.ncols() != params.p() || y.ncols() != params.q() {
        return Err(PplsError::Dimension(format!(
            "data has {}+{} columns, parameters are for {}+{}",
            x.ncols(),
            y.ncols(),
            params.p(),
            params.q()
        )));
    }
    let z = hstack(x, y)?;
    let fac = Factored::new(&extended_covariance_unchecked(params).stacked())
        .map_err(|_| PplsError::Numerical("joint covariance Σ is singular".into()))?;
    let k = extended_k(params);
    let a = fac.chol.solve(&k);
    let cond_mean = &z * &a;
    let n = z.nrows() as f64;
    let cond_var = params.sigma_t.to_matrix() - k.transpose() * &a;
    let cond_second = symmetrize(&(cond_var * n + cond_mean.transpose() * &cond_mean));
    Ok(EStepMoments {
        cond_mean,
        cond_second,
    })
}

fn extended_cross(stats: &GramStats, params: &ExtendedPplsParams, fac: &Factored) -> CrossMoments {
    let (p, q, r) = (stats.p, stats.q, params.r());
    let k = extended_k(params);
    let a = fac.chol.solve(&k);
    let ga = &stats.gram * &a;
    let cond_var = params.sigma_t.to_matrix() - k.transpose() * &a;
    let tt = symmetrize(&(cond_var * stats.n as f64 + a.transpose() * &ga));
    CrossMoments {
        xt: ga.view((0, 0), (p, r)).into_owned(),
        yt: ga.view((p, 0), (q, r)).into_owned(),
        tt,
    }
}

/// Mean of the diagonal, the scale used for relative floors.
fn mean_diag(m: &Mat) -> f64 {
    m.trace() / m.nrows() as f64
}

/// Raise eigenvalues below `floor` to `floor`. Returns the input untouched
/// when it is already well conditioned.
fn floor_spectrum(m: &Mat, floor: f64) -> Result<Mat> {
    let eig = sym_eig_desc(m)?;
    let min = eig.values[eig.values.len() - 1];
    if min >= floor {
        return Ok(m.clone());
    }
    let vals = eig.values.map(|v| v.max(floor));
    let scaled = Diagonal::from_vector(vals).scale_columns(&eig.vectors);
    Ok(symmetrize(&(scaled * eig.vectors.transpose())))
}

fn psd_floor(m: &Mat, ridge: f64) -> Result<Mat> {
    let floor = ridge * mean_diag(m).abs().max(f64::MIN_POSITIVE);
    floor_spectrum(m, floor)
}

/// `(S − L Wᵀ − W Lᵀ + W Q Wᵀ) / n`, the expected residual covariance of one block.
fn residual_covariance(s: &Mat, linear: &Mat, w: &Mat, quad: &Mat, n: f64) -> Mat {
    let lw = linear * w.transpose();
    symmetrize(&((s - &lw - lw.transpose() + w * quad * w.transpose()) / n))
}

fn stiefel_update(
    linear: Mat,
    quadratic: Mat,
    psi: &Mat,
    w_old: &Mat,
    stiefel: &StiefelConfig,
    what: &str,
) -> Result<(Mat, usize)> {
    let metric = symmetrize(&spd_inverse(psi).map_err(|_| {
        PplsError::Numerical(format!("noise covariance for {what} is not invertible"))
    })?);
    let obj = TraceQuadObjective::new(linear, symmetrize(&quadratic), metric)?;
    let out = maximize_on_stiefel(&obj, w_old, stiefel)
        .map_err(|e| PplsError::Numerical(format!("Stiefel update of {what}: {e}")))?;
    Ok((out.w, out.iterations))
}

/// Sort latent coordinates by decreasing `key` and flip each so that its
/// `W` column has a positive dominant entry. The same reindexing is applied
/// to the `C` columns, so the implied distribution is unchanged.
fn canonical_order(key: &[f64], w: &mut Mat, c: &mut Mat) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..key.len()).collect();
    perm.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    let w0 = w.clone();
    let c0 = c.clone();
    for (dst, &src) in perm.iter().enumerate() {
        let s = canonical_sign(w0.column(src).as_slice());
        w.set_column(dst, &(w0.column(src) * s));
        c.set_column(dst, &(c0.column(src) * s));
    }
    perm
}

fn canonicalize_extended(mut params: ExtendedPplsParams) -> ExtendedPplsParams {
    let key = params.sigma_t.as_slice().to_vec();
    let perm = canonical_order(&key, &mut params.w, &mut params.c);
    params.sigma_t = params.sigma_t.permuted(&perm);
    params
}

fn canonicalize_original(mut params: OriginalPplsParams) -> OriginalPplsParams {
    let key = params.sigma_t.product(&params.b).as_slice().to_vec();
    let perm = canonical_order(&key, &mut params.w, &mut params.c);
    params.sigma_t = params.sigma_t.permuted(&perm);
    params.b = params.b.permuted(&perm);
    params
}

fn mstep_extended_inner(
    stats: &GramStats,
    cross: &CrossMoments,
    old: &ExtendedPplsParams,
    cfg: &EmConfig,
) -> Result<(ExtendedPplsParams, usize, usize)> {
    let n = stats.n as f64;
    let quad = &cross.tt / n;
    let (w, it_w) = stiefel_update(
        &cross.xt / n,
        quad.clone(),
        &old.psi_e,
        &old.w,
        &cfg.stiefel,
        "W",
    )?;
    let (c, it_c) = stiefel_update(&cross.yt / n, quad, &old.psi_f, &old.c, &cfg.stiefel, "C")?;
    let sigma_t = Diagonal::from_vector(cross.tt.diagonal() / n);
    let psi_e = psd_floor(
        &residual_covariance(&stats.xx(), &cross.xt, &w, &cross.tt, n),
        cfg.ridge,
    )?;
    let psi_f = psd_floor(
        &residual_covariance(&stats.yy(), &cross.yt, &c, &cross.tt, n),
        cfg.ridge,
    )?;
    let params = canonicalize_extended(ExtendedPplsParams {
        w,
        c,
        sigma_t,
        psi_e,
        psi_f,
    });
    Ok((params, it_w, it_c))
}

/// One M-step from E-step output on raw data.
pub fn mstep_extended(
    moments: &EStepMoments,
    x: &Mat,
    y: &Mat,
    old: &ExtendedPplsParams,
    cfg: &EmConfig,
) -> Result<ExtendedPplsParams> {
    cfg.validate()?;
    let n = x.nrows();
    if moments.cond_mean.nrows() != n || moments.cond_mean.ncols() != old.r() {
        return Err(PplsError::Dimension(format!(
            "conditional means are {}x{}, expected {n}x{}",
            moments.cond_mean.nrows(),
            moments.cond_mean.ncols(),
            old.r()
        )));
    }
    let stats = GramStats::from_data(x, y)?;
    let cross = CrossMoments {
        xt: x.transpose() * &moments.cond_mean,
        yt: y.transpose() * &moments.cond_mean,
        tt: moments.cond_second.clone(),
    };
    Ok(mstep_extended_inner(&stats, &cross, old, cfg)?.0)
}

/// One full EM iteration of the extended model on sufficient statistics.
pub fn em_step_extended(
    stats: &GramStats,
    params: &ExtendedPplsParams,
    cfg: &EmConfig,
) -> Result<ExtendedPplsParams> {
    let fac = Factored::new(&extended_covariance_unchecked(params).stacked())?;
    let cross = extended_cross(stats, params, &fac);
    Ok(mstep_extended_inner(stats, &cross, params, cfg)?.0)
}

fn original_moments(
    stats: &GramStats,
    params: &OriginalPplsParams,
    fac: &Factored,
) -> OriginalMoments {
    let (p, q, r) = (stats.p, stats.q, params.r());
    let st = &params.sigma_t;
    let stb = st.product(&params.b);
    let var_u = params.var_u();
    let mut k = Mat::zeros(p + q, 2 * r);
    k.view_mut((0, 0), (p, r))
        .copy_from(&st.scale_columns(&params.w));
    k.view_mut((0, r), (p, r))
        .copy_from(&stb.scale_columns(&params.w));
    k.view_mut((p, 0), (q, r))
        .copy_from(&stb.scale_columns(&params.c));
    k.view_mut((p, r), (q, r))
        .copy_from(&var_u.scale_columns(&params.c));
    let mut var_z = Mat::zeros(2 * r, 2 * r);
    for j in 0..r {
        var_z[(j, j)] = st.as_slice()[j];
        var_z[(j, r + j)] = stb.as_slice()[j];
        var_z[(r + j, j)] = stb.as_slice()[j];
        var_z[(r + j, r + j)] = var_u.as_slice()[j];
    }
    let a = fac.chol.solve(&k);
    let ga = &stats.gram * &a;
    let zz = symmetrize(&((var_z - k.transpose() * &a) * stats.n as f64 + a.transpose() * &ga));
    OriginalMoments {
        xt: ga.view((0, 0), (p, r)).into_owned(),
        yu: ga.view((p, r), (q, r)).into_owned(),
        tt: zz.view((0, 0), (r, r)).into_owned(),
        tu: zz.view((0, r), (r, r)).into_owned(),
        uu: zz.view((r, r), (r, r)).into_owned(),
    }
}

fn mstep_original(
    stats: &GramStats,
    m: &OriginalMoments,
    cfg: &EmConfig,
) -> Result<OriginalPplsParams> {
    let (n, p, q) = (stats.n as f64, stats.p as f64, stats.q as f64);
    let r = m.tt.nrows();
    // with WᵀW = I the x-block term reduces to maximizing Tr(Wᵀ Xᵀ E[T])
    let w = polar_factor(&m.xt)?;
    let mut c = polar_factor(&m.yu)?;
    let xx = stats.xx();
    let yy = stats.yy();
    let floor_x = cfg.ridge * mean_diag(&xx) / n;
    let floor_y = cfg.ridge * mean_diag(&yy) / n;
    let sigma_e2 = ((xx.trace() - 2.0 * w.dot(&m.xt) + m.tt.trace()) / (n * p))
        .max(floor_x.max(f64::MIN_POSITIVE));
    let sigma_f2 = ((yy.trace() - 2.0 * c.dot(&m.yu) + m.uu.trace()) / (n * q))
        .max(floor_y.max(f64::MIN_POSITIVE));
    let mut b = Vec::with_capacity(r);
    let mut h_sum = 0.0;
    for j in 0..r {
        let bj = m.tu[(j, j)] / m.tt[(j, j)];
        h_sum += m.uu[(j, j)] - 2.0 * bj * m.tu[(j, j)] + bj * bj * m.tt[(j, j)];
        // (u_j, C_j, b_j) → (−u_j, −C_j, −b_j) leaves the model unchanged
        if bj < 0.0 {
            c.column_mut(j).neg_mut();
            b.push(-bj);
        } else {
            b.push(bj);
        }
    }
    let sigma_h2 = (h_sum / (n * r as f64)).max(floor_y.max(f64::MIN_POSITIVE));
    let sigma_t = Diagonal::from_vector(m.tt.diagonal() / n);
    Ok(canonicalize_original(OriginalPplsParams {
        w,
        c,
        b: Diagonal::new(b),
        sigma_t,
        sigma_e2,
        sigma_f2,
        sigma_h2,
    }))
}

/// One full EM iteration of the original model on sufficient statistics.
pub fn em_step_original(
    stats: &GramStats,
    params: &OriginalPplsParams,
    cfg: &EmConfig,
) -> Result<OriginalPplsParams> {
    let fac = Factored::new(&original_covariance_unchecked(params).stacked())?;
    mstep_original(stats, &original_moments(stats, params, &fac), cfg)
}

/// Centered statistics after the shape and degeneracy checks shared by both fitters.
fn prepare(x: &Mat, y: &Mat, r: usize) -> Result<GramStats> {
    let (n, p, q) = (x.nrows(), x.ncols(), y.ncols());
    if y.nrows() != n {
        return Err(PplsError::Dimension(format!(
            "X has {n} rows but Y has {}",
            y.nrows()
        )));
    }
    if r == 0 || r >= p.min(q) {
        return Err(PplsError::Dimension(format!(
            "need 0 < r < min(p, q) = {}, got r = {r}",
            p.min(q)
        )));
    }
    if n <= r {
        return Err(PplsError::Dimension(format!(
            "need more than r = {r} rows, got {n}"
        )));
    }
    for (name, m) in [("X", x), ("Y", y)] {
        crate::linalg::ensure_finite(m, name)?;
    }
    let stats = GramStats::centered(x, y)?;
    let diag = stats.gram.diagonal();
    let scale = diag.max().max(f64::MIN_POSITIVE);
    for (j, &v) in diag.iter().enumerate() {
        if v <= 1e-14 * scale {
            let (block, col) = if j < p { ("X", j) } else { ("Y", j - p) };
            return Err(PplsError::InvalidInput(format!(
                "column {col} of {block} has zero variance"
            )));
        }
    }
    Ok(stats)
}

fn svd_start_extended(stats: &GramStats, r: usize) -> Result<ExtendedPplsParams> {
    let n = stats.n as f64;
    let fit = pls_svd_from_cross(&(stats.xy() / n), r)?;
    let sxx = stats.xx() / n;
    let syy = stats.yy() / n;
    let (w, c) = (fit.x.weights, fit.y.weights);
    let sigma_t = Diagonal::from_vector(fit.x.scores.map(|s| s.max(f64::MIN_POSITIVE)));
    let psi_e = symmetrize(&(&sxx - sigma_t.scale_columns(&w) * w.transpose()));
    let psi_f = symmetrize(&(&syy - sigma_t.scale_columns(&c) * c.transpose()));
    Ok(canonicalize_extended(ExtendedPplsParams {
        psi_e: floor_spectrum(&psi_e, INIT_FLOOR * mean_diag(&sxx))?,
        psi_f: floor_spectrum(&psi_f, INIT_FLOOR * mean_diag(&syy))?,
        w,
        c,
        sigma_t,
    }))
}

/// Decreasing generic latent variances `scale · (r, r−1, …, 1) / r`.
fn generic_variances(r: usize, scale: f64) -> Diagonal {
    Diagonal::new((0..r).map(|j| scale * (r - j) as f64 / r as f64).collect())
}

fn random_start_extended(
    stats: &GramStats,
    r: usize,
    rng: &mut RngStream,
) -> Result<ExtendedPplsParams> {
    let n = stats.n as f64;
    let (sx, sy) = (mean_diag(&stats.xx()) / n, mean_diag(&stats.yy()) / n);
    Ok(canonicalize_extended(ExtendedPplsParams {
        w: sample_semi_orthogonal(stats.p, r, rng)?,
        c: sample_semi_orthogonal(stats.q, r, rng)?,
        sigma_t: generic_variances(r, sx.min(sy)),
        psi_e: Mat::identity(stats.p, stats.p) * sx,
        psi_f: Mat::identity(stats.q, stats.q) * sy,
    }))
}

fn svd_start_original(stats: &GramStats, r: usize) -> Result<OriginalPplsParams> {
    let n = stats.n as f64;
    let (p, q) = (stats.p as f64, stats.q as f64);
    let sxx = stats.xx() / n;
    let syy = stats.yy() / n;
    let sxy = stats.xy() / n;
    let fit = pls_svd_from_cross(&sxy, r)?;
    let (w, c) = (fit.x.weights, fit.y.weights);
    let (sx, sy) = (mean_diag(&sxx), mean_diag(&syy));

    let wsw = w.transpose() * &sxx * &w;
    let csc = c.transpose() * &syy * &c;
    let wsc = w.transpose() * &sxy * &c;
    let sigma_e2 = ((sxx.trace() - wsw.trace()) / (p - r as f64)).max(INIT_FLOOR * sx);
    let sigma_f2 = ((syy.trace() - csc.trace()) / (q - r as f64)).max(INIT_FLOOR * sy);
    let sigma_t: Vec<f64> = (0..r)
        .map(|j| (wsw[(j, j)] - sigma_e2).max(INIT_FLOOR * sx))
        .collect();
    let b: Vec<f64> = (0..r)
        .map(|j| (wsc[(j, j)].abs() / sigma_t[j]).max(INIT_FLOOR))
        .collect();
    let h_excess: f64 = (0..r)
        .map(|j| csc[(j, j)] - sigma_f2 - sigma_t[j] * b[j] * b[j])
        .sum::<f64>()
        / r as f64;
    Ok(canonicalize_original(OriginalPplsParams {
        w,
        c,
        b: Diagonal::new(b),
        sigma_t: Diagonal::new(sigma_t),
        sigma_e2,
        sigma_f2,
        sigma_h2: h_excess.max(INIT_FLOOR * sy),
    }))
}

fn random_start_original(
    stats: &GramStats,
    r: usize,
    rng: &mut RngStream,
) -> Result<OriginalPplsParams> {
    let n = stats.n as f64;
    let (sx, sy) = (mean_diag(&stats.xx()) / n, mean_diag(&stats.yy()) / n);
    Ok(canonicalize_original(OriginalPplsParams {
        w: sample_semi_orthogonal(stats.p, r, rng)?,
        c: sample_semi_orthogonal(stats.q, r, rng)?,
        b: Diagonal::new(vec![1.0; r]),
        sigma_t: generic_variances(r, sx),
        sigma_e2: sx,
        sigma_f2: sy,
        sigma_h2: sy,
    }))
}

fn converged(old: f64, new: f64, tol: f64) -> bool {
    (new - old).abs() <= tol * old.abs().max(1.0)
}

fn frob_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm_squared()
}

fn extended_delta(a: &ExtendedPplsParams, b: &ExtendedPplsParams) -> f64 {
    (frob_diff(&a.w, &b.w)
        + frob_diff(&a.c, &b.c)
        + (a.sigma_t.values() - b.sigma_t.values()).norm_squared()
        + frob_diff(&a.psi_e, &b.psi_e)
        + frob_diff(&a.psi_f, &b.psi_f))
    .sqrt()
}

fn original_delta(a: &OriginalPplsParams, b: &OriginalPplsParams) -> f64 {
    (frob_diff(&a.w, &b.w)
        + frob_diff(&a.c, &b.c)
        + (a.sigma_t.values() - b.sigma_t.values()).norm_squared()
        + (a.b.values() - b.b.values()).norm_squared()
        + (a.sigma_e2 - b.sigma_e2).powi(2)
        + (a.sigma_f2 - b.sigma_f2).powi(2)
        + (a.sigma_h2 - b.sigma_h2).powi(2))
    .sqrt()
}

fn first_row(loglik: f64) -> EmTraceRow {
    EmTraceRow {
        iteration: 0,
        loglik,
        param_delta: 0.0,
        stiefel_iters_w: 0,
        stiefel_iters_c: 0,
    }
}

fn nonfinite(iteration: usize, trace: &EmTrace) -> PplsError {
    PplsError::Numerical(format!(
        "log-likelihood became non-finite at iteration {iteration} (last finite value {:?})",
        trace.final_loglik()
    ))
}

/// Run extended-model EM from `init` on precomputed statistics.
pub fn run_extended_em(
    stats: &GramStats,
    init: ExtendedPplsParams,
    cfg: &EmConfig,
) -> Result<(ExtendedPplsParams, EmTrace)> {
    cfg.validate()?;
    let mut params = init;
    let mut fac = Factored::new(&extended_covariance_unchecked(&params).stacked())?;
    let mut ll = fac.loglik(stats);
    let mut trace = EmTrace {
        rows: vec![first_row(ll)],
        converged: false,
    };
    for iteration in 1..=cfg.max_iters {
        let cross = extended_cross(stats, &params, &fac);
        let (next, it_w, it_c) = mstep_extended_inner(stats, &cross, &params, cfg)
            .map_err(|e| PplsError::Numerical(format!("extended EM iteration {iteration}: {e}")))?;
        let next_fac = Factored::new(&extended_covariance_unchecked(&next).stacked())
            .map_err(|e| PplsError::Numerical(format!("extended EM iteration {iteration}: {e}")))?;
        let next_ll = next_fac.loglik(stats);
        if !next_ll.is_finite() {
            return Err(nonfinite(iteration, &trace));
        }
        trace.rows.push(EmTraceRow {
            iteration,
            loglik: next_ll,
            param_delta: extended_delta(&params, &next),
            stiefel_iters_w: it_w,
            stiefel_iters_c: it_c,
        });
        let done = converged(ll, next_ll, cfg.loglik_tol);
        params = next;
        fac = next_fac;
        ll = next_ll;
        if done {
            trace.converged = true;
            break;
        }
    }
    let report = validate_extended(&params);
    if !report.is_empty() {
        return Err(PplsError::Validation(report));
    }
    Ok((params, trace))
}

/// Run original-model EM from `init` on precomputed statistics.
pub fn run_original_em(
    stats: &GramStats,
    init: OriginalPplsParams,
    cfg: &EmConfig,
) -> Result<(OriginalPplsParams, EmTrace)> {
    cfg.validate()?;
    let mut params = init;
    let mut fac = Factored::new(&original_covariance_unchecked(&params).stacked())?;
    let mut ll = fac.loglik(stats);
    let mut trace = EmTrace {
        rows: vec![first_row(ll)],
        converged: false,
    };
    for iteration in 1..=cfg.max_iters {
        let moments = original_moments(stats, &params, &fac);
        let next = mstep_original(stats, &moments, cfg)
            .map_err(|e| PplsError::Numerical(format!("original EM iteration {iteration}: {e}")))?;
        let next_fac = Factored::new(&original_covariance_unchecked(&next).stacked())
            .map_err(|e| PplsError::Numerical(format!("original EM iteration {iteration}: {e}")))?;
        let next_ll = next_fac.loglik(stats);
        if !next_ll.is_finite() {
            return Err(nonfinite(iteration, &trace));
        }
        trace.rows.push(EmTraceRow {
            iteration,
            loglik: next_ll,
            param_delta: original_delta(&params, &next),
            stiefel_iters_w: 0,
            stiefel_iters_c: 0,
        });
        let done = converged(ll, next_ll, cfg.loglik_tol);
        params = next;
        fac = next_fac;
        ll = next_ll;
        if done {
            trace.converged = true;
            break;
        }
    }
    let report = validate_original(&params);
    if !report.is_empty() {
        return Err(PplsError::Validation(report));
    }
    Ok((params, trace))
}

/// Fit the extended model to column-centered data.
pub fn fit_extended_em(
    x: &Mat,
    y: &Mat,
    r: usize,
    cfg: &EmConfig,
    rng: &mut RngStream,
) -> Result<(ExtendedPplsParams, EmTrace)> {
    cfg.validate()?;
    let stats = prepare(x, y, r)?;
    let init = match cfg.init {
        InitStrategy::SvdStart => svd_start_extended(&stats, r)?,
        InitStrategy::RandomStart => random_start_extended(&stats, r, rng)?,
    };
    run_extended_em(&stats, init, cfg)
}

/// Fit the original model to column-centered data.
pub fn fit_original_em(
    x: &Mat,
    y: &Mat,
    r: usize,
    cfg: &EmConfig,
    rng: &mut RngStream,
) -> Result<(OriginalPplsParams, EmTrace)> {
    cfg.validate()?;
    let stats = prepare(x, y, r)?;
    let init = match cfg.init {
        InitStrategy::SvdStart => svd_start_original(&stats, r)?,
        InitStrategy::RandomStart => random_start_original(&stats, r, rng)?,
    };
    run_original_em(&stats, init, cfg)
}

/// Population log-likelihood per observation, used by tests and diagnostics.
pub fn population_loglik(cov_model: &JointCovariance, cov_data: &JointCovariance) -> Result<f64> {
    loglik_from_stats(&GramStats::population(cov_data, 1), cov_model)
}
