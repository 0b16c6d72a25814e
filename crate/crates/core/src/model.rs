//! Parameter sets for the original and extended PPLS models and for PPCA,
//! together with constraint validation, population covariances, the
//! PPLS → PPCA reduction, the PPCA parametrization maps and generative sampling.
//!
//! The original model relates `x ∈ ℝᵖ`, `y ∈ ℝ^q` to latent `t, u ∈ ℝʳ` via
//! `x = t Wᵀ + e`, `y = u Cᵀ + f`, `u = t B + h` with isotropic noise.
//! The extended model drops `u`, keeping `x = t Wᵀ + e`, `y = t Cᵀ + f`, and
//! lets `e`, `f` carry arbitrary PSD covariances `Ψ_e`, `Ψ_f`.

use std::fmt;

use crate::error::{PplsError, Result};
use crate::linalg::{
    asymmetry, orthonormality_error, svd_ordered, sym_eig_desc, symmetrize, Mat, RngStream, Vector,
};

/// Tolerance for every exact constraint (semi-orthogonality, symmetry, PSD).
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// A diagonal matrix stored by its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal(Vector);

impl Diagonal {
    pub fn new(values: Vec<f64>) -> Self {
        Self(Vector::from_vec(values))
    }

    pub fn from_vector(values: Vector) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &Vector {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_matrix(&self) -> Mat {
        Mat::from_diagonal(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.sum()
    }

    /// Entrywise product, i.e. the product of two diagonal matrices.
    pub fn product(&self, other: &Diagonal) -> Diagonal {
        Diagonal(self.0.component_mul(&other.0))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Diagonal {
        Diagonal(self.0.map(f))
    }

    pub fn all_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0 && v.is_finite())
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.0.as_slice().windows(2).all(|w| w[0] > w[1])
    }

    /// Reorder entries so that entry `j` of the result is entry `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Diagonal {
        Diagonal::new(perm.iter().map(|&i| self.0[i]).collect())
    }

    /// Scale the columns of `m` by the diagonal: `m · diag`.
    pub fn scale_columns(&self, m: &Mat) -> Mat {
        let mut out = m.clone();
        for (j, &d) in self.0.iter().enumerate() {
            out.column_mut(j).scale_mut(d);
        }
        out
    }
}

/// Observed block of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

/// Labelled model constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    CStar,
    DStar,
    HStar,
}

impl Constraint {
    pub fn label(self) -> &'static str {
        match self {
            Constraint::A => "(a)",
            Constraint::B => "(b)",
            Constraint::C => "(c)",
            Constraint::D => "(d)",
            Constraint::E => "(e)",
            Constraint::F => "(f)",
            Constraint::G => "(g)",
            Constraint::H => "(h)",
            Constraint::I => "(i)",
            Constraint::CStar => "(c*)",
            Constraint::DStar => "(d*)",
            Constraint::HStar => "(h*)",
        }
    }

    /// Ordering constraints only fix the column order for identifiability;
    /// the distribution of `(x, y)` is well defined without them.
    pub fn is_ordering(self) -> bool {
        matches!(self, Constraint::H | Constraint::HStar)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

/// Every violated constraint of a parameter set. Empty iff the set is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, constraint: Constraint, detail: impl Into<String>) {
        self.violations.push(Violation {
            constraint,
            detail: detail.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn contains(&self, constraint: Constraint) -> bool {
        self.violations.iter().any(|v| v.constraint == constraint)
    }

    pub fn constraints(&self) -> Vec<Constraint> {
        self.violations.iter().map(|v| v.constraint).collect()
    }

    /// Split into (structural violations, ordering violations).
    pub fn split_ordering(self) -> (ValidationReport, ValidationReport) {
        let (ord, rest): (Vec<_>, Vec<_>) = self
            .violations
            .into_iter()
            .partition(|v| v.constraint.is_ordering());
        (
            ValidationReport { violations: rest },
            ValidationReport { violations: ord },
        )
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("all constraints hold");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} {}", v.constraint, v.detail)?;
        }
        Ok(())
    }
}

/// How strictly generative operations enforce the constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintPolicy {
    /// Any violation is an error.
    #[default]
    Strict,
    /// Ordering constraints (h)/(h*) are downgraded to warnings.
    AllowUnordered,
}

impl ConstraintPolicy {
    /// Turn a report into either an error or a (possibly empty) warning report.
    pub fn enforce(self, report: ValidationReport) -> Result<ValidationReport> {
        match self {
            ConstraintPolicy::Strict if report.is_empty() => Ok(report),
            ConstraintPolicy::Strict => Err(PplsError::Validation(report)),
            ConstraintPolicy::AllowUnordered => {
                let (structural, ordering) = report.split_ordering();
                if structural.is_empty() {
                    Ok(ordering)
                } else {
                    Err(PplsError::Validation(structural))
                }
            }
        }
    }
}

/// Parameters `θ = (W, C, B, Σ_t, σ_e², σ_f², σ_h²)` of the original model.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginalPplsParams {
    pub w: Mat,
    pub c: Mat,
    pub b: Diagonal,
    pub sigma_t: Diagonal,
    pub sigma_e2: f64,
    pub sigma_f2: f64,
    pub sigma_h2: f64,
}

/// Parameters `θ = (W, C, Σ_t, Ψ_e, Ψ_f)` of the extended model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPplsParams {
    pub w: Mat,
    pub c: Mat,
    pub sigma_t: Diagonal,
    pub psi_e: Mat,
    pub psi_f: Mat,
}

/// PPCA with semi-orthogonal loadings: `z = v Vᵀ + g`, `v ~ N(0, Σ_v)`, `g ~ N(0, σ_g² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PpcaParams {
    pub v: Mat,
    pub sigma_v: Diagonal,
    pub sigma_g2: f64,
}

/// Either model's parameter set.
#[derive(Debug, Clone, PartialEq)]
pub enum PplsParams {
    Original(OriginalPplsParams),
    Extended(ExtendedPplsParams),
}

/// Block covariance of `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCovariance {
    pub var_x: Mat,
    pub var_y: Mat,
    pub cov_xy: Mat,
}

/// Observed sample, with the generating latent scores kept for test oracles.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Mat,
    pub y: Mat,
    pub latent: Option<Mat>,
}

impl JointCovariance {
    pub fn p(&self) -> usize {
        self.var_x.nrows()
    }

    pub fn q(&self) -> usize {
        self.var_y.nrows()
    }

    /// The `(p+q) × (p+q)` matrix `[[Var x, Cov(x,y)], [Cov(y,x), Var y]]`.
    pub fn stacked(&self) -> Mat {
        let (p, q) = (self.p(), self.q());
        let mut s = Mat::zeros(p + q, p + q);
        s.view_mut((0, 0), (p, p)).copy_from(&self.var_x);
        s.view_mut((p, p), (q, q)).copy_from(&self.var_y);
        s.view_mut((0, p), (p, q)).copy_from(&self.cov_xy);
        s.view_mut((p, 0), (q, p))
            .copy_from(&self.cov_xy.transpose());
        s
    }

    pub fn from_stacked(s: &Mat, p: usize) -> Self {
        let q = s.nrows() - p;
        Self {
            var_x: s.view((0, 0), (p, p)).into_owned(),
            var_y: s.view((p, p), (q, q)).into_owned(),
            cov_xy: s.view((0, p), (p, q)).into_owned(),
        }
    }

    pub fn block(&self, side: Side) -> &Mat {
        match side {
            Side::X => &self.var_x,
            Side::Y => &self.var_y,
        }
    }
}

impl OriginalPplsParams {
    pub fn p(&self) -> usize {
        self.w.nrows()
    }

    pub fn q(&self) -> usize {
        self.c.nrows()
    }

    pub fn r(&self) -> usize {
        self.sigma_t.len()
    }

    /// `Σ_t B²  + σ_h² I`, the covariance of `u`.
    pub fn var_u(&self) -> Diagonal {
        let h = self.sigma_h2;
        self.sigma_t
            .product(&self.b)
            .product(&self.b)
            .map(|v| v + h)
    }
}

impl ExtendedPplsParams {
    pub fn p(&self) -> usize {
        self.w.nrows()
    }

    pub fn q(&self) -> usize {
        self.c.nrows()
    }

    pub fn r(&self) -> usize {
        self.sigma_t.len()
    }
}

impl PplsParams {
    pub fn weights(&self) -> (&Mat, &Mat) {
        match self {
            PplsParams::Original(o) => (&o.w, &o.c),
            PplsParams::Extended(e) => (&e.w, &e.c),
        }
    }

    pub fn r(&self) -> usize {
        match self {
            PplsParams::Original(o) => o.r(),
            PplsParams::Extended(e) => e.r(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            PplsParams::Original(o) => validate_original(o),
            PplsParams::Extended(e) => validate_extended(e),
        }
    }

    pub fn population_covariance(&self, policy: ConstraintPolicy) -> Result<JointCovariance> {
        match self {
            PplsParams::Original(o) => population_covariance_original_with(o, policy),
            PplsParams::Extended(e) => population_covariance_extended_with(e, policy),
        }
    }
}

impl PpcaParams {
    /// `V Σ_v Vᵀ + σ_g² I`.
    pub fn population_covariance(&self) -> Mat {
        let d = self.v.nrows();
        let vs = self.sigma_v.scale_columns(&self.v);
        symmetrize(&(vs * self.v.transpose())) + Mat::identity(d, d) * self.sigma_g2
    }

    pub fn validate(&self) -> Result<()> {
        let (d, r) = self.v.shape();
        if r != self.sigma_v.len() || r == 0 || r >= d {
            return Err(PplsError::Dimension(format!(
                "PPCA needs 0 < r < d, got V {d}x{r} and {} latent variances",
                self.sigma_v.len()
            )));
        }
        if orthonormality_error(&self.v) > CONSTRAINT_TOL {
            return Err(PplsError::InvalidInput("V is not semi-orthogonal".into()));
        }
        if !self.sigma_v.all_positive() || !(self.sigma_g2 > 0.0) {
            return Err(PplsError::InvalidInput(
                "PPCA variances must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_semi_orthogonal(
    report: &mut ValidationReport,
    name: &str,
    m: &Mat,
    rows: usize,
    r: usize,
    label: Constraint,
) {
    if m.ncols() != r || m.nrows() != rows {
        report.push(
            label,
            format!("{name} is {}x{}, expected {rows}x{r}", m.nrows(), m.ncols()),
        );
        return;
    }
    if m.iter().any(|v| !v.is_finite()) {
        report.push(label, format!("{name} has non-finite entries"));
        return;
    }
    let err = orthonormality_error(m);
    if err > CONSTRAINT_TOL {
        report.push(
            label,
            format!("{name} is not semi-orthogonal (max |{name}ᵀ{name} - I| = {err:e})"),
        );
    }
}

fn check_positive_scalar(report: &mut ValidationReport, name: &str, v: f64, label: Constraint) {
    if !(v > 0.0 && v.is_finite()) {
        report.push(label, format!("{name} = {v} must be strictly positive"));
    }
}

fn check_psd(report: &mut ValidationReport, name: &str, m: &Mat, dim: usize, label: Constraint) {
    if m.shape() != (dim, dim) {
        report.push(
            label,
            format!(
                "{name} is {}x{}, expected {dim}x{dim}",
                m.nrows(),
                m.ncols()
            ),
        );
        return;
    }
    if m.iter().any(|v| !v.is_finite()) {
        report.push(label, format!("{name} has non-finite entries"));
        return;
    }
    let asym = asymmetry(m);
    if asym > CONSTRAINT_TOL {
        report.push(
            label,
            format!("{name} is not symmetric (max asymmetry {asym:e})"),
        );
        return;
    }
    match sym_eig_desc(m) {
        Ok(e) if e.values.min() < -CONSTRAINT_TOL => report.push(
            label,
            format!(
                "{name} is not positive semi-definite (smallest eigenvalue {:e})",
                e.values.min()
            ),
        ),
        Ok(_) => {}
        Err(err) => report.push(label, format!("{name}: {err}")),
    }
}

fn check_rank(report: &mut ValidationReport, p: usize, q: usize, r: usize) {
    if r == 0 || r >= p.min(q) {
        report.push(
            Constraint::I,
            format!("r = {r} must satisfy 0 < r < min(p, q) = {}", p.min(q)),
        );
    }
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// Check constraints (a)–(i) of the original model.
pub fn validate_original(params: &OriginalPplsParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    let r = params.r();
    if r == 0 {
        report.push(Constraint::B, "Σ_t is empty");
    } else if !params.sigma_t.all_positive() {
        report.push(
            Constraint::B,
            format!(
                "Σ_t diagonal {} must be strictly positive",
                fmt_list(params.sigma_t.as_slice())
            ),
        );
    }
    check_positive_scalar(&mut report, "σ_e²", params.sigma_e2, Constraint::C);
    check_positive_scalar(&mut report, "σ_f²", params.sigma_f2, Constraint::D);
    check_positive_scalar(&mut report, "σ_h²", params.sigma_h2, Constraint::E);
    check_semi_orthogonal(&mut report, "W", &params.w, params.p(), r, Constraint::F);
    check_semi_orthogonal(&mut report, "C", &params.c, params.q(), r, Constraint::F);
    if params.b.len() != r {
        report.push(
            Constraint::G,
            format!("B has {} diagonal entries, expected {r}", params.b.len()),
        );
    } else if !params.b.all_positive() {
        report.push(
            Constraint::G,
            format!(
                "B diagonal {} must be strictly positive",
                fmt_list(params.b.as_slice())
            ),
        );
    } else {
        let sb = params.sigma_t.product(&params.b);
        if !sb.is_strictly_decreasing() {
            report.push(
                Constraint::H,
                format!(
                    "diag(Σ_t B) = {} is not strictly decreasing",
                    fmt_list(sb.as_slice())
                ),
            );
        }
    }
    check_rank(&mut report, params.p(), params.q(), r);
    report
}

/// Check constraints (a), (b), (c*), (d*), (f), (h*), (i) of the extended model.
pub fn validate_extended(params: &ExtendedPplsParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    let r = params.r();
    if r == 0 {
        report.push(Constraint::B, "Σ_t is empty");
    } else if !params.sigma_t.all_positive() {
        report.push(
            Constraint::B,
            format!(
                "Σ_t diagonal {} must be strictly positive",
                fmt_list(params.sigma_t.as_slice())
            ),
        );
    }
    check_psd(
        &mut report,
        "Ψ_e",
        &params.psi_e,
        params.p(),
        Constraint::CStar,
    );
    check_psd(
        &mut report,
        "Ψ_f",
        &params.psi_f,
        params.q(),
        Constraint::DStar,
    );
    check_semi_orthogonal(&mut report, "W", &params.w, params.p(), r, Constraint::F);
    check_semi_orthogonal(&mut report, "C", &params.c, params.q(), r, Constraint::F);
    if !params.sigma_t.is_strictly_decreasing() {
        report.push(
            Constraint::HStar,
            format!(
                "diag(Σ_t) = {} is not strictly decreasing",
                fmt_list(params.sigma_t.as_slice())
            ),
        );
    }
    check_rank(&mut report, params.p(), params.q(), r);
    report
}

/// `Var x = W Σ_t Wᵀ + σ_e² I`, `Var y = C (Σ_t B² + σ_h² I) Cᵀ + σ_f² I`,
/// `Cov(x, y) = W Σ_t B Cᵀ`.
pub fn population_covariance_original(params: &OriginalPplsParams) -> Result<JointCovariance> {
    population_covariance_original_with(params, ConstraintPolicy::Strict)
}

pub fn population_covariance_original_with(
    params: &OriginalPplsParams,
    policy: ConstraintPolicy,
) -> Result<JointCovariance> {
    policy.enforce(validate_original(params))?;
    Ok(original_covariance_unchecked(params))
}

pub(crate) fn original_covariance_unchecked(params: &OriginalPplsParams) -> JointCovariance {
    let (p, q) = (params.p(), params.q());
    let w_st = params.sigma_t.scale_columns(&params.w);
    let var_x = symmetrize(&(&w_st * params.w.transpose())) + Mat::identity(p, p) * params.sigma_e2;
    let c_vu = params.var_u().scale_columns(&params.c);
    let var_y = symmetrize(&(c_vu * params.c.transpose())) + Mat::identity(q, q) * params.sigma_f2;
    let cov_xy = params.b.scale_columns(&w_st) * params.c.transpose();
    JointCovariance {
        var_x,
        var_y,
        cov_xy,
    }
}

/// `Var x = W Σ_t Wᵀ + Ψ_e`, `Var y = C Σ_t Cᵀ + Ψ_f`, `Cov(x, y) = W Σ_t Cᵀ`.
pub fn population_covariance_extended(params: &ExtendedPplsParams) -> Result<JointCovariance> {
    population_covariance_extended_with(params, ConstraintPolicy::Strict)
}

pub fn population_covariance_extended_with(
    params: &ExtendedPplsParams,
    policy: ConstraintPolicy,
) -> Result<JointCovariance> {
    policy.enforce(validate_extended(params))?;
    Ok(extended_covariance_unchecked(params))
}

pub(crate) fn extended_covariance_unchecked(params: &ExtendedPplsParams) -> JointCovariance {
    let w_st = params.sigma_t.scale_columns(&params.w);
    let c_st = params.sigma_t.scale_columns(&params.c);
    JointCovariance {
        var_x: symmetrize(&(&w_st * params.w.transpose() + &params.psi_e)),
        var_y: symmetrize(&(c_st * params.c.transpose() + &params.psi_f)),
        cov_xy: w_st * params.c.transpose(),
    }
}

/// The PPCA model satisfied by one block of the original model.
pub fn induced_ppca(params: &OriginalPplsParams, side: Side) -> Result<PpcaParams> {
    induced_ppca_with(params, side, ConstraintPolicy::Strict)
}

pub fn induced_ppca_with(
    params: &OriginalPplsParams,
    side: Side,
    policy: ConstraintPolicy,
) -> Result<PpcaParams> {
    policy.enforce(validate_original(params))?;
    Ok(match side {
        Side::X => PpcaParams {
            v: params.w.clone(),
            sigma_v: params.sigma_t.clone(),
            sigma_g2: params.sigma_e2,
        },
        Side::Y => PpcaParams {
            v: params.c.clone(),
            sigma_v: params.var_u(),
            sigma_g2: params.sigma_f2,
        },
    })
}

/// The two equivalent PPCA parametrizations: semi-orthogonal loadings with a
/// diagonal latent covariance, or an unconstrained loading `A` with identity
/// latent covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum PpcaForm {
    Constrained(PpcaParams),
    Unconstrained { loading: Mat, sigma_g2: f64 },
}

/// Map a PPCA parametrization to the other one.
///
/// Constrained → unconstrained returns `A = V Σ_v^{1/2}`. Unconstrained →
/// constrained factors `A Aᵀ = Q_r Δ_r Q_rᵀ` and returns `V = Q_r`, `Σ_v = Δ_r`.
pub fn ppca_equiv_map(form: &PpcaForm) -> Result<PpcaForm> {
    match form {
        PpcaForm::Constrained(params) => {
            if params.v.ncols() != params.sigma_v.len() {
                return Err(PplsError::Dimension(
                    "V and Σ_v disagree on the latent dimension".into(),
                ));
            }
            if !params.sigma_v.all_positive() {
                return Err(PplsError::InvalidInput(
                    "Σ_v must be strictly positive".into(),
                ));
            }
            let loading = params.sigma_v.map(f64::sqrt).scale_columns(&params.v);
            Ok(PpcaForm::Unconstrained {
                loading,
                sigma_g2: params.sigma_g2,
            })
        }
        PpcaForm::Unconstrained { loading, sigma_g2 } => {
            let (d, r) = loading.shape();
            if r == 0 || r > d {
                return Err(PplsError::Dimension(format!(
                    "loading must be d x r with 0 < r <= d, got {d}x{r}"
                )));
            }
            let gram = symmetrize(&(loading * loading.transpose()));
            let eig = sym_eig_desc(&gram)?;
            let top = eig.values[0].max(f64::MIN_POSITIVE);
            let rank = eig
                .values
                .iter()
                .filter(|&&v| v > 1e-12 * top && v > 0.0)
                .count();
            if rank < r {
                return Err(PplsError::RankDeficient {
                    expected: r,
                    found: rank,
                });
            }
            Ok(PpcaForm::Constrained(PpcaParams {
                v: eig.vectors.columns(0, r).into_owned(),
                sigma_v: Diagonal::new(eig.values.iter().take(r).copied().collect()),
                sigma_g2: *sigma_g2,
            }))
        }
    }
}

/// Recover extended-model parameters from a population covariance: `W`, `C`,
/// `Σ_t` from the top-`r` SVD of `Cov(x, y)`, then `Ψ_e`, `Ψ_f` as the
/// remainders of the variance blocks. `W`, `C` carry the SVD sign convention.
pub fn identify_extended(cov: &JointCovariance, r: usize) -> Result<ExtendedPplsParams> {
    let svd = svd_ordered(&cov.cov_xy, r)?;
    let sigma_t = Diagonal::from_vector(svd.singvals.clone());
    let w_st = sigma_t.scale_columns(&svd.left);
    let c_st = sigma_t.scale_columns(&svd.right);
    let psi_e = symmetrize(&(&cov.var_x - w_st * svd.left.transpose()));
    let psi_f = symmetrize(&(&cov.var_y - c_st * svd.right.transpose()));
    Ok(ExtendedPplsParams {
        w: svd.left,
        c: svd.right,
        sigma_t,
        psi_e,
        psi_f,
    })
}

/// Draw `n` observations from the structural equations.
pub fn sample_dataset(params: &PplsParams, n: usize, rng: &mut RngStream) -> Result<Dataset> {
    sample_dataset_with(params, n, rng, ConstraintPolicy::Strict)
}

pub fn sample_dataset_with(
    params: &PplsParams,
    n: usize,
    rng: &mut RngStream,
    policy: ConstraintPolicy,
) -> Result<Dataset> {
    if n == 0 {
        return Err(PplsError::InvalidInput(
            "sample size must be at least 1".into(),
        ));
    }
    policy.enforce(params.validate())?;
    match params {
        PplsParams::Original(o) => Ok(sample_original(o, n, rng)),
        PplsParams::Extended(e) => sample_extended(e, n, rng),
    }
}

fn scaled_normals(n: usize, sd: &[f64], rng: &mut RngStream) -> Mat {
    let mut m = rng.normal_matrix(n, sd.len());
    for (j, s) in sd.iter().enumerate() {
        m.column_mut(j).scale_mut(*s);
    }
    m
}

fn sample_original(params: &OriginalPplsParams, n: usize, rng: &mut RngStream) -> Dataset {
    let (p, q, r) = (params.p(), params.q(), params.r());
    let sd_t: Vec<f64> = params.sigma_t.as_slice().iter().map(|v| v.sqrt()).collect();
    let t = scaled_normals(n, &sd_t, rng);
    let h = scaled_normals(n, &vec![params.sigma_h2.sqrt(); r], rng);
    let e = scaled_normals(n, &vec![params.sigma_e2.sqrt(); p], rng);
    let f = scaled_normals(n, &vec![params.sigma_f2.sqrt(); q], rng);
    let u = params.b.scale_columns(&t) + h;
    Dataset {
        x: &t * params.w.transpose() + e,
        y: u * params.c.transpose() + f,
        latent: Some(t),
    }
}

fn sample_extended(params: &ExtendedPplsParams, n: usize, rng: &mut RngStream) -> Result<Dataset> {
    let sd_t: Vec<f64> = params.sigma_t.as_slice().iter().map(|v| v.sqrt()).collect();
    let t = scaled_normals(n, &sd_t, rng);
    let e = crate::linalg::mvn_sample(&params.psi_e, n, rng)?;
    let f = crate::linalg::mvn_sample(&params.psi_f, n, rng)?;
    Ok(Dataset {
        x: &t * params.w.transpose() + e,
        y: &t * params.c.transpose() + f,
        latent: Some(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, sample_semi_orthogonal};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn e_cols(d: usize, cols: &[usize]) -> Mat {
        let mut m = Mat::zeros(d, cols.len());
        for (j, &i) in cols.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        m
    }

    fn simple_original() -> OriginalPplsParams {
        OriginalPplsParams {
            w: e_cols(5, &[0, 1, 2]),
            c: e_cols(4, &[1, 2, 3]),
            b: Diagonal::new(vec![1.0, 1.0, 1.0]),
            sigma_t: Diagonal::new(vec![3.0, 2.0, 1.0]),
            sigma_e2: 0.5,
            sigma_f2: 0.5,
            sigma_h2: 0.5,
        }
    }

    #[test]
    fn valid_original_has_empty_report() {
        assert!(validate_original(&simple_original()).is_empty());
    }

    #[test]
    fn simulation_values_violate_ordering() {
        let mut p = simple_original();
        p.sigma_t = Diagonal::new(vec![1.0, 0.81873, 0.67032]);
        p.b = Diagonal::new(vec![1.5, 2.02479, 2.73318]);
        let report = validate_original(&p);
        assert_eq!(report.constraints(), vec![Constraint::H]);
        let sb = p.sigma_t.product(&p.b);
        assert_abs_diff_eq!(sb.as_slice()[1], 1.65776, epsilon = 1e-5);
        assert_abs_diff_eq!(sb.as_slice()[2], 1.83210, epsilon = 1e-5);
        assert!(format!("{report}").contains("(h)"));
    }

    #[test]
    fn rank_boundary_violates_i() {
        let mut p = simple_original();
        p.c = e_cols(3, &[0, 1, 2]);
        assert!(validate_original(&p).contains(Constraint::I));
    }

    #[test]
    fn original_detects_each_structural_violation() {
        let mut p = simple_original();
        p.sigma_t = Diagonal::new(vec![3.0, -2.0, 1.0]);
        p.sigma_e2 = 0.0;
        p.sigma_f2 = -1.0;
        p.sigma_h2 = f64::NAN;
        p.w[(0, 0)] = 2.0;
        p.b = Diagonal::new(vec![1.0, 0.0, 1.0]);
        let c = validate_original(&p).constraints();
        for k in [
            Constraint::B,
            Constraint::C,
            Constraint::D,
            Constraint::E,
            Constraint::F,
            Constraint::G,
        ] {
            assert!(c.contains(&k), "missing {k}");
        }
    }

    fn simple_extended() -> ExtendedPplsParams {
        ExtendedPplsParams {
            w: e_cols(4, &[0, 1]),
            c: e_cols(3, &[0, 2]),
            sigma_t: Diagonal::new(vec![2.0, 1.0]),
            psi_e: Mat::identity(4, 4) * 0.3,
            psi_f: Mat::identity(3, 3) * 0.3,
        }
    }

    #[test]
    fn extended_validation() {
        assert!(validate_extended(&simple_extended()).is_empty());

        let mut p = simple_extended();
        p.psi_e[(3, 3)] = -0.1;
        assert_eq!(validate_extended(&p).constraints(), vec![Constraint::CStar]);

        let mut p = simple_extended();
        p.w = e_cols(4, &[0, 1, 2]);
        p.c = e_cols(5, &[0, 1, 2]);
        p.psi_f = Mat::identity(5, 5);
        p.sigma_t = Diagonal::new(vec![1.0, 1.0, 0.5]);
        assert_eq!(validate_extended(&p).constraints(), vec![Constraint::HStar]);
    }

    #[test]
    fn original_covariance_block_arithmetic() {
        let p = OriginalPplsParams {
            w: dmatrix![1.0; 0.0],
            c: dmatrix![0.0; 1.0],
            b: Diagonal::new(vec![2.0]),
            sigma_t: Diagonal::new(vec![1.0]),
            sigma_e2: 0.5,
            sigma_f2: 0.5,
            sigma_h2: 0.5,
        };
        // r = 1 < min(2, 2) holds
        let cov = original_covariance_unchecked(&p);
        assert_abs_diff_eq!(cov.var_x, dmatrix![1.5, 0.0; 0.0, 0.5], epsilon = 1e-15);
        assert_abs_diff_eq!(cov.var_y, dmatrix![0.5, 0.0; 0.0, 5.0], epsilon = 1e-15);
        assert_abs_diff_eq!(cov.cov_xy, dmatrix![0.0, 2.0; 0.0, 0.0], epsilon = 1e-15);
        assert!(population_covariance_original(&p).is_ok());
    }

    #[test]
    fn original_covariance_linear_in_sigma_t_and_b_identity() {
        let mut p = simple_original();
        let eps = 1e-6;
        p.sigma_t = Diagonal::new(vec![3.0 * eps, 2.0 * eps, eps]);
        p.b = Diagonal::new(vec![2.0, 2.0, 2.0]);
        let cov = population_covariance_original(&p).unwrap();
        let expected = p.sigma_t.scale_columns(&p.w) * 2.0 * p.c.transpose();
        assert_abs_diff_eq!(cov.cov_xy, expected, epsilon = 1e-18);

        let p = simple_original();
        let cov = population_covariance_original(&p).unwrap();
        let expected = p.sigma_t.scale_columns(&p.w) * p.c.transpose();
        assert_abs_diff_eq!(cov.cov_xy, expected, epsilon = 1e-15);

        let mut bad = simple_original();
        bad.sigma_t = Diagonal::new(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            population_covariance_original(&bad),
            Err(PplsError::Validation(_))
        ));
        assert!(
            population_covariance_original_with(&bad, ConstraintPolicy::AllowUnordered).is_ok()
        );
    }

    #[test]
    fn extended_covariance_examples() {
        let mut p = simple_extended();
        p.psi_e = Mat::zeros(4, 4);
        p.psi_f = Mat::zeros(3, 3);
        let cov = population_covariance_extended(&p).unwrap();
        let rank = sym_eig_desc(&cov.var_x)
            .unwrap()
            .values
            .iter()
            .filter(|v| v.abs() > 1e-12)
            .count();
        assert_eq!(rank, 2);

        let p = ExtendedPplsParams {
            w: dmatrix![1.0; 0.0],
            c: dmatrix![1.0; 0.0],
            sigma_t: Diagonal::new(vec![1.0]),
            psi_e: Mat::identity(2, 2) * 0.1,
            psi_f: Mat::identity(2, 2) * 0.1,
        };
        let cov = population_covariance_extended(&p).unwrap();
        assert_abs_diff_eq!(cov.var_x, dmatrix![1.1, 0.0; 0.0, 0.1], epsilon = 1e-15);
        assert_abs_diff_eq!(cov.cov_xy, dmatrix![1.0, 0.0; 0.0, 0.0], epsilon = 1e-15);
    }

    #[test]
    fn isotropic_extended_matches_original_with_unit_b() {
        let o = OriginalPplsParams {
            sigma_h2: 0.0,
            ..simple_original()
        };
        let e = ExtendedPplsParams {
            w: o.w.clone(),
            c: o.c.clone(),
            sigma_t: o.sigma_t.clone(),
            psi_e: Mat::identity(5, 5) * o.sigma_e2,
            psi_f: Mat::identity(4, 4) * o.sigma_f2,
        };
        // σ_h² = 0 violates (e); compare the raw formulas
        let a = original_covariance_unchecked(&o);
        let b = population_covariance_extended(&e).unwrap();
        assert_abs_diff_eq!(a.stacked(), b.stacked(), epsilon = 1e-14);
    }

    #[test]
    fn induced_ppca_blocks() {
        let mut o = simple_original();
        o.sigma_t = Diagonal::new(vec![1.0, (-0.2f64).exp(), (-0.4f64).exp()]);
        o.b = Diagonal::new(vec![3.0, 2.0, 1.5]);
        let cov = population_covariance_original(&o).unwrap();
        let x = induced_ppca(&o, Side::X).unwrap();
        assert_abs_diff_eq!(x.sigma_v.as_slice()[1], 0.81873, epsilon = 1e-5);
        assert_abs_diff_eq!(x.sigma_v.as_slice()[2], 0.67032, epsilon = 1e-5);
        assert_abs_diff_eq!(x.population_covariance(), cov.var_x, epsilon = 1e-14);
        let y = induced_ppca(&o, Side::Y).unwrap();
        assert_abs_diff_eq!(y.population_covariance(), cov.var_y, epsilon = 1e-14);
        let expected: Vec<f64> = (0..3)
            .map(|i| o.sigma_t.as_slice()[i] * o.b.as_slice()[i].powi(2) + o.sigma_h2)
            .collect();
        assert_abs_diff_eq!(
            y.sigma_v.values(),
            &Vector::from_vec(expected),
            epsilon = 1e-15
        );
    }

    #[test]
    fn ppca_map_examples() {
        let params = PpcaParams {
            v: e_cols(3, &[0, 1]),
            sigma_v: Diagonal::new(vec![4.0, 1.0]),
            sigma_g2: 0.1,
        };
        let PpcaForm::Unconstrained { loading, .. } =
            ppca_equiv_map(&PpcaForm::Constrained(params)).unwrap()
        else {
            panic!("expected unconstrained form");
        };
        assert_abs_diff_eq!(loading.column(0).norm(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(loading.column(1).norm(), 1.0, epsilon = 1e-15);

        let a = dmatrix![3.0, 0.0; 0.0, -1.0; 0.0, 0.0];
        let PpcaForm::Constrained(back) = ppca_equiv_map(&PpcaForm::Unconstrained {
            loading: a.clone(),
            sigma_g2: 1.0,
        })
        .unwrap() else {
            panic!("expected constrained form");
        };
        for j in 0..2 {
            let na = a.column(j).normalize();
            assert_abs_diff_eq!(back.v.column(j).dot(&na).abs(), 1.0, epsilon = 1e-12);
        }

        let deficient = dmatrix![1.0, 2.0; 2.0, 4.0; 0.0, 0.0];
        assert!(matches!(
            ppca_equiv_map(&PpcaForm::Unconstrained {
                loading: deficient,
                sigma_g2: 1.0
            }),
            Err(PplsError::RankDeficient {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn sampling_shapes_and_noiseless_rank() {
        let o = PplsParams::Original(simple_original());
        let mut rng = RngStream::new(1, 2);
        let d = sample_dataset(&o, 1, &mut rng).unwrap();
        assert_eq!(d.x.shape(), (1, 5));
        assert_eq!(d.y.shape(), (1, 4));
        assert_eq!(d.latent.unwrap().shape(), (1, 3));

        let mut e = simple_extended();
        e.psi_e = Mat::zeros(4, 4);
        e.psi_f = Mat::zeros(3, 3);
        let d = sample_dataset(&PplsParams::Extended(e), 200, &mut rng).unwrap();
        let sv = svd_ordered(&d.x, 4).unwrap().singvals;
        assert!(sv[1] > 1.0);
        assert!(sv[2] < 1e-10 * sv[0]);
        assert!(sample_dataset(&o, 0, &mut rng).is_err());
    }

    #[test]
    fn sampled_cross_covariance_converges() {
        let mut rng = RngStream::new(99, 0);
        let w = sample_semi_orthogonal(5, 2, &mut rng).unwrap();
        let c = sample_semi_orthogonal(4, 2, &mut rng).unwrap();
        let o = OriginalPplsParams {
            w,
            c,
            b: Diagonal::new(vec![1.5, 1.0]),
            sigma_t: Diagonal::new(vec![1.0, 0.8]),
            sigma_e2: 0.3,
            sigma_f2: 0.3,
            sigma_h2: 0.2,
        };
        let n = 100_000;
        let d = sample_dataset(&PplsParams::Original(o.clone()), n, &mut rng).unwrap();
        let emp = d.x.transpose() * &d.y / n as f64;
        let pop = population_covariance_original(&o).unwrap().cov_xy;
        assert!(max_abs(&(emp - pop)) < 0.05);
    }

    #[test]
    fn sampling_is_deterministic() {
        let o = PplsParams::Original(simple_original());
        let a = sample_dataset(&o, 30, &mut RngStream::new(5, 5)).unwrap();
        let b = sample_dataset(&o, 30, &mut RngStream::new(5, 5)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }
}
