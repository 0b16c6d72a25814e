//! The two simulation scenarios: a correctly specified original model and a
//! misspecified model with anisotropic noise. Each replicate draws fresh
//! parameters, samples one dataset per sample size and compares the weights
//! found by every method with the truth and with each other.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::classical::{fit_pca, fit_pls_svd};
use crate::em::{fit_original_em, EmConfig};
use crate::error::{PplsError, Result};
use crate::linalg::{
    sample_semi_orthogonal, sample_spd, stream_id, svd_ordered, sym_eig_desc, Mat, RngStream,
};
use crate::metrics::{aggregate, align_columns, Statistic, Summary};
use crate::model::{
    extended_covariance_unchecked, sample_dataset_with, validate_extended, validate_original,
    ConstraintPolicy, Diagonal, ExtendedPplsParams, OriginalPplsParams, PplsParams,
    ValidationReport,
};

const PARAMS_TAG: u64 = 0x5041_5241_4d53;
const FIT_TAG: u64 = 0x0046_4954;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    PplsEmOriginal,
    Pca,
    PlsSvd,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::PplsEmOriginal, Method::Pca, Method::PlsSvd];

    pub fn name(self) -> &'static str {
        match self {
            Method::PplsEmOriginal => "ppls-em-original",
            Method::Pca => "pca",
            Method::PlsSvd => "pls-svd",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = PplsError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                PplsError::Config(format!(
                    "unknown method `{s}` (expected ppls-em-original, pca or pls-svd)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    /// Correctly specified original model.
    Study1,
    /// Extended model with anisotropic noise.
    Study2,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Study1 => "study1",
            Scenario::Study2 => "study2",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Scenario::Study1 => 1,
            Scenario::Study2 => 2,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = PplsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "study1" => Ok(Scenario::Study1),
            "study2" => Ok(Scenario::Study2),
            other => Err(PplsError::Config(format!(
                "unknown scenario `{other}` (expected study1 or study2)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub snr: f64,
    /// Largest admissible |cos| between variance eigenvectors and
    /// cross-covariance singular vectors in the second scenario.
    pub rejection_threshold: f64,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    /// Condition-number cap of the sampled noise covariances.
    pub condition_cap: f64,
    /// Maximum number of noise draws per replicate before giving up.
    pub rejection_budget: usize,
    pub em: EmConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            p: 20,
            q: 20,
            r: 3,
            sample_sizes: vec![50, 250, 500, 1000, 5000],
            replicates: 100,
            snr: 0.25,
            rejection_threshold: 0.8,
            base_seed: 20240601,
            methods: Method::ALL.to_vec(),
            condition_cap: 100.0,
            rejection_budget: 10_000,
            em: EmConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(PplsError::Config("r must be at least 1".into()));
        }
        if self.r >= self.p.min(self.q) {
            return Err(PplsError::Config(format!(
                "constraint (i) requires r < min(p, q), got r = {}, p = {}, q = {}",
                self.r, self.p, self.q
            )));
        }
        if self.replicates == 0 {
            return Err(PplsError::Config("replicates must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(PplsError::Config("sample_sizes must not be empty".into()));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n <= self.r) {
            return Err(PplsError::Config(format!(
                "sample size {n} must exceed r = {}",
                self.r
            )));
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(PplsError::Config(format!(
                "snr must be positive, got {}",
                self.snr
            )));
        }
        if !(self.rejection_threshold > 0.0 && self.rejection_threshold <= 1.0) {
            return Err(PplsError::Config(format!(
                "rejection_threshold must lie in (0, 1], got {}",
                self.rejection_threshold
            )));
        }
        if self.methods.is_empty() {
            return Err(PplsError::Config("at least one method is required".into()));
        }
        if !(self.condition_cap >= 1.0) || !self.condition_cap.is_finite() {
            return Err(PplsError::Config(format!(
                "condition_cap must be a finite number >= 1, got {}",
                self.condition_cap
            )));
        }
        if self.rejection_budget == 0 {
            return Err(PplsError::Config(
                "rejection_budget must be at least 1".into(),
            ));
        }
        self.em.validate()
    }

    /// Methods in canonical order without duplicates.
    pub fn method_list(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

/// Noise variance giving `Tr(Σ_t) / (dim · σ²) = snr`.
pub fn snr_calibrate(sigma_t: &Diagonal, dim: usize, snr: f64) -> f64 {
    sigma_t.trace() / (snr * dim as f64)
}

/// `σ²_{t_i} = exp(−(i−1)/5)`.
pub fn study_latent_variances(r: usize) -> Diagonal {
    Diagonal::new((0..r).map(|i| (-(i as f64) / 5.0).exp()).collect())
}

/// `b_i = 1.5 exp(3(i−1)/10)`.
pub fn study_inner_coefficients(r: usize) -> Diagonal {
    Diagonal::new(
        (0..r)
            .map(|i| 1.5 * (3.0 * i as f64 / 10.0).exp())
            .collect(),
    )
}

/// Parameters of one replicate together with what it took to build them.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub params: PplsParams,
    /// Constraint violations tolerated by construction (ordering only).
    pub warnings: ValidationReport,
    /// Noise draws used by the acceptance-rejection step (1 for the first scenario).
    pub draws: usize,
}

pub fn build_study1_params(cfg: &StudyConfig, rng: &mut RngStream) -> Result<ScenarioParams> {
    cfg.validate()?;
    let (p, q, r) = (cfg.p, cfg.q, cfg.r);
    let w = sample_semi_orthogonal(p, r, rng)?;
    let c = sample_semi_orthogonal(q, r, rng)?;
    let sigma_t = study_latent_variances(r);
    let b = study_inner_coefficients(r);
    let stb2 = sigma_t.product(&b).product(&b);
    let params = OriginalPplsParams {
        sigma_e2: snr_calibrate(&sigma_t, p, cfg.snr),
        sigma_f2: snr_calibrate(&stb2, q, cfg.snr),
        sigma_h2: snr_calibrate(&stb2, r, cfg.snr),
        w,
        c,
        b,
        sigma_t,
    };
    let warnings = ConstraintPolicy::AllowUnordered.enforce(validate_original(&params))?;
    Ok(ScenarioParams {
        params: PplsParams::Original(params),
        warnings,
        draws: 1,
    })
}

/// Largest aligned |cos| between the top-`r` eigenvectors of `Var(x)` and the
/// left singular vectors of `Cov(x, y)`, and the same for the `y` side.
pub fn study2_closeness(params: &ExtendedPplsParams) -> Result<(f64, f64)> {
    let r = params.r();
    let cov = extended_covariance_unchecked(params);
    let svd = svd_ordered(&cov.cov_xy, r)?;
    let side = |var: &Mat, sing: &Mat| -> Result<f64> {
        let eig = sym_eig_desc(var)?;
        let top = eig.vectors.columns(0, r).into_owned();
        let a = align_columns(&top, sing)?;
        Ok(a.abs_cos.iter().copied().fold(0.0, f64::max))
    };
    Ok((side(&cov.var_x, &svd.left)?, side(&cov.var_y, &svd.right)?))
}

fn scaled_noise(d: usize, target_trace: f64, cap: f64, rng: &mut RngStream) -> Result<Mat> {
    let psi = sample_spd(d, rng, cap)?;
    let tr = psi.trace();
    Ok(psi * (target_trace / tr))
}

pub fn build_study2_params(cfg: &StudyConfig, rng: &mut RngStream) -> Result<ScenarioParams> {
    cfg.validate()?;
    let (p, q, r) = (cfg.p, cfg.q, cfg.r);
    let w = sample_semi_orthogonal(p, r, rng)?;
    let c = sample_semi_orthogonal(q, r, rng)?;
    // already strictly decreasing
    let sigma_t = study_latent_variances(r);
    let target = sigma_t.trace() / cfg.snr;
    for draw in 1..=cfg.rejection_budget {
        let params = ExtendedPplsParams {
            psi_e: scaled_noise(p, target, cfg.condition_cap, rng)?,
            psi_f: scaled_noise(q, target, cfg.condition_cap, rng)?,
            w: w.clone(),
            c: c.clone(),
            sigma_t: sigma_t.clone(),
        };
        let accept = cfg.rejection_threshold >= 1.0 || {
            let (cx, cy) = study2_closeness(&params)?;
            cx < cfg.rejection_threshold && cy < cfg.rejection_threshold
        };
        if accept {
            let report = validate_extended(&params);
            if !report.is_empty() {
                return Err(PplsError::Validation(report));
            }
            return Ok(ScenarioParams {
                params: PplsParams::Extended(params),
                warnings: ValidationReport::default(),
                draws: draw,
            });
        }
    }
    Err(PplsError::Config(format!(
        "no noise draw met rejection_threshold = {} within {} draws; use a looser threshold",
        cfg.rejection_threshold, cfg.rejection_budget
    )))
}

pub fn build_params(
    scenario: Scenario,
    cfg: &StudyConfig,
    rng: &mut RngStream,
) -> Result<ScenarioParams> {
    match scenario {
        Scenario::Study1 => build_study1_params(cfg, rng),
        Scenario::Study2 => build_study2_params(cfg, rng),
    }
}

/// Which block a weight column belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    W,
    C,
}

/// Weight column `index` (0-based) of block `block`; printed as `W1`, `C3`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Component {
    pub block: Block,
    pub index: usize,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = match self.block {
            Block::W => "W",
            Block::C => "C",
        };
        write!(f, "{b}{}", self.index + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reference {
    Truth,
    Method(Method),
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Truth => f.write_str("truth"),
            Reference::Method(m) => f.write_str(m.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Ok,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub study: Scenario,
    pub replicate: usize,
    pub n: usize,
    pub method: Method,
    pub reference: Reference,
    pub component: Component,
    /// NaN when the row is failed.
    pub abs_cos: f64,
    pub status: Status,
    pub seed: u64,
}

impl StudyRow {
    fn key(&self) -> (usize, usize, Method, Reference, Component) {
        (
            self.replicate,
            self.n,
            self.method,
            self.reference,
            self.component,
        )
    }
}

/// Identifies one replicate task in a study.
#[derive(Debug, Clone, Copy)]
pub struct ReplicateKey {
    pub study: Scenario,
    pub replicate: usize,
    pub seed: u64,
}

/// Estimated `(W, C)` weights of one method.
fn fit_method(
    method: Method,
    x: &Mat,
    y: &Mat,
    r: usize,
    em: &EmConfig,
    rng: &mut RngStream,
) -> Result<(Mat, Mat)> {
    match method {
        Method::PplsEmOriginal => {
            let (fit, _) = fit_original_em(x, y, r, em, rng)?;
            Ok((fit.w, fit.c))
        }
        Method::Pca => Ok((fit_pca(x, r)?.weights, fit_pca(y, r)?.weights)),
        Method::PlsSvd => {
            let fit = fit_pls_svd(x, y, r)?;
            Ok((fit.x.weights, fit.y.weights))
        }
    }
}

fn rows_for(
    key: ReplicateKey,
    n: usize,
    method: Method,
    reference: Reference,
    block: Block,
    values: Option<&[f64]>,
    r: usize,
) -> impl Iterator<Item = StudyRow> + '_ {
    (0..r).map(move |index| StudyRow {
        study: key.study,
        replicate: key.replicate,
        n,
        method,
        reference,
        component: Component { block, index },
        abs_cos: values.map_or(f64::NAN, |v| v[index]),
        status: if values.is_some() {
            Status::Ok
        } else {
            Status::Failed
        },
        seed: key.seed,
    })
}

/// Sample one dataset of size `n`, fit every method and compare the weights
/// with the truth and pairwise.
///
/// A failing fit yields `failed` rows for that method; the other methods
/// are unaffected. Method-vs-method rows use the second method's estimate,
/// aligned to the truth, as the reference, so component `j` always refers to
/// the true component `j`.
pub fn run_replicate(
    params: &PplsParams,
    n: usize,
    methods: &[Method],
    em: &EmConfig,
    key: ReplicateKey,
    rng: &mut RngStream,
) -> Result<Vec<StudyRow>> {
    let r = params.r();
    let data = sample_dataset_with(params, n, rng, ConstraintPolicy::AllowUnordered)?;
    let (w_true, c_true) = params.weights();

    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();

    // per method: truth-aligned (W, C) on success
    let mut aligned: Vec<(Method, Option<(Mat, Mat)>)> = Vec::with_capacity(methods.len());
    let mut rows = Vec::new();
    for &method in &methods {
        let mut fit_rng = RngStream::keyed(rng.seed(), &[rng.stream(), FIT_TAG, method.tag()]);
        let fitted =
            fit_method(method, &data.x, &data.y, r, em, &mut fit_rng).and_then(|(w, c)| {
                let aw = align_columns(&w, w_true)?;
                let ac = align_columns(&c, c_true)?;
                Ok((aw, ac, w, c))
            });
        match fitted {
            Ok((aw, ac, w, c)) => {
                rows.extend(rows_for(
                    key,
                    n,
                    method,
                    Reference::Truth,
                    Block::W,
                    Some(&aw.abs_cos),
                    r,
                ));
                rows.extend(rows_for(
                    key,
                    n,
                    method,
                    Reference::Truth,
                    Block::C,
                    Some(&ac.abs_cos),
                    r,
                ));
                aligned.push((method, Some((aw.apply(&w), ac.apply(&c)))));
            }
            Err(_) => {
                rows.extend(rows_for(
                    key,
                    n,
                    method,
                    Reference::Truth,
                    Block::W,
                    None,
                    r,
                ));
                rows.extend(rows_for(
                    key,
                    n,
                    method,
                    Reference::Truth,
                    Block::C,
                    None,
                    r,
                ));
                aligned.push((method, None));
            }
        }
    }

    for (i, (ma, ea)) in aligned.iter().enumerate() {
        for (mb, eb) in &aligned[i + 1..] {
            let reference = Reference::Method(*mb);
            let pair = match (ea, eb) {
                (Some((wa, ca)), Some((wb, cb))) => align_columns(wa, wb)
                    .and_then(|aw| Ok((aw, align_columns(ca, cb)?)))
                    .ok(),
                _ => None,
            };
            let (vw, vc) = match &pair {
                Some((aw, ac)) => (Some(aw.abs_cos.as_slice()), Some(ac.abs_cos.as_slice())),
                None => (None, None),
            };
            rows.extend(rows_for(key, n, *ma, reference, Block::W, vw, r));
            rows.extend(rows_for(key, n, *ma, reference, Block::C, vc, r));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub scenario: Scenario,
    pub rows: Vec<StudyRow>,
    /// Distinct constraint warnings raised while building parameters.
    pub warnings: Vec<String>,
    /// Noise draws per replicate (all 1 in the first scenario).
    pub draws: Vec<usize>,
}

pub const RESULTS_HEADER: &str = "study,replicate,n,method,reference,component,abs_cos,status,seed";
pub const AGGREGATES_HEADER: &str = "study,n,method,reference,component,count,failed,median,q1,q3";

impl StudyResult {
    pub fn acceptance_rate(&self) -> f64 {
        self.draws.len() as f64 / self.draws.iter().sum::<usize>() as f64
    }

    pub fn failed_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.status == Status::Failed)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(RESULTS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.study,
                r.replicate,
                r.n,
                r.method,
                r.reference,
                r.component,
                r.abs_cos,
                r.status,
                r.seed
            );
        }
        out
    }

    /// Per `(n, method, reference, component)` summaries over replicates.
    pub fn aggregates(&self) -> Result<Vec<AggregateRow>> {
        // (values of successful rows, failed count) per group
        type Groups =
            std::collections::BTreeMap<(usize, Method, Reference, Component), (Vec<f64>, usize)>;
        let mut groups = Groups::new();
        for r in &self.rows {
            let entry = groups
                .entry((r.n, r.method, r.reference, r.component))
                .or_default();
            match r.status {
                Status::Ok => entry.0.push(r.abs_cos),
                Status::Failed => entry.1 += 1,
            }
        }
        groups
            .into_iter()
            .map(|((n, method, reference, component), (values, failed))| {
                let (median, q1, q3) = if values.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    match aggregate(&values, Statistic::Quartiles)? {
                        Summary::Quartiles { q1, median, q3 } => (median, q1, q3),
                        Summary::Median(m) => (m, f64::NAN, f64::NAN),
                    }
                };
                Ok(AggregateRow {
                    study: self.scenario,
                    n,
                    method,
                    reference,
                    component,
                    count: values.len(),
                    failed,
                    median,
                    q1,
                    q3,
                })
            })
            .collect()
    }

    /// Median over replicates of one cell, if present.
    pub fn median_of(
        &self,
        n: usize,
        method: Method,
        reference: Reference,
        component: Component,
    ) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| {
                r.n == n
                    && r.method == method
                    && r.reference == reference
                    && r.component == component
                    && r.status == Status::Ok
            })
            .map(|r| r.abs_cos)
            .collect();
        crate::metrics::median(&values).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub study: Scenario,
    pub n: usize,
    pub method: Method,
    pub reference: Reference,
    pub component: Component,
    pub count: usize,
    pub failed: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

pub fn aggregates_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATES_HEADER);
    out.push('\n');
    for a in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            a.study,
            a.n,
            a.method,
            a.reference,
            a.component,
            a.count,
            a.failed,
            a.median,
            a.q1,
            a.q3
        );
    }
    out
}

/// Run the full grid on the current rayon pool.
///
/// Parameters depend only on `(base_seed, scenario, replicate)` and data only
/// on `(base_seed, scenario, replicate, n)`, and rows are sorted by key
/// afterwards, so the result does not depend on the number of threads.
pub fn run_study(cfg: &StudyConfig, scenario: Scenario) -> Result<StudyResult> {
    cfg.validate()?;
    let methods = cfg.method_list();
    let built: Vec<ScenarioParams> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng =
                RngStream::keyed(cfg.base_seed, &[scenario.tag(), rep as u64, PARAMS_TAG]);
            build_params(scenario, cfg, &mut rng)
        })
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, usize)> = (0..cfg.replicates)
        .flat_map(|rep| cfg.sample_sizes.iter().map(move |&n| (rep, n)))
        .collect();
    let chunks: Vec<Vec<StudyRow>> = tasks
        .par_iter()
        .map(|&(rep, n)| {
            let tags = [scenario.tag(), rep as u64, n as u64];
            let key = ReplicateKey {
                study: scenario,
                replicate: rep,
                seed: stream_id(&tags),
            };
            let mut rng = RngStream::keyed(cfg.base_seed, &tags);
            run_replicate(&built[rep].params, n, &methods, &cfg.em, key, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<StudyRow> = chunks.into_iter().flatten().collect();
    rows.sort_by_key(StudyRow::key);

    let mut warnings: Vec<String> = built
        .iter()
        .filter(|b| !b.warnings.is_empty())
        .map(|b| {
            b.warnings
                .constraints()
                .iter()
                .map(|c| c.label())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    warnings.sort();
    warnings.dedup();
    let warnings = warnings
        .into_iter()
        .map(|labels| format!("generating parameters violate ordering constraint {labels}"))
        .collect();

    Ok(StudyResult {
        scenario,
        rows,
        warnings,
        draws: built.iter().map(|b| b.draws).collect(),
    })
}

/// Run the study on a dedicated pool with `threads` workers.
pub fn run_study_with_threads(
    cfg: &StudyConfig,
    scenario: Scenario,
    threads: usize,
) -> Result<StudyResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PplsError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_study(cfg, scenario))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny() -> StudyConfig {
        StudyConfig {
            p: 6,
            q: 5,
            r: 2,
            sample_sizes: vec![40],
            replicates: 2,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn snr_examples() {
        let st = study_latent_variances(3);
        assert_abs_diff_eq!(snr_calibrate(&st, 20, 0.25), 0.49781, epsilon = 1e-5);
        assert_abs_diff_eq!(
            snr_calibrate(&st, 20, st.trace() / 20.0),
            1.0,
            epsilon = 1e-14
        );
        let doubled = st.map(|v| 2.0 * v);
        assert_abs_diff_eq!(
            snr_calibrate(&doubled, 20, 0.25),
            2.0 * snr_calibrate(&st, 20, 0.25),
            epsilon = 1e-14
        );
    }

    #[test]
    fn study1_values() {
        let sp = build_study1_params(&StudyConfig::default(), &mut RngStream::new(1, 1)).unwrap();
        let PplsParams::Original(o) = &sp.params else {
            panic!()
        };
        let st = o.sigma_t.as_slice();
        let b = o.b.as_slice();
        for (got, want) in st.iter().zip([1.0, 0.81873, 0.67032]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
        for (got, want) in b.iter().zip([1.5, 2.02479, 2.73318]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
        assert!(sp.warnings.contains(crate::model::Constraint::H));
        let again =
            build_study1_params(&StudyConfig::default(), &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(again.params, sp.params);
    }

    #[test]
    fn vacuous_threshold_accepts_first_draw() {
        let cfg = StudyConfig {
            rejection_threshold: 1.0,
            ..StudyConfig::default()
        };
        let sp = build_study2_params(&cfg, &mut RngStream::new(2, 2)).unwrap();
        assert_eq!(sp.draws, 1);
    }

    #[test]
    fn accepted_study2_params_meet_threshold() {
        let cfg = StudyConfig::default();
        let sp = build_study2_params(&cfg, &mut RngStream::new(3, 3)).unwrap();
        let PplsParams::Extended(e) = &sp.params else {
            panic!()
        };
        let (cx, cy) = study2_closeness(e).unwrap();
        assert!(cx < 0.8 && cy < 0.8);
        let target = e.sigma_t.trace() / cfg.snr;
        assert_abs_diff_eq!(e.psi_e.trace(), target, epsilon = 1e-10);
    }

    #[test]
    fn impossible_threshold_exhausts_budget() {
        let cfg = StudyConfig {
            rejection_threshold: 1e-9,
            rejection_budget: 3,
            ..StudyConfig::default()
        };
        let err = build_study2_params(&cfg, &mut RngStream::new(4, 4)).unwrap_err();
        assert!(matches!(err, PplsError::Config(_)));
        assert!(err.to_string().contains("looser threshold"));
    }

    #[test]
    fn grid_size() {
        let cfg = StudyConfig {
            methods: vec![Method::Pca],
            sample_sizes: vec![50],
            ..tiny()
        };
        let res = run_study(&cfg, Scenario::Study1).unwrap();
        // W and C columns for each of 2 replicates
        assert_eq!(res.rows.len(), 2 * 2 * cfg.r);
        assert!(res.rows.iter().all(|r| r.reference == Reference::Truth));
    }

    #[test]
    fn pairwise_rows_present() {
        let res = run_study(&tiny(), Scenario::Study2).unwrap();
        // truth rows for 3 methods plus 3 method pairs, W and C, r components
        assert_eq!(res.rows.len(), 2 * (3 + 3) * 2 * 2);
        assert!(res.rows.iter().all(|r| r.status == Status::Ok));
        assert!(res.rows.iter().all(|r| (0.0..=1.0).contains(&r.abs_cos)));
    }

    #[test]
    fn noiseless_pls_svd_is_exact() {
        let mut rng = RngStream::new(5, 5);
        let w = sample_semi_orthogonal(6, 2, &mut rng).unwrap();
        let c = sample_semi_orthogonal(5, 2, &mut rng).unwrap();
        let params = PplsParams::Extended(ExtendedPplsParams {
            w,
            c,
            // the sample latent covariance is only nearly diagonal, so a wide gap
            // keeps the within-span rotation below the tolerance
            sigma_t: Diagonal::new(vec![100.0, 1.0]),
            psi_e: Mat::zeros(6, 6),
            psi_f: Mat::zeros(5, 5),
        });
        let key = ReplicateKey {
            study: Scenario::Study2,
            replicate: 0,
            seed: 0,
        };
        let rows = run_replicate(
            &params,
            50_000,
            &[Method::PlsSvd],
            &EmConfig::default(),
            key,
            &mut rng,
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.abs_cos >= 1.0 - 1e-6), "{rows:?}");
    }

    #[test]
    fn replicate_is_deterministic() {
        let cfg = tiny();
        let a = run_study(&cfg, Scenario::Study1).unwrap();
        let b = run_study(&cfg, Scenario::Study1).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn config_rejects_full_rank() {
        let cfg = StudyConfig {
            r: 20,
            ..StudyConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("(i)"));
    }

    #[test]
    fn aggregates_csv_shape() {
        let res = run_study(&tiny(), Scenario::Study1).unwrap();
        let agg = res.aggregates().unwrap();
        assert_eq!(agg.len(), (3 + 3) * 2 * 2);
        assert!(agg.iter().all(|a| a.count == 2));
        let csv = aggregates_to_csv(&agg);
        assert!(csv.starts_with(AGGREGATES_HEADER));
    }
}
