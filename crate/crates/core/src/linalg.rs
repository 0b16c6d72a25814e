//! Dense matrix primitives shared by every estimator: ordered SVD and
//! symmetric eigendecomposition with a deterministic sign convention,
//! Haar-distributed semi-orthogonal matrices, random SPD matrices and
//! Gaussian sampling driven by reproducible random streams.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PplsError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Top-k singular triplets, singular values nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: Mat,
    pub singvals: Vector,
    pub right: Mat,
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues nonincreasing.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub vectors: Mat,
    pub values: Vector,
}

/// A reproducible random stream keyed by `(seed, stream)`.
///
/// Each parallel task owns its own stream; two streams with the same key
/// produce identical draws regardless of where or when they run.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Stream whose id is a hash of `tags`, so that the id only depends on the
    /// logical task and never on execution order.
    pub fn keyed(seed: u64, tags: &[u64]) -> Self {
        Self::new(seed, stream_id(tags))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `rows × cols` matrix of i.i.d. standard normals, drawn in row-major order.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.standard_normal();
            }
        }
        m
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64-style fold of a tag sequence into a single stream id.
pub fn stream_id(tags: &[u64]) -> u64 {
    let mut h = 0x243f_6a88_85a3_08d3u64;
    for &t in tags {
        h ^= t.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = mix64(h);
    }
    h
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PplsError::InvalidInput(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `‖MᵀM − I‖_max`.
pub fn orthonormality_error(m: &Mat) -> f64 {
    let gram = m.transpose() * m;
    let k = gram.nrows();
    max_abs(&(gram - Mat::identity(k, k)))
}

pub fn asymmetry(m: &Mat) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Index of the entry of largest magnitude; ties go to the lowest index.
fn dominant_index<'a>(col: impl Iterator<Item = &'a f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in col.enumerate() {
        match best {
            Some((_, b)) if v.abs() <= b.abs() => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Sign that makes the largest-magnitude entry of `col` positive.
pub fn canonical_sign(col: &[f64]) -> f64 {
    match dominant_index(col.iter()) {
        Some((_, v)) if v < 0.0 => -1.0,
        _ => 1.0,
    }
}

/// Flip columns of `m` in place so each obeys the sign convention; returns the applied signs.
pub fn canonicalize_signs(m: &mut Mat) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let s = canonical_sign(m.column(j).as_slice());
        if s < 0.0 {
            m.column_mut(j).neg_mut();
        }
        signs.push(s);
    }
    signs
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps the decomposition's order for exact ties
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Top-`k` singular triplets of `m`, singular values nonincreasing.
pub fn svd_ordered(m: &Mat, k: usize) -> Result<SvdResult> {
    ensure_finite(m, "matrix")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(PplsError::Dimension("empty matrix".into()));
    }
    if k == 0 || k > rows.min(cols) {
        return Err(PplsError::Dimension(format!(
            "requested {k} singular triplets of a {rows}x{cols} matrix"
        )));
    }
    let (u, sv, v) = if rows >= cols {
        jacobi_svd(m)?
    } else {
        let (u, sv, v) = jacobi_svd(&m.transpose())?;
        (v, sv, u)
    };
    let order = descending_order(sv.as_slice());

    let mut left = Mat::zeros(rows, k);
    let mut right = Mat::zeros(cols, k);
    let mut singvals = Vector::zeros(k);
    for (j, &src) in order.iter().take(k).enumerate() {
        let s = canonical_sign(u.column(src).as_slice());
        left.set_column(j, &(u.column(src) * s));
        right.set_column(j, &(v.column(src) * s));
        singvals[j] = sv[src].max(0.0);
    }
    Ok(SvdResult {
        left,
        singvals,
        right,
    })
}

/// One-sided Jacobi SVD of a tall matrix (`rows ≥ cols`).
///
/// Returns thin `U` (`rows × cols`), the singular values in the column order
/// they end up in, and square `V`. Columns of `U` belonging to zero singular
/// values are completed to an orthonormal set.
///
/// Used instead of nalgebra's implicit-shift SVD, which can return an
/// inaccurate leading triplet for exactly rank-deficient inputs.
fn jacobi_svd(m: &Mat) -> Result<(Mat, Vector, Mat)> {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut v = Mat::identity(cols, cols);
    let tol = f64::EPSILON * rows as f64;
    let mut converged = false;
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for k in 0..mat.nrows() {
                        let (x, y) = (mat[(k, i)], mat[(k, j)]);
                        mat[(k, i)] = c * x - s * y;
                        mat[(k, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(PplsError::Numerical("Jacobi SVD did not converge".into()));
    }
    let sv = Vector::from_fn(cols, |j, _| a.column(j).norm());
    let top = sv.max();
    let mut u = Mat::zeros(rows, cols);
    let mut filled = vec![false; cols];
    for j in 0..cols {
        if sv[j] > top * f64::EPSILON * rows as f64 && sv[j] > 0.0 {
            u.set_column(j, &(a.column(j) / sv[j]));
            filled[j] = true;
        }
    }
    // complete the null directions with Gram-Schmidt on coordinate vectors
    let mut basis = 0;
    for j in 0..cols {
        if filled[j] {
            continue;
        }
        while basis < rows {
            let mut e = Vector::zeros(rows);
            e[basis] = 1.0;
            basis += 1;
            for _ in 0..2 {
                for (k, &done) in filled.iter().enumerate() {
                    if done {
                        let proj = u.column(k).dot(&e);
                        e -= u.column(k) * proj;
                    }
                }
            }
            let norm = e.norm();
            if norm > 1e-8 {
                u.set_column(j, &(e / norm));
                filled[j] = true;
                break;
            }
        }
    }
    Ok((u, sv, v))
}

/// Eigendecomposition of a symmetric matrix with eigenvalues in nonincreasing order.
pub fn sym_eig_desc(s: &Mat) -> Result<EigResult> {
    ensure_finite(s, "matrix")?;
    if !s.is_square() || s.nrows() == 0 {
        return Err(PplsError::Dimension(format!(
            "eigendecomposition needs a non-empty square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let tol = 1e-8 * max_abs(s).max(1.0);
    let asym = asymmetry(s);
    if asym > tol {
        return Err(PplsError::InvalidInput(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let eig = SymmetricEigen::new(symmetrize(s));
    let order = descending_order(eig.eigenvalues.as_slice());
    let d = s.nrows();
    let mut vectors = Mat::zeros(d, d);
    let mut values = Vector::zeros(d);
    for (j, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let sgn = canonical_sign(col.as_slice());
        vectors.set_column(j, &(col * sgn));
        values[j] = eig.eigenvalues[src];
    }
    Ok(EigResult { vectors, values })
}

/// Orthonormal factor `U Vᵀ` of the polar decomposition of `m` (`rows ≥ cols`).
///
/// This is the maximizer of `Tr(Wᵀ m)` over semi-orthogonal `W`.
pub fn polar_factor(m: &Mat) -> Result<Mat> {
    let k = m.ncols();
    let svd = svd_ordered(m, k)?;
    Ok(&svd.left * svd.right.transpose())
}

/// Haar-distributed `d × r` semi-orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn sample_semi_orthogonal(d: usize, r: usize, rng: &mut RngStream) -> Result<Mat> {
    if r == 0 || r > d {
        return Err(PplsError::Dimension(format!(
            "cannot draw a {d}x{r} semi-orthogonal matrix"
        )));
    }
    let g = rng.normal_matrix(d, r);
    let qr = g.qr();
    let mut q = qr.q();
    let rdiag = qr.r().diagonal();
    // sign fix on diag(R) makes the distribution exactly Haar
    for j in 0..r {
        if rdiag[j] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Random SPD matrix `Q diag(λ) Qᵀ`, `Q` Haar orthogonal and `λ` log-uniform on
/// `[1, condition_cap]`.
pub fn sample_spd(d: usize, rng: &mut RngStream, condition_cap: f64) -> Result<Mat> {
    if d == 0 {
        return Err(PplsError::Dimension("dimension must be positive".into()));
    }
    if !(condition_cap >= 1.0) || !condition_cap.is_finite() {
        return Err(PplsError::InvalidInput(format!(
            "condition cap must be a finite number >= 1, got {condition_cap}"
        )));
    }
    let q = sample_semi_orthogonal(d, d, rng)?;
    let log_cap = condition_cap.ln();
    let lambda = Vector::from_fn(d, |_, _| (rng.uniform() * log_cap).exp());
    let scaled = Mat::from_fn(d, d, |i, j| q[(i, j)] * lambda[j]);
    Ok(symmetrize(&(scaled * q.transpose())))
}

/// Factor `L` with `L Lᵀ = cov`. Cholesky when definite, eigen square root when
/// only semi-definite.
pub fn psd_factor(cov: &Mat) -> Result<Mat> {
    ensure_finite(cov, "covariance")?;
    if !cov.is_square() {
        return Err(PplsError::Dimension("covariance must be square".into()));
    }
    let scale = max_abs(cov).max(f64::MIN_POSITIVE);
    if asymmetry(cov) > 1e-8 * scale.max(1.0) {
        return Err(PplsError::InvalidInput(
            "covariance is not symmetric".into(),
        ));
    }
    if let Some(ch) = Cholesky::new(symmetrize(cov)) {
        return Ok(ch.l());
    }
    let eig = sym_eig_desc(cov)?;
    let min = eig.values.min();
    if min < -1e-10 * scale.max(1.0) {
        return Err(PplsError::InvalidInput(format!(
            "covariance is indefinite (smallest eigenvalue {min:e})"
        )));
    }
    let d = cov.nrows();
    Ok(Mat::from_fn(d, d, |i, j| {
        eig.vectors[(i, j)] * eig.values[j].max(0.0).sqrt()
    }))
}

/// `n × d` matrix of i.i.d. zero-mean Gaussian rows with covariance `cov`.
pub fn mvn_sample(cov: &Mat, n: usize, rng: &mut RngStream) -> Result<Mat> {
    let factor = psd_factor(cov)?;
    let g = rng.normal_matrix(n, cov.nrows());
    Ok(g * factor.transpose())
}

/// Solve `a x = b` for SPD `a`.
pub fn spd_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    let ch = Cholesky::new(symmetrize(a))
        .ok_or_else(|| PplsError::Numerical("matrix is not positive definite".into()))?;
    Ok(ch.solve(b))
}

pub fn spd_inverse(a: &Mat) -> Result<Mat> {
    let ch = Cholesky::new(symmetrize(a))
        .ok_or_else(|| PplsError::Numerical("matrix is not positive definite".into()))?;
    Ok(symmetrize(&ch.inverse()))
}

/// Frobenius inner product `Σ aᵢⱼ bᵢⱼ`.
pub fn frob_dot(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `‖P_a − P_b‖_max` between the orthogonal projectors onto the column spaces
/// of two matrices with orthonormal columns.
pub fn projection_distance(a: &Mat, b: &Mat) -> f64 {
    let pa = a * a.transpose();
    let pb = b * b.transpose();
    max_abs(&(pa - pb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    #[test]
    fn svd_of_diagonal() {
        let m = dmatrix![3.0, 0.0; 0.0, 1.0];
        let s = svd_ordered(&m, 2).unwrap();
        assert_abs_diff_eq!(s.singvals[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.singvals[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.left, Mat::identity(2, 2), epsilon = 1e-14);
        assert_abs_diff_eq!(s.right, Mat::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn svd_of_exactly_rank_deficient_product() {
        let mut rng = RngStream::new(505, 0);
        for _ in 0..40 {
            let a = sample_semi_orthogonal(10, 3, &mut rng).unwrap();
            let b = sample_semi_orthogonal(8, 3, &mut rng).unwrap();
            let d = Vector::from_vec(vec![2.5, 1.7, 0.9]);
            let m = Mat::from_fn(10, 3, |i, j| a[(i, j)] * d[j]) * b.transpose();
            for mm in [m.clone(), m.transpose()] {
                let s = svd_ordered(&mm, 3).unwrap();
                for j in 0..3 {
                    assert_abs_diff_eq!(s.singvals[j], d[j], epsilon = 1e-12);
                }
                let rec = Mat::from_fn(mm.nrows(), 3, |i, j| s.left[(i, j)] * s.singvals[j])
                    * s.right.transpose();
                assert!(max_abs(&(rec - &mm)) < 1e-12);
                assert!(orthonormality_error(&s.left) < 1e-12);
            }
        }
        let z = svd_ordered(&Mat::zeros(4, 3), 2).unwrap();
        assert!(orthonormality_error(&z.left) < 1e-12 && z.singvals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn svd_of_off_diagonal() {
        // MᵀM = diag(0, 4): right vector e2, singular value 2, left vector M e2 / 2 = e1
        let m = dmatrix![0.0, 2.0; 0.0, 0.0];
        let s = svd_ordered(&m, 1).unwrap();
        assert_abs_diff_eq!(s.singvals[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            s.left.column(0).abs(),
            Vector::from_vec(vec![1.0, 0.0]),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            s.right.column(0).abs(),
            Vector::from_vec(vec![0.0, 1.0]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn svd_of_zero() {
        let s = svd_ordered(&Mat::zeros(3, 3), 1).unwrap();
        assert_eq!(s.singvals[0], 0.0);
        assert!(orthonormality_error(&s.left) < 1e-12);
    }

    #[test]
    fn svd_rejects_bad_input() {
        let mut m = Mat::identity(2, 2);
        assert!(matches!(svd_ordered(&m, 3), Err(PplsError::Dimension(_))));
        m[(0, 1)] = f64::NAN;
        assert!(matches!(
            svd_ordered(&m, 1),
            Err(PplsError::InvalidInput(_))
        ));
    }

    #[test]
    fn eig_examples() {
        let e = sym_eig_desc(&Mat::identity(3, 3)).unwrap();
        assert_abs_diff_eq!(e.values, Vector::from_element(3, 1.0), epsilon = 1e-14);

        let e = sym_eig_desc(&dmatrix![0.5, 0.0; 0.0, 5.0]).unwrap();
        assert_abs_diff_eq!(e.values[0], 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors, dmatrix![0.0, 1.0; 1.0, 0.0], epsilon = 1e-14);

        // characteristic polynomial (2-λ)² - 1 = 0 → λ ∈ {3, 1}
        let e = sym_eig_desc(&dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors[(0, 0)].abs(), h, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[(1, 0)].abs(), h, epsilon = 1e-12);
        assert!(e.vectors[(0, 1)] * e.vectors[(1, 1)] < 0.0);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let r = sym_eig_desc(&dmatrix![1.0, 2.0; 0.0, 1.0]);
        assert!(matches!(r, Err(PplsError::InvalidInput(_))));
    }

    #[test]
    fn sign_convention_ties_go_to_lowest_index() {
        assert_eq!(canonical_sign(&[-0.5, 0.5]), -1.0);
        assert_eq!(canonical_sign(&[0.5, -0.5]), 1.0);
        assert_eq!(canonical_sign(&[0.1, -0.9]), -1.0);
    }

    #[test]
    fn semi_orthogonal_shapes() {
        let mut rng = RngStream::new(7, 0);
        let q = sample_semi_orthogonal(3, 3, &mut rng).unwrap();
        assert!(orthonormality_error(&q) < 1e-12);
        assert!(orthonormality_error(&q.transpose()) < 1e-12);
        let w = sample_semi_orthogonal(20, 3, &mut rng).unwrap();
        assert_eq!(w.shape(), (20, 3));
        assert!(orthonormality_error(&w) < 1e-10);
        let u = sample_semi_orthogonal(2, 1, &mut rng).unwrap();
        assert_abs_diff_eq!(u.norm(), 1.0, epsilon = 1e-14);
        assert!(matches!(
            sample_semi_orthogonal(2, 3, &mut rng),
            Err(PplsError::Dimension(_))
        ));
    }

    #[test]
    fn spd_examples() {
        let mut rng = RngStream::new(3, 1);
        let s = sample_spd(1, &mut rng, 10.0).unwrap();
        assert!(s[(0, 0)] > 0.0);

        let s = sample_spd(20, &mut rng, 100.0).unwrap();
        let e = sym_eig_desc(&s).unwrap();
        assert!(e.values.min() > 0.0);
        assert!(e.values.max() / e.values.min() <= 100.0 * (1.0 + 1e-10));

        let s = sample_spd(4, &mut rng, 1.0).unwrap();
        assert_abs_diff_eq!(s, Mat::identity(4, 4) * s[(0, 0)], epsilon = 1e-12);
    }

    #[test]
    fn mvn_degenerate_and_indefinite() {
        let mut rng = RngStream::new(1, 1);
        let z = mvn_sample(&Mat::zeros(1, 1), 10, &mut rng).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let bad = dmatrix![1.0, 0.0; 0.0, -1.0];
        assert!(matches!(
            mvn_sample(&bad, 3, &mut rng),
            Err(PplsError::InvalidInput(_))
        ));
    }

    #[test]
    fn mvn_identity_lln() {
        let mut rng = RngStream::new(11, 2);
        let n = 100_000;
        let z = mvn_sample(&Mat::identity(2, 2), n, &mut rng).unwrap();
        let s = z.transpose() * &z / n as f64;
        assert_abs_diff_eq!(s, Mat::identity(2, 2), epsilon = 0.05);
    }

    #[test]
    fn mvn_latent_variances() {
        let diag = [1.0, (-0.2f64).exp(), (-0.4f64).exp()];
        assert_abs_diff_eq!(diag[1], 0.81873, epsilon = 1e-5);
        assert_abs_diff_eq!(diag[2], 0.67032, epsilon = 1e-5);
        let cov = Mat::from_diagonal(&Vector::from_row_slice(&diag));
        let mut rng = RngStream::new(5, 9);
        let n = 100_000;
        let z = mvn_sample(&cov, n, &mut rng).unwrap();
        for (j, &d) in diag.iter().enumerate() {
            let var = z.column(j).norm_squared() / n as f64;
            assert!((var - d).abs() / d < 0.02, "column {j}: {var} vs {d}");
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let cov = dmatrix![2.0, 0.3; 0.3, 1.0];
        let a = mvn_sample(&cov, 50, &mut RngStream::new(42, 7)).unwrap();
        let b = mvn_sample(&cov, 50, &mut RngStream::new(42, 7)).unwrap();
        let c = mvn_sample(&cov, 50, &mut RngStream::new(42, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(stream_id(&[1, 2, 3]), stream_id(&[1, 2, 3]));
        assert_ne!(stream_id(&[1, 2, 3]), stream_id(&[1, 3, 2]));
    }
}
