#![allow(dead_code)]

use ppls::linalg::{canonical_sign, sample_semi_orthogonal, sample_spd, Mat, RngStream};
use ppls::model::{Diagonal, ExtendedPplsParams, OriginalPplsParams};

/// Flip `(W_j, C_j)` pairs so each `W` column has a positive dominant entry.
pub fn sign_fix(w: &mut Mat, c: &mut Mat) {
    for j in 0..w.ncols() {
        let s = canonical_sign(w.column(j).as_slice());
        w.column_mut(j).scale_mut(s);
        c.column_mut(j).scale_mut(s);
    }
}

/// Decreasing positive values in `[lo, hi]`.
pub fn decreasing(r: usize, lo: f64, hi: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut v: Vec<f64> = (0..r).map(|_| lo + (hi - lo) * rng.uniform()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    // keep the order strict
    for j in 1..r {
        if v[j] >= v[j - 1] * 0.95 {
            v[j] = v[j - 1] * 0.9;
        }
    }
    v
}

pub fn random_original(p: usize, q: usize, r: usize, rng: &mut RngStream) -> OriginalPplsParams {
    let mut w = sample_semi_orthogonal(p, r, rng).unwrap();
    let mut c = sample_semi_orthogonal(q, r, rng).unwrap();
    sign_fix(&mut w, &mut c);
    let sigma_t = decreasing(r, 0.5, 3.0, rng);
    // b_j ≤ 1 keeps Σ_t B decreasing
    let b: Vec<f64> = (0..r).map(|_| 0.6 + 0.4 * rng.uniform()).collect();
    let mut b_sorted = b;
    b_sorted.sort_by(|a, b| b.total_cmp(a));
    OriginalPplsParams {
        w,
        c,
        b: Diagonal::new(b_sorted),
        sigma_t: Diagonal::new(sigma_t),
        sigma_e2: 0.1 + 0.5 * rng.uniform(),
        sigma_f2: 0.1 + 0.5 * rng.uniform(),
        sigma_h2: 0.1 + 0.3 * rng.uniform(),
    }
}

pub fn random_extended(p: usize, q: usize, r: usize, rng: &mut RngStream) -> ExtendedPplsParams {
    let mut w = sample_semi_orthogonal(p, r, rng).unwrap();
    let mut c = sample_semi_orthogonal(q, r, rng).unwrap();
    sign_fix(&mut w, &mut c);
    let sigma_t = decreasing(r, 0.5, 3.0, rng);
    let psi_e = sample_spd(p, rng, 10.0).unwrap() * (0.3 / p as f64);
    let psi_f = sample_spd(q, rng, 10.0).unwrap() * (0.3 / q as f64);
    ExtendedPplsParams {
        w,
        c,
        sigma_t: Diagonal::new(sigma_t),
        psi_e,
        psi_f,
    }
}
