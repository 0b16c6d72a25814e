//! Maximization of trace-quadratic objectives over the Stiefel manifold
//! `{W ∈ ℝ^{d×r} : WᵀW = I_r}`.
//!
//! The objective is
//!
//! ```text
//! f(W) = Tr(L Wᵀ M) − ½ Tr(W Q Wᵀ M)
//! ```
//!
//! with `L` the data-moment term, `Q` a symmetric PSD second moment and `M`
//! an SPD metric. It is the W-dependent part of the expected complete-data
//! log-likelihood of one observed block.
//!
//! The solver is a feasible curvilinear search: each trial point lies on the
//! Cayley curve `Y(τ) = (I + τ/2 A)⁻¹ (I − τ/2 A) W` with skew-symmetric
//! `A = G Wᵀ − W Gᵀ`, so every iterate stays on the manifold. Steps follow
//! alternating Barzilai–Borwein lengths, backtracked until an Armijo
//! condition holds, which makes the stored objective trace strictly
//! increasing.

use nalgebra::LU;

use crate::error::{PplsError, Result};
use crate::linalg::{frob_dot, max_abs, orthonormality_error, polar_factor, spd_inverse, Mat};

const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone)]
pub struct TraceQuadObjective {
    linear: Mat,
    quadratic: Mat,
    metric: Mat,
}

impl TraceQuadObjective {
    pub fn new(linear: Mat, quadratic: Mat, metric: Mat) -> Result<Self> {
        let (d, r) = linear.shape();
        if quadratic.shape() != (r, r) || metric.shape() != (d, d) {
            return Err(PplsError::Dimension(format!(
                "linear is {d}x{r}, quadratic {}x{}, metric {}x{}",
                quadratic.nrows(),
                quadratic.ncols(),
                metric.nrows(),
                metric.ncols()
            )));
        }
        for (name, m) in [("quadratic", &quadratic), ("metric", &metric)] {
            if crate::linalg::asymmetry(m) > 1e-10 * max_abs(m).max(1.0) {
                return Err(PplsError::InvalidInput(format!(
                    "{name} term is not symmetric"
                )));
            }
        }
        // metric must be SPD
        spd_inverse(&metric)
            .map_err(|_| PplsError::InvalidInput("metric is not positive definite".into()))?;
        Ok(Self {
            linear,
            quadratic,
            metric,
        })
    }

    pub fn linear(&self) -> &Mat {
        &self.linear
    }

    pub fn quadratic(&self) -> &Mat {
        &self.quadratic
    }

    pub fn metric(&self) -> &Mat {
        &self.metric
    }

    pub fn dims(&self) -> (usize, usize) {
        self.linear.shape()
    }

    fn value_unchecked(&self, w: &Mat) -> f64 {
        let mw = &self.metric * w;
        let wmw = w.transpose() * &mw;
        frob_dot(&mw, &self.linear) - 0.5 * frob_dot(&wmw, &self.quadratic)
    }

    fn gradient_unchecked(&self, w: &Mat) -> Mat {
        &self.metric * (&self.linear - w * &self.quadratic)
    }

    fn check_point(&self, w: &Mat, tol: f64) -> Result<()> {
        if w.shape() != self.dims() {
            return Err(PplsError::Dimension(format!(
                "point is {}x{}, objective expects {}x{}",
                w.nrows(),
                w.ncols(),
                self.dims().0,
                self.dims().1
            )));
        }
        let err = orthonormality_error(w);
        if !(err <= tol) {
            return Err(PplsError::Infeasible(format!(
                "max |WᵀW - I| = {err:e} exceeds {tol:e}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StiefelConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub step_shrink: f64,
    pub initial_step: f64,
}

impl Default for StiefelConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            armijo_c: 1e-4,
            step_shrink: 0.5,
            initial_step: 1.0,
        }
    }
}

impl StiefelConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.grad_tol > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.step_shrink > 0.0
            && self.step_shrink < 1.0
            && self.initial_step > 0.0
            && self.initial_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(PplsError::Config(format!(
                "invalid Stiefel configuration {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct StiefelOutcome {
    pub w: Mat,
    /// Objective value at the start point and after every accepted step.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

/// `−½ Tr((−2 L Wᵀ + W Q Wᵀ) M)`.
pub fn objective_value(obj: &TraceQuadObjective, w: &Mat) -> Result<f64> {
    obj.check_point(w, 1e-8)?;
    Ok(obj.value_unchecked(w))
}

/// `M L − M W Q`.
pub fn euclidean_gradient(obj: &TraceQuadObjective, w: &Mat) -> Result<Mat> {
    obj.check_point(w, 1e-8)?;
    Ok(obj.gradient_unchecked(w))
}

/// Point at parameter `step` on the Cayley curve through `w` generated by
/// `A = grad Wᵀ − W gradᵀ`. For small steps this moves against `grad`.
pub fn cayley_step(w: &Mat, grad: &Mat, step: f64) -> Mat {
    if step == 0.0 {
        return w.clone();
    }
    let mut tau = step;
    for _ in 0..MAX_BACKTRACKS {
        if let Some(y) = try_cayley(w, grad, tau) {
            return y;
        }
        tau *= 0.5;
    }
    w.clone()
}

fn try_cayley(w: &Mat, grad: &Mat, tau: f64) -> Option<Mat> {
    let (d, r) = w.shape();
    if 2 * r < d {
        // (I + τ/2 U Vᵀ)⁻¹ via Sherman–Morrison–Woodbury with U = [G, W], V = [W, −G]
        let mut u = Mat::zeros(d, 2 * r);
        u.columns_mut(0, r).copy_from(grad);
        u.columns_mut(r, r).copy_from(w);
        let mut v = Mat::zeros(d, 2 * r);
        v.columns_mut(0, r).copy_from(w);
        v.columns_mut(r, r).copy_from(&(-grad));
        let vt_u = v.transpose() * &u;
        let inner = Mat::identity(2 * r, 2 * r) + vt_u * (0.5 * tau);
        let rhs = v.transpose() * w;
        let sol = LU::new(inner).solve(&rhs)?;
        let y = w - (u * sol) * tau;
        y.iter().all(|v| v.is_finite()).then_some(y)
    } else {
        let a = grad * w.transpose() - w * grad.transpose();
        let id = Mat::identity(d, d);
        let lhs = &id + &a * (0.5 * tau);
        let rhs = (&id - &a * (0.5 * tau)) * w;
        let y = LU::new(lhs).solve(&rhs)?;
        y.iter().all(|v| v.is_finite()).then_some(y)
    }
}

/// Monotone curvilinear ascent from `w0`.
///
/// Stops when the Riemannian gradient norm drops to `grad_tol`, when
/// `max_iters` steps have been taken, or when backtracking cannot find an
/// improving step (the iterate is then optimal to working precision).
pub fn maximize_on_stiefel(
    obj: &TraceQuadObjective,
    w0: &Mat,
    cfg: &StiefelConfig,
) -> Result<StiefelOutcome> {
    cfg.validate()?;
    obj.check_point(w0, 1e-8)?;
    let mut w = if orthonormality_error(w0) > 1e-12 {
        polar_factor(w0)?
    } else {
        w0.clone()
    };

    let mut f = obj.value_unchecked(&w);
    let mut values = vec![f];
    if !f.is_finite() {
        return Err(PplsError::Numerical(format!(
            "objective is not finite at the start point (trace {values:?})"
        )));
    }

    // descent direction of −f
    let mut g = -obj.gradient_unchecked(&w);
    let mut rgrad = &g - &w * (g.transpose() * &w);
    let mut tau = cfg.initial_step;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        let grad_norm = rgrad.norm();
        if grad_norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        let wtg = w.transpose() * &g;
        // ‖A‖² = 2‖G‖² − 2 Tr((WᵀG)²) on the manifold
        let a_norm2 = (2.0 * (g.norm_squared() - frob_dot(&wtg, &wtg.transpose()))).max(0.0);
        let rate = 0.5 * a_norm2;

        let mut accepted = None;
        let mut trial_tau = tau;
        for _ in 0..MAX_BACKTRACKS {
            let y = cayley_step(&w, &g, trial_tau);
            let fy = obj.value_unchecked(&y);
            if !fy.is_finite() {
                values.push(fy);
                return Err(PplsError::Numerical(format!(
                    "objective became non-finite at iteration {iterations} (trace {values:?})"
                )));
            }
            if fy >= f + cfg.armijo_c * trial_tau * rate && fy > f {
                accepted = Some((y, fy));
                break;
            }
            trial_tau *= cfg.step_shrink;
        }
        let Some((y, fy)) = accepted else {
            // no ascent available at working precision
            converged = grad_norm <= cfg.grad_tol.sqrt();
            break;
        };

        let g_new = -obj.gradient_unchecked(&y);
        let rgrad_new = &g_new - &y * (g_new.transpose() * &y);
        let s = &y - &w;
        let dy = &rgrad_new - &rgrad;
        let sy = frob_dot(&s, &dy).abs();
        iterations += 1;
        tau = if sy > 0.0 {
            if iterations % 2 == 1 {
                s.norm_squared() / sy
            } else {
                sy / dy.norm_squared()
            }
        } else {
            trial_tau
        }
        .clamp(1e-10, 1e10);

        w = y;
        f = fy;
        g = g_new;
        rgrad = rgrad_new;
        values.push(f);
    }

    Ok(StiefelOutcome {
        grad_norm: rgrad.norm(),
        w,
        values,
        iterations,
        converged,
    })
}
