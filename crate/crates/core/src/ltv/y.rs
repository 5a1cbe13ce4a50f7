//! Per-triangle update of the tangent vectors `Y_{T,ℓ}` standing in for
//! `log_{m_T}(g_ℓ)`.

use crate::error::{Error, Result};
use crate::sphere::{exp_coefficients, project_tangent, Vec3};

use super::{armijo, next_trial_step, AdmmState, ARMIJO_C, ARMIJO_MAX_HALVINGS};

/// Maximum gradient steps per triangle and call.
pub const Y_MAX_STEPS: usize = 200;

/// `exp_m(Y) = cos|Y| m + sin|Y|/|Y| Y` without renormalization, so that it is
/// an exact polynomial-trigonometric expression in `Y`.
#[inline]
pub(crate) fn exp_raw(m: &Vec3, y: &Vec3) -> Vec3 {
    let (c, s, _) = exp_coefficients(y.norm_squared());
    m * c + y * s
}

/// Borrowed per-triangle data of the subproblem.
#[derive(Clone, Copy, Debug)]
pub struct YTriangle<'a> {
    pub phi: &'a [f64],
    pub m: &'a Vec3,
    pub mu: &'a Vec3,
    pub nu: &'a [Vec3],
    pub labels: &'a [Vec3],
}

impl YTriangle<'_> {
    /// `|Σ_ℓ φ_ℓ Y_ℓ + μ|² + Σ_ℓ |exp_m(Y_ℓ) - g_ℓ + ν_ℓ|²`.
    pub fn objective(&self, y: &[Vec3]) -> f64 {
        let mut first = *self.mu;
        let mut second = 0.0;
        for (l, yl) in y.iter().enumerate() {
            first += yl * self.phi[l];
            second += (exp_raw(self.m, yl) - self.labels[l] + self.nu[l]).norm_squared();
        }
        first.norm_squared() + second
    }

    /// Gradient of [`objective`](Self::objective) projected onto the tangent
    /// plane at `m`, written into `grad`. Returns the objective value.
    pub fn gradient(&self, y: &[Vec3], grad: &mut [Vec3]) -> f64 {
        let mut first = *self.mu;
        for (yl, p) in y.iter().zip(self.phi) {
            first += yl * *p;
        }
        let mut value = first.norm_squared();
        for (l, (yl, g)) in y.iter().zip(grad.iter_mut()).enumerate() {
            let (c, s, ds) = exp_coefficients(yl.norm_squared());
            let w = self.m * c + yl * s - self.labels[l] + self.nu[l];
            value += w.norm_squared();
            // d/dq cos√q = -S/2
            let jtw = w * s + yl * (-s * self.m.dot(&w) + 2.0 * ds * yl.dot(&w));
            *g = project_tangent(self.m, &(jtw * 2.0 + first * (2.0 * self.phi[l])));
        }
        value
    }
}

/// Gradient descent with Armijo backtracking on one triangle, stopping once
/// the projected gradient has norm at most `tol`.
pub fn solve_triangle(tri: &YTriangle<'_>, y: &mut [Vec3], tol: f64, index: usize) -> Result<usize> {
    let n = y.len();
    let mut grad = vec![Vec3::zeros(); n];
    let mut cand = vec![Vec3::zeros(); n];
    let mut value = tri.gradient(y, &mut grad);
    let mut t0 = 1.0;
    for step in 0..Y_MAX_STEPS {
        let gg: f64 = grad.iter().map(|g| g.norm_squared()).sum();
        if gg.sqrt() <= tol {
            return Ok(step);
        }
        let accepted = armijo(value, gg, t0, ARMIJO_C, ARMIJO_MAX_HALVINGS, |t| {
            for ((c, yl), g) in cand.iter_mut().zip(y.iter()).zip(&grad) {
                *c = yl - g * t;
            }
            if cand.iter().zip(y.iter()).all(|(a, b)| a == b) {
                return None;
            }
            Some(tri.objective(&cand))
        });
        match accepted {
            Some((t, _)) => {
                t0 = next_trial_step(t);
                y.copy_from_slice(&cand);
                value = tri.gradient(y, &mut grad);
            }
            None if gg.sqrt() <= 1e-10 => return Ok(step),
            None => return Err(Error::ArmijoFailure { what: "Y subproblem", index }),
        }
    }
    Ok(Y_MAX_STEPS)
}

/// Stopping tolerance `max{1e-8, 10^(-0.0025 k)}` at outer iteration `k`.
pub fn iteration_tolerance(k: usize) -> f64 {
    10f64.powf(-0.0025 * k as f64).max(1e-8)
}

/// Updates `Y` on every triangle in place.
pub fn y_subproblem(state: &mut AdmmState, labels: &[Vec3]) -> Result<()> {
    let tol = state.inner_tol;
    let width = labels.len();
    for t in 0..state.m.len() {
        let tri = YTriangle {
            phi: state.phi.row(t),
            m: &state.m[t],
            mu: &state.mu[t],
            nu: &state.nu[t * width..(t + 1) * width],
            labels,
        };
        let y = &mut state.y[t * width..(t + 1) * width];
        solve_triangle(&tri, y, tol, t)?;
    }
    Ok(())
}
