//! Update of the per-triangle centers `m_T`, with the tangent fields carried
//! along by parallel transport.

use crate::error::{Error, Result};
use crate::mesh::{Geometry, TriangleMesh};
use crate::sphere::{angle_over_sine, angle_over_sine_deriv, exp, exp_coefficients, log_or_cut, project_tangent, Vec3};

use super::{armijo, next_trial_step, AdmmState, ARMIJO_C, ARMIJO_MAX_HALVINGS};

/// Gradient steps allowed per call.
pub const M_MAX_STEPS: usize = 20;

/// `log_a(b) = acos(c)/√(1-c²) (b - c a)` with `c = a·b`.
#[inline]
fn log_formula(a: &Vec3, b: &Vec3) -> Vec3 {
    let c = a.dot(b);
    (b - a * c) * angle_over_sine(c)
}

/// Centers this close to antipodal use [`log_or_cut`] and contribute no gradient.
fn at_cut(c: f64) -> bool {
    c <= -1.0 + 1e-12
}

/// `P_{from→to}(v) = v - (to·v)/(1 + from·to) (from + to)`.
#[inline]
fn transport_formula(from: &Vec3, to: &Vec3, v: &Vec3) -> Vec3 {
    v - (from + to) * (to.dot(v) / (1.0 + from.dot(to)))
}

/// Contribution `(∂P/∂to)ᵀ u` of the transport of `v` from `from`.
#[inline]
fn transport_adjoint(from: &Vec3, to: &Vec3, v: &Vec3, u: &Vec3) -> Vec3 {
    let denom = 1.0 + from.dot(to);
    let a = to.dot(v) / denom;
    let grad_a = v / denom - from * (to.dot(v) / (denom * denom));
    -grad_a * u.dot(&(from + to)) - u * a
}

/// The coupled objective
///
/// ```text
/// Σ_T |T| Σ_ℓ |exp_{m_T}(P(Y_{T,ℓ})) - g_ℓ + ν_{T,ℓ}|²
///   + Σ_e |e| |log_{m_{e+}}(m_{e-}) + P(-X_e + ξ_e)|²
/// ```
///
/// with all transports starting at the reference centers `m_ref`.
pub struct MProblem<'a> {
    pub m_ref: &'a [Vec3],
    pub y: &'a [Vec3],
    pub nu: &'a [Vec3],
    /// `-X_e + ξ_e`, tangent at `m_ref[e+]`.
    pub edge_vectors: Vec<Vec3>,
    pub labels: &'a [Vec3],
    pub mesh: &'a TriangleMesh,
    pub geom: &'a Geometry,
    /// `(cos|Y|, sin|Y|/|Y|)` per triangle and label; transport preserves `|Y|`.
    coeffs: Vec<(f64, f64)>,
}

impl<'a> MProblem<'a> {
    pub fn new(
        m_ref: &'a [Vec3],
        y: &'a [Vec3],
        nu: &'a [Vec3],
        x: &[Vec3],
        xi: &[Vec3],
        labels: &'a [Vec3],
        mesh: &'a TriangleMesh,
        geom: &'a Geometry,
    ) -> Self {
        let coeffs = y
            .iter()
            .map(|v| {
                let (c, s, _) = exp_coefficients(v.norm_squared());
                (c, s)
            })
            .collect();
        let edge_vectors = x.iter().zip(xi).map(|(x, xi)| xi - x).collect();
        Self { m_ref, y, nu, edge_vectors, labels, mesh, geom, coeffs }
    }

    pub fn objective(&self, m: &[Vec3]) -> f64 {
        let width = self.labels.len();
        let mut total = 0.0;
        for (t, (mt, m0)) in m.iter().zip(self.m_ref).enumerate() {
            let mut sum = 0.0;
            for l in 0..width {
                let i = t * width + l;
                let (c, s) = self.coeffs[i];
                let z = transport_formula(m0, mt, &self.y[i]);
                sum += (mt * c + z * s - self.labels[l] + self.nu[i]).norm_squared();
            }
            total += self.geom.areas[t] * sum;
        }
        for ((e, len), v) in self.mesh.edges().iter().zip(&self.geom.edge_lengths).zip(&self.edge_vectors) {
            let (a, b) = (&m[e.plus], &m[e.minus]);
            let log = if at_cut(a.dot(b)) { log_or_cut(a, b) } else { log_formula(a, b) };
            let u = log + transport_formula(&self.m_ref[e.plus], a, v);
            total += len * u.norm_squared();
        }
        total
    }

    /// Ambient Euclidean gradient with respect to each `m_T`, written into `out`.
    /// Returns the objective value.
    pub fn gradient(&self, m: &[Vec3], out: &mut [Vec3]) -> f64 {
        let width = self.labels.len();
        let mut total = 0.0;
        for (t, ((mt, m0), g)) in m.iter().zip(self.m_ref).zip(out.iter_mut()).enumerate() {
            let area = self.geom.areas[t];
            let mut acc = Vec3::zeros();
            let mut sum = 0.0;
            for l in 0..width {
                let i = t * width + l;
                let (c, s) = self.coeffs[i];
                let y = &self.y[i];
                let z = transport_formula(m0, mt, y);
                let w = mt * c + z * s - self.labels[l] + self.nu[i];
                sum += w.norm_squared();
                acc += w * c + transport_adjoint(m0, mt, y, &w) * s;
            }
            total += area * sum;
            *g = acc * (2.0 * area);
        }
        for ((e, len), v) in self.mesh.edges().iter().zip(&self.geom.edge_lengths).zip(&self.edge_vectors) {
            let (a, b) = (m[e.plus], m[e.minus]);
            let c = a.dot(&b);
            let a0 = &self.m_ref[e.plus];
            if at_cut(c) {
                total += len * (log_or_cut(&a, &b) + transport_formula(a0, &a, v)).norm_squared();
                continue;
            }
            let f = angle_over_sine(c);
            let df = angle_over_sine_deriv(c);
            let chord = b - a * c;
            let u = chord * f + transport_formula(a0, &a, v);
            total += len * u.norm_squared();
            let uc = u.dot(&chord);
            let ua = u.dot(&a);
            let grad_a = b * (df * uc - f * ua) - u * (f * c) + transport_adjoint(a0, &a, v, &u);
            let grad_b = a * (df * uc) + (u - a * ua) * f;
            out[e.plus] += grad_a * (2.0 * len);
            out[e.minus] += grad_b * (2.0 * len);
        }
        total
    }
}

/// Riemannian gradient descent on the centers in the area-weighted metric,
/// followed by transport of `Y`, `X`, `μ` and `ξ` to the new centers.
///
/// Returns the number of gradient steps taken.
pub fn m_subproblem(
    state: &mut AdmmState,
    labels: &[Vec3],
    mesh: &TriangleMesh,
    geom: &Geometry,
) -> Result<usize> {
    let tol = state.inner_tol;
    let m_ref = state.m.clone();
    let problem = MProblem::new(&m_ref, &state.y, &state.nu, &state.x, &state.xi, labels, mesh, geom);
    let n = m_ref.len();
    let mut m = m_ref.clone();
    let mut cand = m.clone();
    let mut grad = vec![Vec3::zeros(); n];
    let mut value = problem.gradient(&m, &mut grad);
    let mut steps = 0;
    let mut t0 = 1.0;
    while steps < M_MAX_STEPS {
        let mut norm2 = 0.0;
        for ((g, mt), area) in grad.iter_mut().zip(&m).zip(&geom.areas) {
            *g = project_tangent(mt, g) / *area;
            norm2 += area * g.norm_squared();
        }
        if !norm2.is_finite() {
            return Err(Error::NonFinite("center gradient"));
        }
        if norm2.sqrt() <= tol {
            break;
        }
        let accepted = armijo(value, norm2, t0, ARMIJO_C, ARMIJO_MAX_HALVINGS, |t| {
            for ((c, mt), g) in cand.iter_mut().zip(&m).zip(&grad) {
                *c = exp(mt, &(g * -t));
            }
            if cand == m {
                return None;
            }
            Some(problem.objective(&cand))
        });
        let Some((t, _)) = accepted else { break };
        t0 = next_trial_step(t);
        std::mem::swap(&mut m, &mut cand);
        value = problem.gradient(&m, &mut grad);
        steps += 1;
    }
    drop(problem);
    carry_tangent_fields(state, &m_ref, &m, labels.len(), mesh)?;
    state.m = m;
    Ok(steps)
}

/// Transports every tangent field from `from` to `to` and removes the
/// roundoff normal component.
fn carry_tangent_fields(
    state: &mut AdmmState,
    from: &[Vec3],
    to: &[Vec3],
    width: usize,
    mesh: &TriangleMesh,
) -> Result<()> {
    let carry = |a: &Vec3, b: &Vec3, v: &mut Vec3| -> Result<()> {
        if 1.0 + a.dot(b) <= 1e-12 {
            return Err(Error::Antipodal);
        }
        *v = project_tangent(b, &transport_formula(a, b, v));
        Ok(())
    };
    for (t, (a, b)) in from.iter().zip(to).enumerate() {
        for v in &mut state.y[t * width..(t + 1) * width] {
            carry(a, b, v)?;
        }
        carry(a, b, &mut state.mu[t])?;
    }
    for (i, e) in mesh.edges().iter().enumerate() {
        let (a, b) = (&from[e.plus], &to[e.plus]);
        carry(a, b, &mut state.x[i])?;
        carry(a, b, &mut state.xi[i])?;
    }
    Ok(())
}
