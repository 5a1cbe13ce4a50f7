//! Geometry of the unit sphere S² embedded in R³.
//!
//! Points are plain [`Vec3`] values of unit length and tangent vectors are
//! [`Vec3`] values orthogonal to their base point. The kernels here are written
//! in forms that stay smooth at coincident points (no `arccos` near 1), since
//! the solvers differentiate through them.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Angles at or beyond this value are treated as antipodal.
pub const ANTIPODAL_LIMIT: f64 = PI - 1e-8;

const KARCHER_MAX_ITERS: usize = 200;
const ARMIJO_C: f64 = 1e-4;
const ARMIJO_MAX_HALVINGS: usize = 60;

/// Scales `v` to unit length. Returns `None` for the zero vector or non-finite input.
pub fn normalize(v: Vec3) -> Option<Vec3> {
    let n = v.norm();
    if n > 0.0 && n.is_finite() {
        Some(v / n)
    } else {
        None
    }
}

/// Removes the component of `v` along the unit vector `base`.
#[inline]
pub fn project_tangent(base: &Vec3, v: &Vec3) -> Vec3 {
    v - base * base.dot(v)
}

/// Great-arc distance in radians, in `[0, π]`.
#[inline]
pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    // atan2 keeps full precision near 0 and π, where arccos of the
    // (clamped) dot product loses half the digits.
    let c = a.dot(b).clamp(-1.0, 1.0);
    a.cross(b).norm().atan2(c)
}

/// `acos(c) / sqrt(1 - c²)`, smooth through `c = 1`.
#[inline]
pub(crate) fn angle_over_sine(c: f64) -> f64 {
    let u = 1.0 - c;
    if u < 1e-4 {
        1.0 + u * (1.0 / 3.0 + u * (2.0 / 15.0 + u * (2.0 / 35.0 + u * 8.0 / 315.0)))
    } else {
        let s = (1.0 - c * c).max(0.0).sqrt();
        c.clamp(-1.0, 1.0).acos() / s
    }
}

/// Derivative of [`angle_over_sine`] with respect to `c`.
#[inline]
pub(crate) fn angle_over_sine_deriv(c: f64) -> f64 {
    let u = 1.0 - c;
    if u < 1e-4 {
        -(1.0 / 3.0 + u * (4.0 / 15.0 + u * (6.0 / 35.0 + u * 32.0 / 315.0)))
    } else {
        (c * angle_over_sine(c) - 1.0) / (1.0 - c * c)
    }
}

/// Coefficients of the exponential map as functions of `q = |X|²`:
/// `(cos √q, sin √q / √q, d/dq [sin √q / √q])`.
#[inline]
pub(crate) fn exp_coefficients(q: f64) -> (f64, f64, f64) {
    if q < 1e-3 {
        let c = 1.0 - q * (1.0 / 2.0 - q * (1.0 / 24.0 - q * (1.0 / 720.0 - q / 40320.0)));
        let s = 1.0 - q * (1.0 / 6.0 - q * (1.0 / 120.0 - q * (1.0 / 5040.0 - q / 362880.0)));
        let ds = -1.0 / 6.0 + q * (1.0 / 60.0 - q * (1.0 / 1680.0 - q / 90720.0));
        (c, s, ds)
    } else {
        let r = q.sqrt();
        let (sin, cos) = r.sin_cos();
        let s = sin / r;
        (cos, s, (cos - s) / (2.0 * q))
    }
}

/// Logarithmic map `log_base(target)`: the tangent vector at `base` pointing
/// along the shortest geodesic to `target`, with length equal to the distance.
pub fn log(base: &Vec3, target: &Vec3) -> Result<Vec3> {
    let c = base.dot(target).clamp(-1.0, 1.0);
    let v = target - base * c;
    if v.norm().atan2(c) >= ANTIPODAL_LIMIT {
        return Err(Error::Antipodal);
    }
    Ok(log_unchecked(base, target))
}

/// A deterministic unit tangent vector at `m`, built from the axis with the
/// smallest `|m_k|`.
pub fn cut_direction(m: &Vec3) -> Vec3 {
    let axis = (0..3).min_by(|&a, &b| m[a].abs().total_cmp(&m[b].abs())).unwrap_or(0);
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    project_tangent(m, &e).normalize()
}

/// [`log`] extended to the cut locus: an antipodal target gets `π` times
/// [`cut_direction`], which still satisfies `exp_base(v) = target`.
pub fn log_or_cut(base: &Vec3, target: &Vec3) -> Vec3 {
    if base.dot(target) > -0.5 {
        return log_unchecked(base, target);
    }
    log(base, target).unwrap_or_else(|_| cut_direction(base) * PI)
}

/// [`log`] without the antipodal check. Only meaningful away from the cut locus.
#[inline]
pub(crate) fn log_unchecked(base: &Vec3, target: &Vec3) -> Vec3 {
    let c = base.dot(target).clamp(-1.0, 1.0);
    let v = target - base * c;
    if 1.0 - c < 1e-4 {
        v * angle_over_sine(c)
    } else {
        let sin = v.norm();
        if sin == 0.0 {
            return Vec3::zeros();
        }
        v * (sin.atan2(c) / sin)
    }
}

/// Exponential map: follow the geodesic from `base` with initial velocity `v`
/// for unit time.
pub fn exp(base: &Vec3, v: &Vec3) -> Vec3 {
    let (c, s, _) = exp_coefficients(v.norm_squared());
    let p = base * c + v * s;
    p / p.norm()
}

/// Parallel transport of the tangent vector `v` from `from` to `to` along the
/// shortest geodesic.
pub fn transport(from: &Vec3, to: &Vec3, v: &Vec3) -> Result<Vec3> {
    let c = from.dot(to);
    if from.cross(to).norm().atan2(c.clamp(-1.0, 1.0)) >= ANTIPODAL_LIMIT {
        return Err(Error::Antipodal);
    }
    Ok(transport_unchecked(from, to, v))
}

/// Transport in the closed form `v - (to·v)/(1 + from·to) (from + to)`, which
/// equals the two-logarithm formula and stays well defined as `to → from`.
#[inline]
pub(crate) fn transport_unchecked(from: &Vec3, to: &Vec3, v: &Vec3) -> Vec3 {
    let c = from.dot(to);
    v - (from + to) * (to.dot(v) / (1.0 + c))
}

/// Weighted Riemannian center of mass of `points`.
///
/// Runs Riemannian gradient descent on `½ Σ wᵢ d(m, pᵢ)²` from `init` with
/// Armijo backtracking (initial step 1), stopping once the Karcher residual
/// `|Σ wᵢ log_m(pᵢ)|` is at most `tol`.
///
/// Points with zero weight are ignored. A point with positive weight sitting
/// exactly on the cut locus of the iterate contributes nothing to the residual:
/// its squared distance has a local maximum there and zero lies in its
/// generalized gradient.
pub fn karcher_mean(weights: &[f64], points: &[Vec3], init: &Vec3, tol: f64) -> Result<Vec3> {
    if weights.len() != points.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} points",
            weights.len(),
            points.len()
        )));
    }
    let cost = |m: &Vec3| -> f64 {
        weights
            .iter()
            .zip(points)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, p)| 0.5 * w * distance(m, p).powi(2))
            .sum()
    };
    let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    let first_step = if total > 0.0 { 1.0 / total } else { 1.0 };
    let mut m = *init;
    let mut f = cost(&m);
    for _ in 0..KARCHER_MAX_ITERS {
        let v = karcher_residual(weights, points, &m);
        let vv = v.norm_squared();
        if vv.sqrt() <= tol {
            return Ok(m);
        }
        let mut step = first_step;
        let mut accepted = false;
        for _ in 0..ARMIJO_MAX_HALVINGS {
            let cand = exp(&m, &(v * step));
            if cand == m {
                break;
            }
            let fc = cost(&cand);
            if fc <= f - ARMIJO_C * step * vv {
                m = cand;
                f = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Cost differences are below roundoff; accept a step that shrinks the residual.
            let cand = exp(&m, &(v * first_step));
            if karcher_residual(weights, points, &cand).norm_squared() < vv {
                m = cand;
                f = cost(&m);
                continue;
            }
            if vv.sqrt() <= 1e-10 {
                return Ok(m);
            }
            return Err(Error::ArmijoFailure { what: "karcher mean", index: 0 });
        }
    }
    let v = karcher_residual(weights, points, &m);
    if v.norm() <= tol {
        Ok(m)
    } else {
        Err(Error::NoConvergence { what: "karcher mean", iterations: KARCHER_MAX_ITERS })
    }
}

/// `Σ wᵢ log_m(pᵢ)` over positive weights, skipping points antipodal to `m`.
pub fn karcher_residual(weights: &[f64], points: &[Vec3], m: &Vec3) -> Vec3 {
    let mut v = Vec3::zeros();
    for (w, p) in weights.iter().zip(points) {
        if *w > 0.0 {
            if let Ok(l) = log(m, p) {
                v += l * *w;
            }
        }
    }
    v
}
