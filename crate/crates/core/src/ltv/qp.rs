//! Simplex-constrained QP for the assignment update on one triangle:
//! minimize `φᵀs + ρ/2 |Σ_ℓ φ_ℓ Y_ℓ + μ|²` over the probability simplex.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::simplex;
use crate::sphere::Vec3;

use super::{armijo, ARMIJO_C, ARMIJO_MAX_HALVINGS};

/// Tolerances and caps of the two-stage solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpConfig {
    /// Riemannian gradient norm ending stage 1.
    pub tol_gradient: f64,
    /// Smallest coordinate ending stage 1.
    pub tol_boundary: f64,
    /// Coordinates at or below this are fixed to zero in stage 2.
    pub tol_active: f64,
    /// Recentralization weight.
    pub epsilon: f64,
    /// Gradient steps allowed in stage 1.
    pub max_steps: usize,
    /// Iterations of the active-set correction after a rejected KKT solution.
    pub max_corrections: usize,
}

impl Default for QpConfig {
    fn default() -> Self {
        Self {
            tol_gradient: 1e-8,
            tol_boundary: 1e-8,
            tol_active: 1e-6,
            epsilon: 1e-3,
            max_steps: 1000,
            max_corrections: 100,
        }
    }
}

/// Data of one QP instance.
#[derive(Clone, Copy, Debug)]
pub struct QpProblem<'a> {
    pub s: &'a [f64],
    pub y: &'a [Vec3],
    pub mu: &'a Vec3,
    pub rho: f64,
}

impl QpProblem<'_> {
    fn karcher_term(&self, phi: &[f64]) -> Vec3 {
        let mut v = *self.mu;
        for (yl, p) in self.y.iter().zip(phi) {
            v += yl * *p;
        }
        v
    }

    pub fn objective(&self, phi: &[f64]) -> f64 {
        let lin: f64 = phi.iter().zip(self.s).map(|(p, s)| p * s).sum();
        lin + 0.5 * self.rho * self.karcher_term(phi).norm_squared()
    }

    /// Euclidean gradient `s + ρ Y(Σ φ_ℓ Y_ℓ + μ)`.
    pub fn gradient(&self, phi: &[f64], out: &mut [f64]) {
        let v = self.karcher_term(phi);
        for ((o, s), yl) in out.iter_mut().zip(self.s).zip(self.y) {
            *o = s + self.rho * yl.dot(&v);
        }
    }
}

/// Result of the two-stage solver on one triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub phi: Vec<f64>,
    /// `true` when no KKT solution was accepted and the stage-1 iterate is returned.
    pub fallback: bool,
    /// `true` when the estimated active set was wrong and had to be corrected.
    pub corrected: bool,
    pub stage1_steps: usize,
}

/// Solves the KKT system with the components in `active` fixed to zero:
///
/// ```text
/// ρ Y Yᵀ φ + ρ Y μ + s - α - γ 1 = 0,   1ᵀφ = 1,
/// φ_ℓ = 0 on the active set,  α_ℓ = 0 off it.
/// ```
///
/// Returns `(φ, α, γ)`. The reduced bordered system is solved by SVD and
/// reported singular when its condition number exceeds 1e12.
pub fn solve_kkt_active_set(
    problem: &QpProblem<'_>,
    active: &[bool],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = problem.s.len();
    if active.len() != n {
        return Err(Error::InvalidInput("active set has the wrong length".into()));
    }
    let free: Vec<usize> = (0..n).filter(|&l| !active[l]).collect();
    if free.is_empty() {
        return Err(Error::InvalidInput("active set covers every label".into()));
    }
    let k = free.len();
    let rho = problem.rho;
    let mut mat = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (i, &a) in free.iter().enumerate() {
        for (j, &b) in free.iter().enumerate() {
            mat[(i, j)] = rho * problem.y[a].dot(&problem.y[b]);
        }
        mat[(i, k)] = -1.0;
        mat[(k, i)] = 1.0;
        rhs[i] = -(problem.s[a] + rho * problem.y[a].dot(problem.mu));
    }
    rhs[k] = 1.0;
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::SingularKkt);
    }
    let sol = svd.solve(&rhs, 0.0).map_err(|_| Error::SingularKkt)?;
    let mut phi = vec![0.0; n];
    for (i, &a) in free.iter().enumerate() {
        phi[a] = sol[i];
    }
    let gamma = sol[k];
    let mut grad = vec![0.0; n];
    problem.gradient(&phi, &mut grad);
    let alpha = (0..n).map(|l| if active[l] { grad[l] - gamma } else { 0.0 }).collect();
    Ok((phi, alpha, gamma))
}

/// Tolerance for the sign conditions on a KKT solution.
const KKT_SIGN_TOL: f64 = 1e-12;

/// Two-stage solver: Riemannian gradient descent on the open simplex from the
/// recentralized `phi0`, then an active-set KKT solve.
///
/// When the KKT solution for the estimated active set violates `φ ≥ 0` or
/// `α ≥ 0` (or the system is singular), a primal active-set method is run from
/// the stage-1 iterate with its near-zero coordinates removed. Only if that
/// also fails is the stage-1 iterate returned as a fallback.
pub fn solve(problem: &QpProblem<'_>, phi0: &[f64], cfg: &QpConfig) -> QpSolution {
    let n = problem.s.len();
    if n == 1 {
        return QpSolution { phi: vec![1.0], fallback: false, corrected: false, stage1_steps: 0 };
    }
    // the support of the warm start is usually still optimal
    if phi0.iter().all(|&p| p >= 0.0) {
        if let Some(cand) = certified_kkt(problem, &guess_active(phi0, cfg.tol_active)) {
            return QpSolution { phi: cand, fallback: false, corrected: false, stage1_steps: 0 };
        }
    }
    let (phi, steps) = stage_one(problem, phi0, cfg);
    let active = guess_active(&phi, cfg.tol_active);
    if let Some(cand) = certified_kkt(problem, &active) {
        return QpSolution { phi: cand, fallback: false, corrected: false, stage1_steps: steps };
    }
    // start from whichever feasible point has the smaller support
    let support0 = phi0.iter().filter(|&&p| p > 0.0).count();
    let support1 = active.iter().filter(|&&a| !a).count();
    let (start, work) = if support0 <= support1 && phi0.iter().all(|&p| p >= 0.0) {
        (normalized(phi0.to_vec()), phi0.iter().map(|&p| p <= 0.0).collect())
    } else {
        let truncated = phi.iter().zip(&active).map(|(&p, &a)| if a { 0.0 } else { p }).collect();
        (normalized(truncated), active)
    };
    match primal_active_set(problem, start, work, cfg.max_corrections) {
        Some(x) => QpSolution { phi: normalized(x), fallback: false, corrected: true, stage1_steps: steps },
        None => QpSolution { phi, fallback: true, corrected: false, stage1_steps: steps },
    }
}

fn guess_active(phi: &[f64], tol: f64) -> Vec<bool> {
    let mut active: Vec<bool> = phi.iter().map(|&p| p <= tol).collect();
    if active.iter().all(|&a| a) {
        active[crate::field::argmax(phi)] = false;
    }
    active
}

/// KKT solution for `active` if it satisfies the sign conditions.
fn certified_kkt(problem: &QpProblem<'_>, active: &[bool]) -> Option<Vec<f64>> {
    let (cand, alpha, _) = solve_kkt_active_set(problem, active).ok()?;
    let primal_ok = cand.iter().all(|&p| p >= -KKT_SIGN_TOL);
    let dual_ok = alpha.iter().all(|&a| a >= -KKT_SIGN_TOL);
    (primal_ok && dual_ok).then(|| normalized(cand))
}

/// Orthonormal basis of `{v ∈ R^k : Σ v = 0}` as the columns of a `k × (k-1)` matrix.
fn helmert_basis(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k - 1, |i, j| {
        let norm = (((j + 1) * (j + 2)) as f64).sqrt();
        match i.cmp(&(j + 1)) {
            std::cmp::Ordering::Less => 1.0 / norm,
            std::cmp::Ordering::Equal => -((j + 1) as f64) / norm,
            std::cmp::Ordering::Greater => 0.0,
        }
    })
}

fn normalized(mut phi: Vec<f64>) -> Vec<f64> {
    phi.iter_mut().for_each(|p| *p = p.max(0.0));
    let total: f64 = phi.iter().sum();
    phi.iter_mut().for_each(|p| *p /= total);
    phi
}

/// Primal active-set method for the simplex QP from the feasible point `x`
/// with working set `work` (coordinates held at zero).
///
/// Each iteration minimizes the quadratic over the current face. Directions
/// of zero curvature with nonzero slope are followed up to the nearest
/// blocking bound. Returns `None` if no KKT point is reached within
/// `max_iters` iterations.
fn primal_active_set(
    problem: &QpProblem<'_>,
    mut x: Vec<f64>,
    mut work: Vec<bool>,
    max_iters: usize,
) -> Option<Vec<f64>> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    let scale = 1.0
        + problem.s.iter().map(|v| v.abs()).fold(0.0, f64::max)
        + problem.rho * problem.y.iter().map(|y| y.norm_squared()).sum::<f64>();
    for _ in 0..max_iters {
        problem.gradient(&x, &mut grad);
        let free: Vec<usize> = (0..n).filter(|&l| !work[l]).collect();
        let k = free.len();
        let mean = free.iter().map(|&l| grad[l]).sum::<f64>() / k as f64;
        let g: DVector<f64> = DVector::from_iterator(k, free.iter().map(|&l| grad[l] - mean));
        if g.amax() <= 1e-12 * scale {
            // stationary on the face: check the bound multipliers
            let worst = (0..n)
                .filter(|&l| work[l] && grad[l] - mean < -1e-12 * scale)
                .min_by(|&a, &b| grad[a].total_cmp(&grad[b]));
            match worst {
                Some(l) => {
                    work[l] = false;
                    continue;
                }
                None => return Some(x),
            }
        }
        // H = ρ B Bᵀ on the face, with B = Zᵀ Y_free of rank at most 3
        let z = helmert_basis(k);
        let yf = DMatrix::from_fn(k, 3, |i, j| problem.y[free[i]][j]);
        let b = z.transpose() * yf;
        let gr = z.transpose() * &g;
        let svd = b.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let lmax = problem.rho * svd.singular_values.max().powi(2);
        let mut newton = DVector::zeros(k - 1);
        let mut range = DVector::zeros(k - 1);
        for (i, &sigma) in svd.singular_values.iter().enumerate() {
            let lambda = problem.rho * sigma * sigma;
            if lambda > 1e-12 * scale.max(lmax) {
                let q = u.column(i);
                let c = q.dot(&gr);
                newton -= q * (c / lambda);
                range += q * c;
            }
        }
        let mut ray = -(gr - range);
        if ray.amax() <= 1e-12 * scale {
            ray.fill(0.0);
        }
        let unbounded = ray.norm() > 0.0;
        let step = &z * if unbounded { ray } else { newton };
        let mut length = if unbounded { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for (i, &l) in free.iter().enumerate() {
            if step[i] < 0.0 {
                let ratio = x[l] / -step[i];
                if ratio < length {
                    length = ratio;
                    blocking = Some(l);
                }
            }
        }
        if !length.is_finite() {
            return None;
        }
        for (i, &l) in free.iter().enumerate() {
            x[l] = (x[l] + length * step[i]).max(0.0);
        }
        if let Some(l) = blocking {
            x[l] = 0.0;
            work[l] = true;
            if work.iter().all(|&w| w) {
                return None;
            }
        }
    }
    None
}

fn stage_one(problem: &QpProblem<'_>, phi0: &[f64], cfg: &QpConfig) -> (Vec<f64>, usize) {
    let n = phi0.len();
    let scale = 1.0 / (1.0 + cfg.epsilon * n as f64);
    let mut phi: Vec<f64> = phi0.iter().map(|p| (p + cfg.epsilon) * scale).collect();
    let mut grad = vec![0.0; n];
    let mut rgrad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut cand = vec![0.0; n];
    let mut value = problem.objective(&phi);
    for step in 0..cfg.max_steps {
        problem.gradient(&phi, &mut grad);
        simplex::riemannian_gradient_into(&phi, &grad, &mut rgrad);
        let norm2: f64 = grad.iter().zip(&rgrad).map(|(g, r)| g * r).sum();
        let min = phi.iter().cloned().fold(f64::INFINITY, f64::min);
        if norm2.sqrt() <= cfg.tol_gradient || min <= cfg.tol_boundary {
            return (phi, step);
        }
        let accepted = armijo(value, norm2, 1.0, ARMIJO_C, ARMIJO_MAX_HALVINGS, |t| {
            for (d, r) in dir.iter_mut().zip(&rgrad) {
                *d = -t * r;
            }
            simplex::exp_into(&phi, &dir, &mut cand);
            if cand == phi {
                return None;
            }
            Some(problem.objective(&cand))
        });
        match accepted {
            Some((_, v)) => {
                phi.copy_from_slice(&cand);
                value = v;
            }
            None => return (phi, step),
        }
    }
    (phi, cfg.max_steps)
}
