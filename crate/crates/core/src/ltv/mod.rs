//! Label-space TV model solved by ADMM on the expanded problem
//!
//! ```text
//! min  Σ_T |T| φ_Tᵀ s_T + β Σ_e |e| |X_e|
//! s.t. Σ_ℓ φ_{T,ℓ} Y_{T,ℓ} = 0,  g_ℓ = exp_{m_T}(Y_{T,ℓ}),  X_e = log_{m_{e+}}(m_{e-}).
//! ```
//!
//! Each outer iteration updates `Y`, `X`, `φ`, `m` in that order and then the
//! scaled multipliers `μ`, `ν`, `ξ`.

pub mod m;
pub mod qp;
pub mod y;

use web_time::Instant;

use crate::error::{Error, Result};
use crate::field::{AssignmentField, LabelField};
use crate::labels::{LabelSet, SimilarityField};
use crate::mesh::{Geometry, TriangleMesh};
use crate::metrics;
use crate::sphere::{self, log, Vec3};

pub use m::m_subproblem;
pub use qp::{solve_kkt_active_set, QpConfig};
pub use y::{iteration_tolerance, y_subproblem};

/// Floor of the inner-solve tolerance.
pub const MIN_INNER_TOL: f64 = 1e-8;

/// Inner solves are at least this much tighter than the last primal residual.
pub const INNER_TOL_FACTOR: f64 = 0.1;

pub(crate) const ARMIJO_C: f64 = 1e-4;
pub(crate) const ARMIJO_MAX_HALVINGS: usize = 60;

/// Initial trial step after a step `t` was accepted.
#[inline]
pub(crate) fn next_trial_step(t: f64) -> f64 {
    (2.0 * t).min(1.0)
}

/// Backtracking from step `t0`: returns `(t, f(t))` for the first
/// `t = t0 2^-j` with `f(t) ≤ value - c t slope`. `eval` returns `None` once the step no longer
/// changes the iterate, which ends the search unsuccessfully.
pub(crate) fn armijo(
    value: f64,
    slope: f64,
    t0: f64,
    c: f64,
    max_halvings: usize,
    mut eval: impl FnMut(f64) -> Option<f64>,
) -> Option<(f64, f64)> {
    let mut t = t0;
    for _ in 0..=max_halvings {
        let v = eval(t)?;
        if v <= value - c * t * slope {
            return Some((t, v));
        }
        t *= 0.5;
    }
    None
}

/// Inputs shared by all subproblems.
#[derive(Clone, Copy, Debug)]
pub struct LtvProblem<'a> {
    pub similarity: &'a SimilarityField,
    pub labels: &'a LabelSet,
    pub mesh: &'a TriangleMesh,
    pub geom: &'a Geometry,
}

/// Primal variables, scaled multipliers and parameters of the ADMM iteration.
///
/// Per-triangle-per-label fields (`y`, `nu`) are stored row-major with the
/// label index fastest.
#[derive(Clone, Debug)]
pub struct AdmmState {
    pub phi: AssignmentField,
    pub m: Vec<Vec3>,
    pub y: Vec<Vec3>,
    pub x: Vec<Vec3>,
    pub mu: Vec<Vec3>,
    pub nu: Vec<Vec3>,
    pub xi: Vec<Vec3>,
    pub rho: f64,
    pub beta: f64,
    pub k: usize,
    /// Gradient-norm tolerance of the Y and m inner solves.
    pub inner_tol: f64,
}

impl AdmmState {
    /// Switches to penalty `rho`, rescaling the scaled multipliers so that
    /// the unscaled ones are unchanged.
    pub fn rescale_penalty(&mut self, rho: f64) {
        let f = self.rho / rho;
        for v in self.mu.iter_mut().chain(self.nu.iter_mut()).chain(self.xi.iter_mut()) {
            *v *= f;
        }
        self.rho = rho;
    }

    /// Largest normal component of `Y`, `μ` (at `m_T`) and `X`, `ξ` (at `m_{e+}`).
    pub fn tangency_violation(&self, mesh: &TriangleMesh) -> f64 {
        let width = self.phi.width();
        let mut worst: f64 = 0.0;
        for (t, mt) in self.m.iter().enumerate() {
            for v in &self.y[t * width..(t + 1) * width] {
                worst = worst.max(v.dot(mt).abs());
            }
            worst = worst.max(self.mu[t].dot(mt).abs());
        }
        for (i, e) in mesh.edges().iter().enumerate() {
            let base = &self.m[e.plus];
            worst = worst.max(self.x[i].dot(base).abs()).max(self.xi[i].dot(base).abs());
        }
        worst
    }

    /// Weighted norms of the three constraint residuals:
    /// `Σ_ℓ φ Y`, `exp_m(Y) - g` and `log_{m+}(m-) - X`.
    pub fn residuals(&self, problem: &LtvProblem<'_>) -> [f64; 3] {
        let width = self.phi.width();
        let labels = problem.labels.labels();
        let mut r = [0.0; 3];
        for (t, (mt, area)) in self.m.iter().zip(&problem.geom.areas).enumerate() {
            let ys = &self.y[t * width..(t + 1) * width];
            let mut sum = Vec3::zeros();
            let mut dev = 0.0;
            for ((yl, p), g) in ys.iter().zip(self.phi.row(t)).zip(labels) {
                sum += yl * *p;
                dev += (y::exp_raw(mt, yl) - g).norm_squared();
            }
            r[0] += area * sum.norm_squared();
            r[1] += area * dev;
        }
        for ((e, len), x) in problem.mesh.edges().iter().zip(&problem.geom.edge_lengths).zip(&self.x) {
            let l = sphere::log_or_cut(&self.m[e.plus], &self.m[e.minus]);
            r[2] += len * (l - x).norm_squared();
        }
        r.map(f64::sqrt)
    }
}

/// Initial state: recentralized one-hot argmin assignment, its centers of
/// mass, exact logarithms for `Y` and `X`, and zero multipliers.
///
/// A label antipodal to its triangle's center gets `Y = π t` for a fixed unit
/// tangent `t`, which still satisfies `exp_m(Y) = g` exactly. Antipodal
/// neighboring centers get `X` the same way.
pub fn init_state(problem: &LtvProblem<'_>, beta: f64, rho: f64) -> Result<AdmmState> {
    if !(beta > 0.0 && rho > 0.0) {
        return Err(Error::InvalidInput("beta and rho must be positive".into()));
    }
    let labels = problem.labels.labels();
    let width = labels.len();
    let n = problem.mesh.num_triangles();
    if problem.similarity.rows() != n || problem.similarity.width() != width {
        return Err(Error::InvalidInput("similarity field has the wrong shape".into()));
    }
    let eps = QpConfig::default().epsilon;
    let hard = problem.similarity.argmin_rows();
    let mut phi = LabelField::one_hot(&hard, width);
    let scale = 1.0 / (1.0 + eps * width as f64);
    phi.as_mut_slice().iter_mut().for_each(|p| *p = (*p + eps) * scale);

    let mut m = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n * width);
    for (t, &l) in hard.iter().enumerate() {
        let mt = sphere::karcher_mean(phi.row(t), labels, &labels[l], metrics::CENTER_TOL)?;
        for g in labels {
            y.push(match log(&mt, g) {
                Ok(v) => v,
                Err(Error::Antipodal) => sphere::cut_direction(&mt) * std::f64::consts::PI,
                Err(e) => return Err(e),
            });
        }
        m.push(mt);
    }
    let x = problem
        .mesh
        .edges()
        .iter()
        .map(|e| sphere::log_or_cut(&m[e.plus], &m[e.minus]))
        .collect::<Vec<_>>();
    let n_edges = x.len();
    Ok(AdmmState {
        phi,
        m,
        y,
        x,
        mu: vec![Vec3::zeros(); n],
        nu: vec![Vec3::zeros(); n * width],
        xi: vec![Vec3::zeros(); n_edges],
        rho,
        beta,
        k: 0,
        inner_tol: 1.0,
    })
}

/// Vector soft-thresholding `X_e = (1 - (β/ρ)/max{β/ρ, |v|}) v` of
/// `v = log_{m+}(m-) + ξ_e`.
pub fn x_subproblem(state: &mut AdmmState, mesh: &TriangleMesh) -> Result<()> {
    let thresh = state.beta / state.rho;
    for (i, e) in mesh.edges().iter().enumerate() {
        let v = sphere::log_or_cut(&state.m[e.plus], &state.m[e.minus]) + state.xi[i];
        state.x[i] = shrink(&v, thresh);
    }
    Ok(())
}

/// `(1 - κ/max{κ, |v|}) v`.
pub fn shrink(v: &Vec3, kappa: f64) -> Vec3 {
    let n = v.norm();
    if n <= kappa {
        Vec3::zeros()
    } else {
        v * (1.0 - kappa / n)
    }
}

/// Per-triangle simplex QPs. Returns the number of triangles that fell back to
/// the stage-1 iterate.
pub fn phi_subproblem(state: &mut AdmmState, similarity: &SimilarityField, cfg: &QpConfig) -> usize {
    let width = state.phi.width();
    let mut fallbacks = 0;
    for t in 0..state.m.len() {
        let problem = qp::QpProblem {
            s: similarity.row(t),
            y: &state.y[t * width..(t + 1) * width],
            mu: &state.mu[t],
            rho: state.rho,
        };
        let sol = qp::solve(&problem, state.phi.row(t), cfg);
        fallbacks += usize::from(sol.fallback);
        state.phi.row_mut(t).copy_from_slice(&sol.phi);
    }
    fallbacks
}

/// `μ += Σ φ Y`, `ν += exp_m(Y) - g`, `ξ += log_{m+}(m-) - X`.
pub fn update_multipliers(state: &mut AdmmState, labels: &[Vec3], mesh: &TriangleMesh) {
    let width = labels.len();
    for (t, mt) in state.m.iter().enumerate() {
        let ys = &state.y[t * width..(t + 1) * width];
        let mut sum = Vec3::zeros();
        for (l, (yl, p)) in ys.iter().zip(state.phi.row(t)).enumerate() {
            sum += yl * *p;
            state.nu[t * width + l] += y::exp_raw(mt, yl) - labels[l];
        }
        state.mu[t] += sum;
    }
    for (i, e) in mesh.edges().iter().enumerate() {
        let l = sphere::log_or_cut(&state.m[e.plus], &state.m[e.minus]);
        state.xi[i] += l - state.x[i];
    }
}

/// Stopping rule and subproblem settings of [`admm_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmmConfig {
    pub primal_tol: f64,
    pub change_tol: f64,
    pub max_iters: usize,
    /// Factor applied to the penalty after every iteration (1 keeps it fixed).
    pub rho_growth: f64,
    /// Upper bound for the growing penalty.
    pub rho_max: f64,
    pub qp: QpConfig,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            primal_tol: 1e-4,
            change_tol: 1e-6,
            max_iters: 3000,
            rho_growth: 1.05,
            rho_max: 1e4,
            qp: QpConfig::default(),
        }
    }
}

/// One row of the per-iteration diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationDiagnostics {
    pub k: usize,
    /// `Σ|T| φᵀs + β Σ|e| d(m_{e+}, m_{e-})` with the iteration's centers.
    pub objective: f64,
    pub residuals: [f64; 3],
    pub qp_fallbacks: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct AdmmOutcome {
    pub state: AdmmState,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: Vec<IterationDiagnostics>,
}

impl AdmmOutcome {
    pub fn phi(&self) -> &AssignmentField {
        &self.state.phi
    }

    pub fn centers(&self) -> &[Vec3] {
        &self.state.m
    }
}

/// Runs ADMM from [`init_state`].
pub fn admm_solve(
    problem: &LtvProblem<'_>,
    beta: f64,
    rho: f64,
    cfg: &AdmmConfig,
) -> Result<AdmmOutcome> {
    admm_solve_monitored(problem, beta, rho, cfg, |_, _| {})
}

/// [`admm_solve`] calling `monitor(state, diagnostics)` after every iteration.
pub fn admm_solve_monitored(
    problem: &LtvProblem<'_>,
    beta: f64,
    rho: f64,
    cfg: &AdmmConfig,
    mut monitor: impl FnMut(&AdmmState, &IterationDiagnostics),
) -> Result<AdmmOutcome> {
    let start = Instant::now();
    let mut state = init_state(problem, beta, rho)?;
    let labels = problem.labels.labels();
    let areas = &problem.geom.areas;
    let total_area = problem.geom.total_area();
    let mut diagnostics = Vec::new();
    let mut prev_phi = state.phi.clone();
    let mut prev_m = state.m.clone();
    let mut last_primal = f64::INFINITY;
    for k in 0..cfg.max_iters {
        state.k = k;
        state.inner_tol = iteration_tolerance(k).min(INNER_TOL_FACTOR * last_primal).max(MIN_INNER_TOL);
        y_subproblem(&mut state, labels)?;
        x_subproblem(&mut state, problem.mesh)?;
        let fallbacks = phi_subproblem(&mut state, problem.similarity, &cfg.qp);
        m_subproblem(&mut state, labels, problem.mesh, problem.geom)?;
        update_multipliers(&mut state, labels, problem.mesh);
        let next_rho = (state.rho * cfg.rho_growth).min(cfg.rho_max.max(state.rho));
        if next_rho != state.rho {
            state.rescale_penalty(next_rho);
        }

        let residuals = state.residuals(problem);
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("ADMM residuals"));
        }
        let objective = metrics::fidelity(&state.phi, problem.similarity, problem.geom)
            + beta * metrics::tv_centers(&state.m, problem.mesh, problem.geom);
        let diag = IterationDiagnostics {
            k: k + 1,
            objective,
            residuals,
            qp_fallbacks: fallbacks,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        monitor(&state, &diag);
        diagnostics.push(diag);

        let dphi = relative_change(&state.phi, &prev_phi, areas);
        let dm = (state
            .m
            .iter()
            .zip(&prev_m)
            .zip(areas)
            .map(|((a, b), w)| w * (a - b).norm_squared())
            .sum::<f64>()
            / total_area)
            .sqrt();
        prev_phi.as_mut_slice().copy_from_slice(state.phi.as_slice());
        prev_m.copy_from_slice(&state.m);
        let primal = residuals.iter().cloned().fold(0.0, f64::max);
        last_primal = primal;
        if primal <= cfg.primal_tol && dphi.max(dm) <= cfg.change_tol {
            state.k = k + 1;
            return Ok(AdmmOutcome { state, iterations: k + 1, converged: true, diagnostics });
        }
    }
    state.k = cfg.max_iters;
    Ok(AdmmOutcome { state, iterations: cfg.max_iters, converged: false, diagnostics })
}

/// Area-weighted `‖a - b‖ / ‖b‖` (the plain norm of `a - b` when `b = 0`).
pub fn relative_change(a: &LabelField, b: &LabelField, areas: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for ((ra, rb), w) in a.iter_rows().zip(b.iter_rows()).zip(areas) {
        for (x, y) in ra.iter().zip(rb) {
            diff += w * (x - y) * (x - y);
            base += w * y * y;
        }
    }
    if base == 0.0 {
        diff.sqrt()
    } else {
        (diff / base).sqrt()
    }
}
