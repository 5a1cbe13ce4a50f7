//! Assignment-space TV model solved with the Chambolle–Pock primal–dual method.
//!
//! Triangle fields carry the area-weighted inner product `Σ_T |T| u_T·v_T`,
//! edge fields the length-weighted one `Σ_e |e| p_e·q_e`. The jump operator
//! `(Kφ)_e = β(φ_{e+} - φ_{e-})` folds in the regularization weight, so the TV
//! term is the support function of the unit box in the edge space and the dual
//! update is a plain clip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{AssignmentField, DualEdgeField, LabelField};
use crate::labels::SimilarityField;
use crate::mesh::{Geometry, TriangleMesh};
use crate::metrics;
use crate::simplex;

/// `(Kφ)_e = β(φ_{e+} - φ_{e-})`.
pub fn jump_apply(phi: &LabelField, beta: f64, mesh: &TriangleMesh) -> LabelField {
    let width = phi.width();
    let mut out = LabelField::zeros(mesh.num_edges(), width);
    jump_apply_into(phi, beta, mesh, &mut out);
    out
}

fn jump_apply_into(phi: &LabelField, beta: f64, mesh: &TriangleMesh, out: &mut LabelField) {
    for (row, e) in out.iter_rows_mut().zip(mesh.edges()) {
        let a = phi.row(e.plus);
        let b = phi.row(e.minus);
        for ((o, x), y) in row.iter_mut().zip(a).zip(b) {
            *o = beta * (x - y);
        }
    }
}

/// Adjoint of [`jump_apply`] in the weighted inner products:
/// `(K*p)_T = (β/|T|) Σ_{e ∋ T} ±|e| p_e`, plus sign when `T = e+`.
pub fn jump_adjoint(p: &LabelField, beta: f64, mesh: &TriangleMesh, geom: &Geometry) -> LabelField {
    let mut out = LabelField::zeros(mesh.num_triangles(), p.width());
    jump_adjoint_into(p, beta, mesh, geom, &mut out);
    out
}

fn jump_adjoint_into(
    p: &LabelField,
    beta: f64,
    mesh: &TriangleMesh,
    geom: &Geometry,
    out: &mut LabelField,
) {
    out.as_mut_slice().fill(0.0);
    for ((e, pe), len) in mesh.edges().iter().zip(p.iter_rows()).zip(&geom.edge_lengths) {
        let wp = beta * len / geom.areas[e.plus];
        for (o, v) in out.row_mut(e.plus).iter_mut().zip(pe) {
            *o += wp * v;
        }
        let wm = beta * len / geom.areas[e.minus];
        for (o, v) in out.row_mut(e.minus).iter_mut().zip(pe) {
            *o -= wm * v;
        }
    }
}

/// Power iteration on `K*K` for a scalar field with `β = 1`, scaled by `β`.
///
/// Runs at most 100 iterations from a fixed pseudo-random start and stops early
/// once the Rayleigh quotient changes by less than 1e-6 relative. The result is
/// `√λ_max` inflated by a 1.01 safety factor.
pub fn estimate_operator_norm(mesh: &TriangleMesh, geom: &Geometry, beta: f64) -> f64 {
    let n = mesh.num_triangles();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = LabelField::from_vec(1, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let mut kx = LabelField::zeros(mesh.num_edges(), 1);
    let mut ktkx = LabelField::zeros(n, 1);
    let mut lambda = 0.0;
    for _ in 0..100 {
        let norm = x.weighted_norm(&geom.areas);
        if norm == 0.0 {
            break;
        }
        x.as_mut_slice().iter_mut().for_each(|v| *v /= norm);
        jump_apply_into(&x, 1.0, mesh, &mut kx);
        let next = kx.weighted_dot(&kx, &geom.edge_lengths);
        jump_adjoint_into(&kx, 1.0, mesh, geom, &mut ktkx);
        std::mem::swap(&mut x, &mut ktkx);
        let done = lambda > 0.0 && ((next - lambda) / next).abs() < 1e-6;
        lambda = next;
        if done {
            break;
        }
    }
    beta.abs() * lambda.sqrt() * 1.01
}

/// Step sizes and stopping rule for [`chambolle_pock`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpConfig {
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
    pub max_iters: usize,
    pub primal_tol: f64,
}

impl CpConfig {
    /// Validates `τ, σ > 0`, `θ ∈ [0, 1]` and `τσ‖K‖² ≤ 1`.
    pub fn new(
        tau: f64,
        sigma: f64,
        theta: f64,
        max_iters: usize,
        primal_tol: f64,
        operator_norm: f64,
    ) -> Result<Self> {
        if !(tau > 0.0 && sigma > 0.0) {
            return Err(Error::InvalidInput("step sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidInput("extrapolation must lie in [0, 1]".into()));
        }
        if tau * sigma * operator_norm * operator_norm > 1.0 {
            return Err(Error::InvalidInput(format!(
                "tau*sigma*|K|^2 = {} exceeds 1",
                tau * sigma * operator_norm * operator_norm
            )));
        }
        Ok(Self { tau, sigma, theta, max_iters, primal_tol })
    }

    /// `τ = σ = 0.99/‖K‖`, `θ = 1`, 20000 iterations, relative tolerance 1e-7.
    /// With `‖K‖ = 0` (no regularization) both steps are 1.
    pub fn with_defaults(operator_norm: f64) -> Self {
        let step = if operator_norm > 0.0 { 0.99 / operator_norm } else { 1.0 };
        Self { tau: step, sigma: step, theta: 1.0, max_iters: 20_000, primal_tol: 1e-7 }
    }
}

#[derive(Clone, Debug)]
pub struct CpOutcome {
    pub phi: AssignmentField,
    pub dual: DualEdgeField,
    pub iterations: usize,
    pub converged: bool,
}

/// One-hot assignment at the per-triangle fidelity minimizer.
pub fn argmin_initialization(similarity: &SimilarityField) -> AssignmentField {
    LabelField::one_hot(&similarity.argmin_rows(), similarity.width())
}

/// Runs the primal–dual iteration
///
/// ```text
/// d   ← clip(d + σ K φ̄, -1, 1)
/// φ_T ← proj_Σ(φ_T - τ (K*d)_T - τ s_T)
/// φ̄   ← φ_new + θ (φ_new - φ_old)
/// ```
///
/// until `‖φ_new - φ_old‖ ≤ tol · ‖φ_old‖` in the area-weighted norm.
#[allow(clippy::too_many_arguments)]
pub fn chambolle_pock(
    similarity: &SimilarityField,
    beta: f64,
    cfg: &CpConfig,
    mesh: &TriangleMesh,
    geom: &Geometry,
    phi0: AssignmentField,
    d0: DualEdgeField,
) -> Result<CpOutcome> {
    chambolle_pock_monitored(similarity, beta, cfg, mesh, geom, phi0, d0, |_, _| {})
}

/// [`chambolle_pock`] calling `monitor(k, φ^k)` after every iteration.
#[allow(clippy::too_many_arguments)]
pub fn chambolle_pock_monitored(
    similarity: &SimilarityField,
    beta: f64,
    cfg: &CpConfig,
    mesh: &TriangleMesh,
    geom: &Geometry,
    phi0: AssignmentField,
    d0: DualEdgeField,
    mut monitor: impl FnMut(usize, &AssignmentField),
) -> Result<CpOutcome> {
    let width = similarity.width();
    if phi0.width() != width || phi0.rows() != mesh.num_triangles() {
        return Err(Error::InvalidInput("initial assignment has the wrong shape".into()));
    }
    if d0.width() != width || d0.rows() != mesh.num_edges() {
        return Err(Error::InvalidInput("initial dual has the wrong shape".into()));
    }
    let mut phi = phi0;
    let mut dual = d0;
    let mut bar = phi.clone();
    let mut prev = phi.clone();
    let mut k_bar = LabelField::zeros(mesh.num_edges(), width);
    let mut k_adj = LabelField::zeros(mesh.num_triangles(), width);

    for k in 0..cfg.max_iters {
        jump_apply_into(&bar, beta, mesh, &mut k_bar);
        for (d, kb) in dual.as_mut_slice().iter_mut().zip(k_bar.as_slice()) {
            *d = (*d + cfg.sigma * kb).clamp(-1.0, 1.0);
        }

        jump_adjoint_into(&dual, beta, mesh, geom, &mut k_adj);
        prev.as_mut_slice().copy_from_slice(phi.as_slice());
        for ((row, adj), s) in phi.iter_rows_mut().zip(k_adj.iter_rows()).zip(similarity.iter_rows()) {
            for ((x, a), si) in row.iter_mut().zip(adj).zip(s) {
                *x -= cfg.tau * (a + si);
            }
            simplex::project_in_place(row);
        }

        let mut diff2 = 0.0;
        let mut base2 = 0.0;
        for ((row, old), area) in phi.iter_rows().zip(prev.iter_rows()).zip(&geom.areas) {
            for (x, y) in row.iter().zip(old) {
                diff2 += area * (x - y) * (x - y);
                base2 += area * y * y;
            }
        }
        for ((b, x), y) in bar.as_mut_slice().iter_mut().zip(phi.as_slice()).zip(prev.as_slice()) {
            *b = x + cfg.theta * (x - y);
        }
        if !diff2.is_finite() {
            return Err(Error::NonFinite("chambolle-pock primal iterate"));
        }
        monitor(k + 1, &phi);
        if diff2.sqrt() <= cfg.primal_tol * base2.sqrt() {
            return Ok(CpOutcome { phi, dual, iterations: k + 1, converged: true });
        }
    }
    Ok(CpOutcome { phi, dual, iterations: cfg.max_iters, converged: false })
}

/// A-TV solve with default step sizes from the estimated operator norm and an
/// argmin warm start.
pub fn solve_atv(
    similarity: &SimilarityField,
    beta: f64,
    mesh: &TriangleMesh,
    geom: &Geometry,
    max_iters: Option<usize>,
    primal_tol: Option<f64>,
) -> Result<CpOutcome> {
    solve_atv_monitored(similarity, beta, mesh, geom, max_iters, primal_tol, |_, _| {})
}

/// [`solve_atv`] with a per-iteration callback.
pub fn solve_atv_monitored(
    similarity: &SimilarityField,
    beta: f64,
    mesh: &TriangleMesh,
    geom: &Geometry,
    max_iters: Option<usize>,
    primal_tol: Option<f64>,
    monitor: impl FnMut(usize, &AssignmentField),
) -> Result<CpOutcome> {
    let norm = estimate_operator_norm(mesh, geom, beta);
    let mut cfg = CpConfig::with_defaults(norm);
    if let Some(n) = max_iters {
        cfg.max_iters = n;
    }
    if let Some(t) = primal_tol {
        cfg.primal_tol = t;
    }
    let phi0 = argmin_initialization(similarity);
    let d0 = LabelField::zeros(mesh.num_edges(), similarity.width());
    chambolle_pock_monitored(similarity, beta, &cfg, mesh, geom, phi0, d0, monitor)
}

/// A-TV objective of an assignment, re-exported for monitoring.
pub fn objective(
    phi: &AssignmentField,
    similarity: &SimilarityField,
    beta: f64,
    mesh: &TriangleMesh,
    geom: &Geometry,
) -> f64 {
    metrics::objective_atv(phi, similarity, beta, mesh, geom)
}
