//! Experiment fixtures, single solver runs and β sweeps scored against a
//! clean-mesh reference labeling.

use std::fmt::Write as _;
use web_time::Instant;

use crate::atv;
use crate::error::{Error, Result};
use crate::field::AssignmentField;
use crate::labels::{similarity_field, LabelSet, SimilarityField};
use crate::ltv::{self, AdmmConfig, IterationDiagnostics, LtvProblem};
use crate::mesh::{add_vertex_noise, icosphere, Geometry, TriangleMesh};
use crate::metrics;
use crate::sphere::Vec3;

/// Area fraction above which a label counts in `labels_used_area`.
pub const LABEL_AREA_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Atv,
    Ltv,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Atv => "atv",
            Model::Ltv => "ltv",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atv" => Ok(Model::Atv),
            "ltv" => Ok(Model::Ltv),
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }
}

/// A noisy mesh with its label set, fidelity field and the reference labeling
/// (per-triangle fidelity argmin on the clean mesh).
#[derive(Clone, Debug)]
pub struct Fixture {
    pub mesh: TriangleMesh,
    pub geom: Geometry,
    pub labels: LabelSet,
    pub similarity: SimilarityField,
    pub reference: Vec<usize>,
}

impl Fixture {
    /// Builds the fixture from a clean mesh; `noise` is `(variance factor, seed)`.
    pub fn from_clean(clean: &TriangleMesh, labels: LabelSet, noise: Option<(f64, u64)>) -> Result<Self> {
        let clean_geom = Geometry::compute(clean)?;
        let reference = similarity_field(&clean_geom.normals, &labels).argmin_rows();
        let mesh = match noise {
            Some((c, seed)) => add_vertex_noise(clean, c, seed),
            None => clean.clone(),
        };
        let geom = Geometry::compute(&mesh)?;
        let similarity = similarity_field(&geom.normals, &labels);
        Ok(Self { mesh, geom, labels, similarity, reference })
    }

    /// Unit icosphere with the given subdivision level.
    pub fn sphere(subdivisions: u32, labels: LabelSet, noise: Option<(f64, u64)>) -> Result<Self> {
        Self::from_clean(&icosphere(subdivisions, 1.0)?, labels, noise)
    }
}

/// Iteration limits and parameters shared by both models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveSettings {
    pub rho: f64,
    /// Overrides the model's default iteration cap.
    pub max_iters: Option<usize>,
    /// Overrides the model's default primal tolerance.
    pub tol: Option<f64>,
    /// Per-iteration growth factor of the L-TV penalty.
    pub rho_growth: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self { rho: 1.0, max_iters: None, tol: None, rho_growth: AdmmConfig::default().rho_growth }
    }
}

/// Outcome of one solver run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub model: Model,
    pub beta: f64,
    pub phi: AssignmentField,
    /// Centers of mass from the L-TV solver.
    pub centers: Option<Vec<Vec3>>,
    pub hard: Vec<usize>,
    pub objective: f64,
    pub tv: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: f64,
    pub diagnostics: Vec<IterationDiagnostics>,
}

/// Solves one model at one β. β = 0 returns the fidelity argmin for both models.
pub fn run_model(model: Model, fixture: &Fixture, beta: f64, settings: &SolveSettings) -> Result<RunResult> {
    let start = Instant::now();
    let (mesh, geom, sim, labels) = (&fixture.mesh, &fixture.geom, &fixture.similarity, &fixture.labels);
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid beta {beta}")));
    }
    match model {
        Model::Atv => {
            let mut diagnostics = Vec::new();
            let mut prev = atv::argmin_initialization(sim);
            let out = atv::solve_atv_monitored(sim, beta, mesh, geom, settings.max_iters, settings.tol, |k, phi| {
                let change = ltv::relative_change(phi, &prev, &geom.areas);
                prev.as_mut_slice().copy_from_slice(phi.as_slice());
                diagnostics.push(IterationDiagnostics {
                    k,
                    objective: metrics::objective_atv(phi, sim, beta, mesh, geom),
                    residuals: [change, 0.0, 0.0],
                    qp_fallbacks: 0,
                    wall_time_s: start.elapsed().as_secs_f64(),
                });
            })?;
            let tv = metrics::tv_assignment(&out.phi, mesh, geom);
            let objective = metrics::fidelity(&out.phi, sim, geom) + beta * tv;
            Ok(RunResult {
                model,
                beta,
                hard: metrics::hard_labels_atv(&out.phi),
                phi: out.phi,
                centers: None,
                objective,
                tv,
                iterations: out.iterations,
                converged: out.converged,
                runtime_s: start.elapsed().as_secs_f64(),
                diagnostics,
            })
        }
        Model::Ltv if beta == 0.0 => {
            let phi = atv::argmin_initialization(sim);
            let centers = metrics::centers_of_mass(&phi, labels)?;
            let tv = metrics::tv_centers(&centers, mesh, geom);
            Ok(RunResult {
                model,
                beta,
                hard: metrics::hard_labels_ltv(&centers, labels),
                objective: metrics::fidelity(&phi, sim, geom),
                phi,
                centers: Some(centers),
                tv,
                iterations: 0,
                converged: true,
                runtime_s: start.elapsed().as_secs_f64(),
                diagnostics: Vec::new(),
            })
        }
        Model::Ltv => {
            let mut cfg = AdmmConfig { rho_growth: settings.rho_growth, ..AdmmConfig::default() };
            if let Some(n) = settings.max_iters {
                cfg.max_iters = n;
            }
            if let Some(t) = settings.tol {
                cfg.primal_tol = t;
            }
            let problem = LtvProblem { similarity: sim, labels, mesh, geom };
            let out = ltv::admm_solve(&problem, beta, settings.rho, &cfg)?;
            let hard = metrics::hard_labels_ltv(out.centers(), labels);
            let tv = metrics::tv_label(out.phi(), labels, mesh, geom)
                .unwrap_or_else(|_| metrics::tv_centers(out.centers(), mesh, geom));
            let objective = metrics::fidelity(out.phi(), sim, geom) + beta * tv;
            Ok(RunResult {
                model,
                beta,
                hard,
                centers: Some(out.state.m.clone()),
                phi: out.state.phi,
                objective,
                tv,
                iterations: out.iterations,
                converged: out.converged,
                runtime_s: start.elapsed().as_secs_f64(),
                diagnostics: out.diagnostics,
            })
        }
    }
}

/// One β of a sweep. Solver failures are kept in `error` with NaN metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub correctness: f64,
    pub labels_used: usize,
    /// Labels covering at least [`LABEL_AREA_FRACTION`] of the area.
    pub labels_used_area: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub model: Model,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str = "beta,correctness,labels_used,objective,iterations,runtime_s";

    /// Row with the highest correctness (first on ties).
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.error.is_none())
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if b.correctness >= r.correctness => Some(b),
                _ => Some(r),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.beta, r.correctness, r.labels_used, r.objective, r.iterations, r.runtime_s
            );
        }
        out
    }

    /// One line naming β* and its correctness.
    pub fn summary(&self) -> String {
        match self.best() {
            Some(b) => format!(
                "{}: beta* = {} (correctness {:.4}, {} labels used)",
                self.model.name(),
                b.beta,
                b.correctness,
                b.labels_used
            ),
            None => format!("{}: no successful runs", self.model.name()),
        }
    }
}

/// `base · 2^k` for `k = -3, …, 3`.
pub fn default_grid(base: f64) -> Vec<f64> {
    (-3..=3).map(|k| base * 2f64.powi(k)).collect()
}

/// Scores one run against the fixture's reference labeling.
pub fn score(fixture: &Fixture, run: &RunResult) -> Result<SweepRow> {
    let n = fixture.labels.len();
    Ok(SweepRow {
        beta: run.beta,
        correctness: metrics::correctness(&run.hard, &fixture.reference, &fixture.geom.areas)?,
        labels_used: metrics::labels_used(&run.hard, n),
        labels_used_area: metrics::labels_used_by_area(&run.hard, &fixture.geom.areas, n, LABEL_AREA_FRACTION),
        objective: run.objective,
        iterations: run.iterations,
        converged: run.converged,
        runtime_s: run.runtime_s,
        error: None,
    })
}

fn sweep_row(model: Model, fixture: &Fixture, beta: f64, settings: &SolveSettings) -> SweepRow {
    match run_model(model, fixture, beta, settings).and_then(|run| score(fixture, &run)) {
        Ok(row) => row,
        Err(e) => SweepRow {
            beta,
            correctness: f64::NAN,
            labels_used: 0,
            labels_used_area: 0,
            objective: f64::NAN,
            iterations: 0,
            converged: false,
            runtime_s: 0.0,
            error: Some(e.to_string()),
        },
    }
}

/// Runs `model` for every β of `grid` (sorted ascending) on up to `jobs`
/// threads.
pub fn beta_sweep(
    model: Model,
    grid: &[f64],
    fixture: &Fixture,
    settings: &SolveSettings,
    jobs: usize,
) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty beta grid".into()));
    }
    let mut betas = grid.to_vec();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let jobs = jobs.clamp(1, betas.len());
    let mut rows: Vec<Option<SweepRow>> = vec![None; betas.len()];
    if jobs == 1 {
        for (slot, &beta) in rows.iter_mut().zip(&betas) {
            *slot = Some(sweep_row(model, fixture, beta, settings));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results = std::sync::Mutex::new(&mut rows);
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= betas.len() {
                        break;
                    }
                    let row = sweep_row(model, fixture, betas[i], settings);
                    results.lock().expect("sweep worker panicked")[i] = Some(row);
                });
            }
        });
    }
    Ok(SweepReport { model, rows: rows.into_iter().map(|r| r.expect("every row computed")).collect() })
}
