use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use surfseg::io::{label_colors, load_mesh, write_off, write_ply};
use surfseg::labels::{equator_pole_labels, fibonacci_labels, similarity_field};
use surfseg::ltv::IterationDiagnostics;
use surfseg::mesh::{add_vertex_noise, icosphere};
use surfseg::sweep::{beta_sweep, default_grid, run_model, score, Fixture, Model, RunResult, SolveSettings};
use surfseg::{metrics, Geometry, LabelSet, TriangleMesh};

use crate::args::{EvaluateArgs, Generate, NoiseArgs, RunArgs, SweepArgs};

/// Exit status when a solver stopped at its iteration cap.
pub const EXIT_NOT_CONVERGED: u8 = 2;

pub type CliResult<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Loads `icosphere:N` or a mesh file.
pub fn mesh_from_spec(spec: &str) -> CliResult<TriangleMesh> {
    if let Some(sub) = spec.strip_prefix("icosphere:") {
        let sub: u32 = sub.parse().map_err(|_| format!("bad subdivision level in '{spec}'"))?;
        return icosphere(sub, 1.0).map_err(err);
    }
    load_mesh(Path::new(spec), None).map_err(|e| format!("{spec}: {e}"))
}

/// Loads `equator:N`, `fibonacci:N` or a label CSV.
pub fn labels_from_spec(spec: &str) -> CliResult<LabelSet> {
    let count = |s: &str| s.parse::<usize>().map_err(|_| format!("bad label count in '{spec}'"));
    if let Some(n) = spec.strip_prefix("equator:") {
        return equator_pole_labels(count(n)?).map_err(err);
    }
    if let Some(n) = spec.strip_prefix("fibonacci:") {
        return fibonacci_labels(count(n)?).map_err(err);
    }
    let text = fs::read_to_string(spec).map_err(|e| format!("{spec}: {e}"))?;
    LabelSet::from_csv(&text).map_err(|e| format!("{spec}: {e}"))
}

fn create_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(err),
        _ => Ok(()),
    }
}

pub fn generate(cmd: Generate) -> CliResult<u8> {
    match cmd {
        Generate::Icosphere { sub, radius, out } => {
            let mesh = icosphere(sub, radius).map_err(err)?;
            create_parent(&out)?;
            write_off(&out, &mesh).map_err(err)?;
        }
        Generate::LabelsEquator { n, out } => {
            create_parent(&out)?;
            fs::write(&out, equator_pole_labels(n).map_err(err)?.to_csv()).map_err(err)?;
        }
        Generate::LabelsFibonacci { count, out } => {
            create_parent(&out)?;
            fs::write(&out, fibonacci_labels(count).map_err(err)?.to_csv()).map_err(err)?;
        }
    }
    Ok(0)
}

pub fn noise(args: NoiseArgs) -> CliResult<u8> {
    let mesh = mesh_from_spec(&args.mesh)?;
    let noisy = add_vertex_noise(&mesh, args.noise_var_factor, args.seed);
    create_parent(&args.out)?;
    write_off(&args.out, &noisy).map_err(err)?;
    Ok(0)
}

/// Run settings after merging flags, config file and defaults.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub mesh: String,
    pub labels: String,
    pub model: String,
    pub beta: Option<f64>,
    pub rho: f64,
    pub rho_growth: f64,
    pub noise_var_factor: f64,
    pub seed: Option<u64>,
    pub reference: Option<String>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(args: RunArgs) -> CliResult<Self> {
        let args = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let file: RunArgs =
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                args.or(file)
            }
            None => args,
        };
        let defaults = SolveSettings::default();
        Ok(Self {
            mesh: args.mesh.ok_or("--mesh is required")?,
            labels: args.labels.unwrap_or_else(|| "equator:20".into()),
            model: args.model.unwrap_or_else(|| "ltv".into()),
            beta: args.beta,
            rho: args.rho.unwrap_or(defaults.rho),
            rho_growth: args.rho_growth.unwrap_or(defaults.rho_growth),
            noise_var_factor: args.noise_var_factor.unwrap_or(0.04),
            seed: args.seed,
            reference: args.reference,
            max_iters: args.max_iters,
            tol: args.tol,
            out: args.out.unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    fn model(&self) -> CliResult<Model> {
        self.model.parse().map_err(err)
    }

    fn settings(&self) -> SolveSettings {
        SolveSettings { rho: self.rho, max_iters: self.max_iters, tol: self.tol, rho_growth: self.rho_growth }
    }

    fn fixture(&self) -> CliResult<(Fixture, bool)> {
        build_fixture(&self.mesh, &self.labels, self.seed, self.noise_var_factor, self.reference.as_deref())
    }
}

/// Fixture plus whether its reference labeling comes from a clean mesh.
fn build_fixture(
    mesh: &str,
    labels: &str,
    seed: Option<u64>,
    noise_var_factor: f64,
    reference: Option<&str>,
) -> CliResult<(Fixture, bool)> {
    let mesh = mesh_from_spec(mesh)?;
    let labels = labels_from_spec(labels)?;
    if let Some(seed) = seed {
        let fx = Fixture::from_clean(&mesh, labels, Some((noise_var_factor, seed))).map_err(err)?;
        return Ok((fx, true));
    }
    let mut fx = Fixture::from_clean(&mesh, labels, None).map_err(err)?;
    match reference {
        Some(spec) => {
            let clean = mesh_from_spec(spec)?;
            fx.reference = reference_labeling(&clean, &fx.labels, fx.mesh.num_triangles())?;
            Ok((fx, true))
        }
        None => Ok((fx, false)),
    }
}

fn reference_labeling(clean: &TriangleMesh, labels: &LabelSet, n_triangles: usize) -> CliResult<Vec<usize>> {
    if clean.num_triangles() != n_triangles {
        return Err(format!(
            "reference mesh has {} triangles, expected {n_triangles}",
            clean.num_triangles()
        ));
    }
    let geom = Geometry::compute(clean).map_err(err)?;
    Ok(similarity_field(&geom.normals, labels).argmin_rows())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a RunConfig,
    triangles: usize,
    labels: usize,
    objective: f64,
    tv: f64,
    iterations: usize,
    converged: bool,
    runtime_s: f64,
    labels_used: usize,
    correctness: Option<f64>,
    qp_fallbacks: usize,
}

fn write(path: PathBuf, contents: String) -> CliResult<()> {
    fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn assignment_csv(run: &RunResult) -> String {
    let width = run.phi.width();
    let mut s = String::from("triangle");
    for l in 0..width {
        let _ = write!(s, ",phi{l}");
    }
    s.push('\n');
    for (t, row) in run.phi.iter_rows().enumerate() {
        let _ = write!(s, "{t}");
        for v in row {
            let _ = write!(s, ",{v:?}");
        }
        s.push('\n');
    }
    s
}

fn hard_csv(hard: &[usize]) -> String {
    let mut s = String::from("triangle,label\n");
    for (t, l) in hard.iter().enumerate() {
        let _ = writeln!(s, "{t},{l}");
    }
    s
}

fn diagnostics_csv(diags: &[IterationDiagnostics]) -> String {
    let mut s = String::from("k,objective,r_simplex,r_exp,r_log,qp_fallbacks,wall_time_s\n");
    for d in diags {
        let [a, b, c] = d.residuals;
        let _ = writeln!(s, "{},{:?},{:?},{:?},{:?},{},{:?}", d.k, d.objective, a, b, c, d.qp_fallbacks, d.wall_time_s);
    }
    s
}

fn m_field_csv(m: &[surfseg::sphere::Vec3]) -> String {
    let mut s = String::from("triangle,x,y,z\n");
    for (t, v) in m.iter().enumerate() {
        let _ = writeln!(s, "{t},{:?},{:?},{:?}", v.x, v.y, v.z);
    }
    s
}

pub fn segment(args: RunArgs) -> CliResult<u8> {
    let cfg = RunConfig::resolve(args)?;
    let model = cfg.model()?;
    let beta = cfg.beta.ok_or("--beta is required")?;
    let (fx, has_reference) = cfg.fixture()?;
    let run = run_model(model, &fx, beta, &cfg.settings()).map_err(err)?;
    let row = score(&fx, &run).map_err(err)?;

    fs::create_dir_all(&cfg.out).map_err(err)?;
    write(cfg.out.join("assignment.csv"), assignment_csv(&run))?;
    write(cfg.out.join("hard_labels.csv"), hard_csv(&run.hard))?;
    write_ply(&cfg.out.join("segmentation.ply"), &fx.mesh, Some(&label_colors(&run.hard))).map_err(err)?;
    write(cfg.out.join("diagnostics.csv"), diagnostics_csv(&run.diagnostics))?;
    if let Some(m) = &run.centers {
        write(cfg.out.join("m_field.csv"), m_field_csv(m))?;
    }
    let summary = RunSummary {
        config: &cfg,
        triangles: fx.mesh.num_triangles(),
        labels: fx.labels.len(),
        objective: run.objective,
        tv: run.tv,
        iterations: run.iterations,
        converged: run.converged,
        runtime_s: run.runtime_s,
        labels_used: row.labels_used,
        correctness: has_reference.then_some(row.correctness),
        qp_fallbacks: run.diagnostics.iter().map(|d| d.qp_fallbacks).sum(),
    };
    write(cfg.out.join("summary.json"), serde_json::to_string_pretty(&summary).map_err(err)? + "\n")?;
    println!(
        "{}: beta {} objective {:.6} iterations {}{}",
        model.name(),
        beta,
        run.objective,
        run.iterations,
        if run.converged { "" } else { " (iteration cap reached)" }
    );
    Ok(if run.converged { 0 } else { EXIT_NOT_CONVERGED })
}

/// Default sweep center per model.
fn default_base(model: Model) -> f64 {
    match model {
        Model::Atv => 0.02,
        Model::Ltv => 0.4,
    }
}

pub fn sweep(args: SweepArgs) -> CliResult<u8> {
    let cfg = RunConfig::resolve(args.run)?;
    let model = cfg.model()?;
    let (fx, has_reference) = cfg.fixture()?;
    if !has_reference {
        return Err("a sweep needs a reference: pass --seed or --reference".into());
    }
    let grid = if args.betas.is_empty() {
        default_grid(cfg.beta.unwrap_or(default_base(model)))
    } else {
        args.betas
    };
    let report = beta_sweep(model, &grid, &fx, &cfg.settings(), args.jobs).map_err(err)?;
    fs::create_dir_all(&cfg.out).map_err(err)?;
    write(cfg.out.join(format!("sweep_{}.csv", model.name())), report.to_csv())?;
    let summary = report.summary();
    write(cfg.out.join(format!("sweep_{}.txt", model.name())), format!("{summary}\n"))?;
    println!("{summary}");
    for r in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("beta {}: {}", r.beta, r.error.as_deref().unwrap_or_default());
    }
    Ok(if report.rows.iter().all(|r| r.converged) { 0 } else { EXIT_NOT_CONVERGED })
}

#[derive(Serialize)]
struct Evaluation {
    correctness: f64,
    labels_used: usize,
    triangles: usize,
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<u8> {
    let (fx, _) =
        build_fixture(&args.mesh, &args.labels, args.seed, args.noise_var_factor, args.reference.as_deref())?;
    let text = fs::read_to_string(&args.hard).map_err(|e| format!("{}: {e}", args.hard.display()))?;
    let hard = parse_hard_csv(&text, fx.labels.len())?;
    if hard.len() != fx.mesh.num_triangles() {
        return Err(format!("{} hard labels for {} triangles", hard.len(), fx.mesh.num_triangles()));
    }
    let eval = Evaluation {
        correctness: metrics::correctness(&hard, &fx.reference, &fx.geom.areas).map_err(err)?,
        labels_used: metrics::labels_used(&hard, fx.labels.len()),
        triangles: hard.len(),
    };
    println!("{}", serde_json::to_string(&eval).map_err(err)?);
    Ok(0)
}

/// Parses `triangle,label` rows; triangles must be listed in order.
pub fn parse_hard_csv(text: &str, n_labels: usize) -> CliResult<Vec<usize>> {
    let mut hard = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("triangle")) {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(t), Some(l), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected 'triangle,label'", i + 1));
        };
        let t: usize = t.trim().parse().map_err(|_| format!("line {}: bad triangle index", i + 1))?;
        let l: usize = l.trim().parse().map_err(|_| format!("line {}: bad label", i + 1))?;
        if t != hard.len() {
            return Err(format!("line {}: triangle {t} out of order", i + 1));
        }
        if l >= n_labels {
            return Err(format!("line {}: label {l} out of range", i + 1));
        }
        hard.push(l);
    }
    Ok(hard)
}
