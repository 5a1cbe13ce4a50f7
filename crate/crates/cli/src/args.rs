use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "surfseg", version, about = "Normal-based surface segmentation with total variation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated mesh or label set.
    #[command(subcommand)]
    Generate(Generate),
    /// Perturb mesh vertices with Gaussian noise.
    Noise(NoiseArgs),
    /// Segment a mesh with one model at one β.
    Segment(RunArgs),
    /// Run a β sweep and report β*.
    Sweep(SweepArgs),
    /// Score a hard labeling against a reference mesh.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Subcommand)]
pub enum Generate {
    /// Subdivided icosahedron projected to a sphere (OFF).
    Icosphere {
        #[arg(long, default_value_t = 3)]
        sub: u32,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// `n` equator directions plus both poles (CSV).
    LabelsEquator {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spherical Fibonacci lattice of `L` directions (CSV).
    LabelsFibonacci {
        #[arg(long = "L", short = 'L', default_value_t = 50)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Mesh file or `icosphere:N`.
    #[arg(long)]
    pub mesh: String,
    /// Variance as a multiple of the squared mean incident edge length.
    #[arg(long, default_value_t = 0.04)]
    pub noise_var_factor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output OFF file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Settings of a single run. Every field is optional so that a config file
/// can supply it; flags take precedence.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Mesh file (OFF, OBJ, PLY) or `icosphere:N`.
    #[arg(long)]
    pub mesh: Option<String>,
    /// Label CSV or `equator:N` / `fibonacci:N` [default: equator:20].
    #[arg(long)]
    pub labels: Option<String>,
    /// `atv` or `ltv` [default: ltv].
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Initial ADMM penalty [default: 1].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Per-iteration growth of the ADMM penalty [default: 1.05].
    #[arg(long)]
    pub rho_growth: Option<f64>,
    /// Noise variance factor applied when `--seed` is given [default: 0.04].
    #[arg(long)]
    pub noise_var_factor: Option<f64>,
    /// Perturb the input with this seed and score against the clean input.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Clean mesh whose fidelity argmin is the reference labeling.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Fills unset fields from `other`.
    pub fn or(self, other: RunArgs) -> RunArgs {
        RunArgs {
            config: self.config,
            mesh: self.mesh.or(other.mesh),
            labels: self.labels.or(other.labels),
            model: self.model.or(other.model),
            beta: self.beta.or(other.beta),
            rho: self.rho.or(other.rho),
            rho_growth: self.rho_growth.or(other.rho_growth),
            noise_var_factor: self.noise_var_factor.or(other.noise_var_factor),
            seed: self.seed.or(other.seed),
            reference: self.reference.or(other.reference),
            max_iters: self.max_iters.or(other.max_iters),
            tol: self.tol.or(other.tol),
            out: self.out.or(other.out),
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated β values; defaults to `beta · 2^k`, k = -3..3.
    #[arg(long, value_delimiter = ',')]
    pub betas: Vec<f64>,
    /// Concurrent sweep rows.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Segmented mesh, or the clean mesh when `--seed` is given.
    #[arg(long)]
    pub mesh: String,
    #[arg(long, default_value = "equator:20")]
    pub labels: String,
    /// Rebuild the noisy mesh used by `segment --seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.04)]
    pub noise_var_factor: f64,
    /// Clean mesh defining the reference labeling [default: the mesh itself].
    #[arg(long)]
    pub reference: Option<String>,
    /// Hard-label CSV written by `segment`.
    #[arg(long)]
    pub hard: PathBuf,
}
