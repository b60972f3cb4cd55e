use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

#[derive(Debug, Parser)]
#[command(name = "fibration-forge", version, about = "Build and certify great-circle fibrations of odd spheres")]
pub struct Cli {
    /// Seed for every randomized check.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

/// Paths are echoed by file name so reports do not depend on where the
/// inputs live.
fn file_name<S: Serializer>(p: &Path, s: S) -> Result<S::Ok, S::Error> {
    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    s.serialize_str(&name)
}

fn file_names<S: Serializer>(ps: &[PathBuf], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(ps.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()))
}

fn opt_file_name<S: Serializer>(p: &Option<PathBuf>, s: S) -> Result<S::Ok, S::Error> {
    match p {
        Some(p) => file_name(p, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "kebab-case")]
pub enum Command {
    /// Retract a linear map without real eigenvalues to an orthogonal complex structure.
    Retract(RetractArgs),
    /// Principal angles between subspaces, optionally with an aligning isometry.
    Angles(AnglesArgs),
    /// Build a certified fibration tangent to a prescribed plane.
    BuildFibration(BuildArgs),
    /// Re-verify a fibration artifact.
    Verify(VerifyArgs),
    /// Extend a polynomial fibration germ to the whole sphere.
    ExtendGerm(ExtendArgs),
    /// Sample fibres of an artifact as CSV (and SVG on S³).
    SampleFibres(SampleArgs),
    /// Check the Hopf map on given or random points of S³.
    Hopf(HopfArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RetractArgs {
    /// JSON matrix (array of rows).
    #[serde(serialize_with = "file_name")]
    pub input: PathBuf,
    /// Number of equally spaced path parameters in [0, 1].
    #[arg(long, default_value_t = 11, value_parser = clap::value_parser!(u32).range(2..))]
    pub t_grid: u32,
    /// Smallest accepted |Im λ|.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Write the sampled path here.
    #[arg(long, value_name = "PATH")]
    #[serde(serialize_with = "opt_file_name")]
    pub samples_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Real,
    Complex,
    Conjugate,
}

#[derive(Debug, Args, Serialize)]
pub struct AnglesArgs {
    /// Subspace JSON files: P and Q, or P alone for the conjugate setting.
    #[arg(required = true, num_args = 1..=2)]
    #[serde(serialize_with = "file_names")]
    pub subspaces: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub setting: Setting,
    /// Target pair (P₂, Q₂), or Q alone for the conjugate setting.
    #[arg(long, num_args = 1..=2, value_name = "PATH")]
    #[serde(serialize_with = "file_names")]
    pub align: Vec<PathBuf>,
    /// Largest accepted difference of angle profiles when aligning.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct SampleCounts {
    /// Base points checked for real eigenvalues of dN.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Base point pairs checked for disjoint fibres.
    #[arg(long, default_value_t = 500)]
    pub pairs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    /// JSON matrix A: P⊥ → P⊥ prescribing the tangent plane.
    #[serde(serialize_with = "file_name")]
    pub input: PathBuf,
    /// Artifact output path.
    #[arg(long, value_name = "PATH")]
    #[serde(serialize_with = "file_name")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub r0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r1: f64,
    /// Interpolation parameters sampled for the margin.
    #[arg(long, default_value_t = 101)]
    pub t_count: usize,
    /// Real shifts sampled per interpolation parameter.
    #[arg(long, default_value_t = 64)]
    pub lambda_count: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub counts: SampleCounts,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[serde(serialize_with = "file_name")]
    pub artifact: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub counts: SampleCounts,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtendArgs {
    /// Germ JSON file.
    #[serde(serialize_with = "file_name")]
    pub germ: PathBuf,
    /// Write the extension (germ, accepted radius, outer artifact) here.
    #[arg(long, value_name = "PATH")]
    #[serde(serialize_with = "opt_file_name")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub counts: SampleCounts,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[serde(serialize_with = "file_name")]
    pub artifact: PathBuf,
    /// Number of fibres.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    pub count: u32,
    /// Samples per fibre.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(2..))]
    pub points: u32,
    /// CSV output path.
    #[arg(long, value_name = "PATH")]
    #[serde(serialize_with = "file_name")]
    pub out: PathBuf,
    /// SVG of the stereographic picture (S³ only).
    #[arg(long, value_name = "PATH")]
    #[serde(serialize_with = "opt_file_name")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct HopfArgs {
    /// JSON array of points of S³; random points when absent.
    #[arg(long, value_name = "PATH")]
    #[serde(serialize_with = "opt_file_name")]
    pub points: Option<PathBuf>,
    /// Number of random points.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Samples along each fibre for the invariance check.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(2..))]
    pub fibre_samples: u32,
    /// CSV of points and images.
    #[arg(long, value_name = "PATH")]
    #[serde(serialize_with = "opt_file_name")]
    pub out: Option<PathBuf>,
}
