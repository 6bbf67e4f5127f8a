//! Command implementations behind the `cansys` binary.

pub mod formats;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cansys::direct::Integrator;
use cansys::herglotz::HerglotzData;
use cansys::inverse::{assemble_snode_with, TailCompletion};
use cansys::linalg::{ComplexMatrix, CholeskyFactor};
use cansys::model::{make_beta_family, validate_beta, Constraint, Family, Grid, ModelError};
use cansys::pipeline::{self, LambdaSweep, PipelineConfig, PipelineError, Tolerances};
use cansys::weyl::{default_pair, herglotz_defect, make_pair, weyl_sweep, PropertyJPair};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use formats::*;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl CliError {
    /// 1 for usage, input and validation failures, 2 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Pipeline(e) if !e.is_validation() => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Input(_) => "InvalidInput",
            CliError::Io(_) => "IoError",
            CliError::Pipeline(e) => e.kind(),
        }
    }

    /// Machine-readable error object written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() } })
    }
}

#[derive(Debug, Parser)]
#[command(name = "cansys", version, about = "Direct and inverse spectral problems for canonical systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a β family on a grid and write beta.json.
    MakeBeta(MakeBetaArgs),
    /// Weyl function on the Stieltjes line plus φ(i); writes weyl.json.
    Direct(DirectArgs),
    /// Stieltjes inversion of weyl.json; writes measure.json.
    Herglotz(HerglotzArgs),
    /// Recover the Hamiltonian from measure.json; writes hamiltonian.json.
    Invert(InvertArgs),
    /// Full pipeline from beta.json; writes report.json.
    Roundtrip(RoundtripArgs),
    /// Assemble the S-node from measure.json and report its residuals.
    CheckSnode(CheckSnodeArgs),
}

#[derive(Debug, Args)]
pub struct MakeBetaArgs {
    #[arg(long, default_value = "shifted-line")]
    pub family: String,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Skew-Hermitian shift C as a matrix literal, e.g. "[[0,1],[-1,0]]"; zero by default.
    #[arg(long)]
    pub skew: Option<String>,
    /// J-unitary right factor U (2p×2p literal); identity by default.
    #[arg(long)]
    pub right_factor: Option<String>,
    #[arg(long, short, default_value = "beta.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    /// Property-J pair: "0I" for {0, I}, "II" for {I, I}, or "custom" with --p1/--p2.
    #[arg(long, default_value = "0I")]
    pub pair: String,
    #[arg(long)]
    pub p1: Option<String>,
    #[arg(long)]
    pub p2: Option<String>,
}

impl PairArgs {
    fn build(&self, p: usize) -> Result<PropertyJPair, CliError> {
        let pair = match self.pair.as_str() {
            "0I" => return Ok(default_pair(p)),
            "II" => make_pair(ComplexMatrix::identity(p), ComplexMatrix::identity(p)),
            "custom" => {
                let get = |s: &Option<String>, name: &str| {
                    s.as_deref().ok_or_else(|| CliError::Usage(format!("--pair custom needs --{name}"))).and_then(parse_matrix_literal)
                };
                make_pair(get(&self.p1, "p1")?, get(&self.p2, "p2")?)
            }
            other => return Err(CliError::Usage(format!("unknown pair '{other}' (expected 0I, II or custom)"))),
        };
        pair.map_err(|e| CliError::Pipeline(e.into()))
    }
}

/// Stieltjes line and λ sweep settings.
#[derive(Debug, Clone, Args)]
pub struct LineArgs {
    /// Height of the Stieltjes line Im λ = y.
    #[arg(long, default_value_t = 1e-2)]
    pub y: f64,
    #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
    pub t_min: f64,
    #[arg(long, default_value_t = 100.0, allow_hyphen_values = true)]
    pub t_max: f64,
    /// Points on the Stieltjes line; spacing must not exceed y.
    #[arg(long, alias = "lambda-count", default_value_t = 20001)]
    pub t_count: usize,
    /// Points in the Herglotz λ sweep.
    #[arg(long, default_value_t = 100)]
    pub sweep_count: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sweep_min_abs: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sweep_max_abs: f64,
}

#[derive(Debug, Clone, Args)]
pub struct InversionArgs {
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Tail model beyond the window: lattice or none.
    #[arg(long, default_value = "lattice")]
    pub completion: String,
}

impl InversionArgs {
    fn completion(&self) -> Result<TailCompletion, CliError> {
        self.completion.parse().map_err(CliError::Usage)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ToleranceArgs {
    #[arg(long, default_value_t = 1e-12)]
    pub tol_validation: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol_node: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tol_roundtrip: f64,
    /// Relative trace floor below which Stieltjes masses are dropped.
    #[arg(long, default_value_t = 1e-4)]
    pub prune_floor: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DirectArgs {
    #[arg(long, default_value = "beta.json")]
    pub beta: PathBuf,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub line: LineArgs,
    #[arg(long, default_value_t = 1e-12)]
    pub tol_validation: f64,
    #[arg(long, short, default_value = "weyl.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HerglotzArgs {
    #[arg(long, default_value = "weyl.json")]
    pub weyl: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    pub prune_floor: f64,
    #[arg(long, short, default_value = "measure.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long, default_value = "measure.json")]
    pub measure: PathBuf,
    #[command(flatten)]
    pub inversion: InversionArgs,
    #[arg(long, short, default_value = "hamiltonian.json")]
    pub out: PathBuf,
    /// Optional report with node and recovery residuals.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[arg(long, default_value = "beta.json")]
    pub beta: PathBuf,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub line: LineArgs,
    #[arg(long, default_value = "lattice")]
    pub completion: String,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
    #[arg(long, short, default_value = "report.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub measure_out: Option<PathBuf>,
    #[arg(long)]
    pub hamiltonian_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckSnodeArgs {
    #[arg(long, default_value = "measure.json")]
    pub measure: PathBuf,
    #[command(flatten)]
    pub inversion: InversionArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub tol_node: f64,
    #[arg(long, short, default_value = "report.json")]
    pub out: PathBuf,
}

/// Runs one command and returns the summary printed on stdout.
pub fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    match cli.command {
        Command::MakeBeta(a) => cmd_make_beta(&a),
        Command::Direct(a) => cmd_direct(&a),
        Command::Herglotz(a) => cmd_herglotz(&a),
        Command::Invert(a) => cmd_invert(&a),
        Command::Roundtrip(a) => cmd_roundtrip(&a),
        Command::CheckSnode(a) => cmd_check_snode(&a),
    }
}

fn written(path: &Path, extra: serde_json::Value) -> serde_json::Value {
    let mut v = json!({ "written": path.display().to_string() });
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}

pub fn cmd_make_beta(a: &MakeBetaArgs) -> Result<serde_json::Value, CliError> {
    let family: Family = a.family.parse().map_err(CliError::Usage)?;
    let grid = Grid::new(a.r, a.n)?;
    let shift = match &a.skew {
        Some(s) => parse_matrix_literal(s)?,
        None => ComplexMatrix::zeros(a.p.max(1), a.p.max(1)),
    };
    let right = a.right_factor.as_deref().map(parse_matrix_literal).transpose()?;
    let profile = make_beta_family(family, a.p, &shift, right.as_ref(), grid)?;
    let report = validate_beta(&profile, 1e-12);
    write_json(&a.out, &BetaFile::from_profile(&profile))?;
    Ok(written(&a.out, json!({ "identity_residual": report.identity_residual, "derivative_residual": report.derivative_residual })))
}

fn line_config(p: usize, line: &LineArgs) -> PipelineConfig {
    PipelineConfig {
        p,
        y: line.y,
        t_window: (line.t_min, line.t_max),
        t_count: line.t_count,
        lambda_sweep: LambdaSweep { count: line.sweep_count, min_abs: line.sweep_min_abs, max_abs: line.sweep_max_abs },
        ..PipelineConfig::default()
    }
}

fn load_validated_beta(path: &Path, tol: f64) -> Result<cansys::model::BetaProfile, CliError> {
    let profile = read_json::<BetaFile>(path)?.to_profile()?;
    let report = validate_beta(&profile, tol);
    if let Some(&constraint) = report.failed.first() {
        return Err(match constraint {
            Constraint::Isotropy => ModelError::ConstraintViolation { constraint, residual: report.identity_residual },
            Constraint::Derivative => ModelError::ConstraintViolation { constraint, residual: report.derivative_residual },
            _ => ModelError::DegenerateBeta2 { margin: report.det_margin },
        }
        .into());
    }
    Ok(profile)
}

pub fn cmd_direct(a: &DirectArgs) -> Result<serde_json::Value, CliError> {
    let profile = load_validated_beta(&a.beta, a.tol_validation)?;
    let cfg = PipelineConfig { r: profile.grid().r(), n: profile.grid().n(), ..line_config(profile.p(), &a.line) };
    cfg.validate()?;
    let pair = a.pair.build(profile.p())?;
    let h = cansys::model::hamiltonian_from_beta(&profile);
    let weyl = pipeline::weyl_data(&h, &pair, &cfg)?;
    let integ = Integrator::new(&h);
    let sweep = weyl_sweep(&integ, &pair, &cfg.lambda_sweep.points()).map_err(PipelineError::from)?;
    let defect = herglotz_defect(&sweep);
    write_json(&a.out, &WeylFile::new(weyl.y, &weyl.samples, &weyl.anchor_phi_at_i))?;
    Ok(written(&a.out, json!({ "herglotz_defect": defect, "line_herglotz_defect": herglotz_defect(&weyl.samples) })))
}

pub fn cmd_herglotz(a: &HerglotzArgs) -> Result<serde_json::Value, CliError> {
    if !(a.prune_floor >= 0.0) {
        return Err(CliError::Usage("--prune-floor must be non-negative".into()));
    }
    let file: WeylFile = read_json(&a.weyl)?;
    let (samples, anchor) = file.samples()?;
    let weyl = pipeline::WeylData { y: file.y, samples, anchor_phi_at_i: anchor };
    let data = pipeline::herglotz_data(&weyl, a.prune_floor)?;
    write_json(&a.out, &MeasureFile::from_data(&data))?;
    let tau = data.tau();
    Ok(written(
        &a.out,
        json!({ "masses": tau.len(), "captured_fraction": tau.captured_fraction(), "clip_magnitude": tau.clip_magnitude() }),
    ))
}

fn node_residuals(node: &cansys::inverse::SNode) -> BTreeMap<String, f64> {
    let mut r = BTreeMap::new();
    r.insert("identity_residual".into(), node.identity_residual());
    r.insert("identity_relative".into(), node.relative_identity_residual());
    r.insert("s_norm".into(), node.s().norm_op());
    r
}

pub fn cmd_invert(a: &InvertArgs) -> Result<serde_json::Value, CliError> {
    let completion = a.inversion.completion()?;
    let grid = Grid::new(a.inversion.r, a.inversion.n)?;
    let data: HerglotzData = read_json::<MeasureFile>(&a.measure)?.to_data()?;
    let (node, recovery) = pipeline::invert(&data, grid, completion)?;
    let h = &recovery.hamiltonian;
    write_json(&a.out, &HamiltonianFile::from_samples(h))?;
    let mut residuals = node_residuals(&node);
    residuals.insert("recovered_positivity_defect".into(), h.positivity_defect().max(0.0));
    if let Some(path) = &a.report {
        let config = json!({ "r": grid.r(), "n": grid.n(), "completion": a.inversion.completion });
        write_json(path, &ReportFile::new(config, residuals.clone(), Vec::new()))?;
    }
    Ok(written(&a.out, json!({ "residuals": residuals })))
}

fn config_json(cfg: &PipelineConfig, completion: &str, pair: &str) -> serde_json::Value {
    json!({
        "p": cfg.p,
        "r": cfg.r,
        "n": cfg.n,
        "pair": pair,
        "lambda_sweep": { "count": cfg.lambda_sweep.count, "min_abs": cfg.lambda_sweep.min_abs, "max_abs": cfg.lambda_sweep.max_abs },
        "inversion_height": cfg.y,
        "t_window": [cfg.t_window.0, cfg.t_window.1],
        "t_count": cfg.t_count,
        "prune_floor": cfg.prune_floor,
        "completion": completion,
        "interior": [cfg.interior.0, cfg.interior.1],
        "tolerances": { "validation": cfg.tolerances.validation, "node": cfg.tolerances.node, "roundtrip": cfg.tolerances.roundtrip },
        "seed": cfg.seed,
    })
}

pub fn cmd_roundtrip(a: &RoundtripArgs) -> Result<serde_json::Value, CliError> {
    let completion: TailCompletion = a.completion.parse().map_err(CliError::Usage)?;
    let t = &a.tolerances;
    let profile = load_validated_beta(&a.beta, t.tol_validation)?;
    let cfg = PipelineConfig {
        r: profile.grid().r(),
        n: profile.grid().n(),
        prune_floor: t.prune_floor,
        completion,
        tolerances: Tolerances { validation: t.tol_validation, node: t.tol_node, roundtrip: t.tol_roundtrip },
        seed: t.seed,
        ..line_config(profile.p(), &a.line)
    };
    cfg.validate()?;
    let pair = a.pair.build(profile.p())?;
    let rt = pipeline::roundtrip(&profile, &pair, &cfg)?;
    let residuals = pipeline::residuals(&profile, &pair, &rt, &cfg)?;
    let grid = *profile.grid();
    let curve = (0..grid.n())
        .map(|j| CurvePoint {
            x: grid.center(j),
            error: rt.error_curve[j],
            truth_norm: rt.truth.samples()[j].norm_op(),
            recovered_norm: rt.recovered().samples()[j].norm_op(),
        })
        .collect();
    if let Some(path) = &a.measure_out {
        write_json(path, &MeasureFile::from_data(&rt.data))?;
    }
    if let Some(path) = &a.hamiltonian_out {
        write_json(path, &HamiltonianFile::from_samples(rt.recovered()))?;
    }
    let passed = rt.interior_error <= cfg.tolerances.roundtrip && rt.node.relative_identity_residual() <= cfg.tolerances.node;
    write_json(&a.out, &ReportFile::new(config_json(&cfg, &a.completion, &a.pair.pair), residuals, curve))?;
    Ok(written(&a.out, json!({ "interior_relative_error": rt.interior_error, "within_tolerance": passed })))
}

pub fn cmd_check_snode(a: &CheckSnodeArgs) -> Result<serde_json::Value, CliError> {
    let completion = a.inversion.completion()?;
    if !(a.tol_node > 0.0) {
        return Err(CliError::Usage("--tol-node must be positive".into()));
    }
    let grid = Grid::new(a.inversion.r, a.inversion.n)?;
    let data: HerglotzData = read_json::<MeasureFile>(&a.measure)?.to_data()?;
    let node = assemble_snode_with(&data, grid, data.p(), completion).map_err(PipelineError::from)?;
    let mut residuals = node_residuals(&node);
    let factor = CholeskyFactor::factor(node.s());
    residuals.insert("cholesky_ok".into(), if factor.is_ok() { 1.0 } else { 0.0 });
    if let Ok(f) = &factor {
        let min_pivot = (0..f.order()).map(|i| f.entry(i, i).re).fold(f64::INFINITY, f64::min);
        residuals.insert("min_cholesky_pivot".into(), min_pivot);
    }
    let within = node.relative_identity_residual() <= a.tol_node;
    let config = json!({ "r": grid.r(), "n": grid.n(), "completion": a.inversion.completion, "tol_node": a.tol_node });
    write_json(&a.out, &ReportFile::new(config, residuals.clone(), Vec::new()))?;
    Ok(written(&a.out, json!({ "residuals": residuals, "within_tolerance": within })))
}
