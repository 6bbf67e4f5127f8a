//! End-to-end orchestration: β profile → Weyl samples → Herglotz data →
//! S-node → recovered Hamiltonian, with the diagnostics the reports carry.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::direct::{j_unitarity_residual, DirectError, Integrator};
use crate::discretize::{op_A, op_integration};
use crate::herglotz::{extract_nu, stieltjes_invert, stieltjes_line, HerglotzData, HerglotzError};
use crate::inverse::{assemble_snode_with, recover, transfer_matrix, InverseError, Recovery, SNode, TailCompletion};
use crate::linalg::{ComplexMatrix, C64};
use crate::model::{hamiltonian_from_beta, Constraint, validate_beta, BetaProfile, Grid, HamiltonianSamples, ModelError};
use crate::weyl::{herglotz_defect, weyl_function, weyl_sweep, PropertyJPair, WeylError, WeylSamples};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Direct(#[from] DirectError),
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error(transparent)]
    Herglotz(#[from] HerglotzError),
    #[error(transparent)]
    Inverse(#[from] InverseError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl PipelineError {
    /// True for input and validation failures, false for numerical ones.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Model(_) | PipelineError::Config(_) => true,
            PipelineError::Direct(_) => false,
            PipelineError::Weyl(e) => matches!(
                e,
                WeylError::PairViolation { .. } | WeylError::Dimension(_) | WeylError::NotUpperHalfPlane { .. }
            ),
            PipelineError::Herglotz(e) => matches!(
                e,
                HerglotzError::InvalidMeasure(_)
                    | HerglotzError::MixedHeights { .. }
                    | HerglotzError::NonUniformGrid { .. }
                    | HerglotzError::ResolutionTooCoarse { .. }
                    | HerglotzError::TooFewSamples(_)
            ),
            PipelineError::Inverse(e) => matches!(e, InverseError::Dimension(_) | InverseError::BoundaryOutOfRange { .. }),
        }
    }

    /// Stable machine-readable name of the failure.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Model(ModelError::ConstraintViolation { .. }) => "ConstraintViolation",
            PipelineError::Model(ModelError::DegenerateBeta2 { .. }) => "DegenerateBeta2",
            PipelineError::Model(_) => "InvalidModel",
            PipelineError::Direct(DirectError::GrowthOverflow { .. }) => "GrowthOverflow",
            PipelineError::Weyl(WeylError::PairViolation { .. }) => "PairViolation",
            PipelineError::Weyl(WeylError::DenominatorSingular { .. }) => "DenominatorSingular",
            PipelineError::Weyl(WeylError::Direct(_)) => "GrowthOverflow",
            PipelineError::Weyl(_) => "InvalidWeylData",
            PipelineError::Herglotz(HerglotzError::WindowTooSmall { .. }) => "WindowTooSmall",
            PipelineError::Herglotz(HerglotzError::PoleHit { .. }) => "PoleHit",
            PipelineError::Herglotz(HerglotzError::NotHerglotz { .. }) => "NotHerglotz",
            PipelineError::Herglotz(_) => "InvalidSamples",
            PipelineError::Inverse(InverseError::NodeDegenerate(_)) => "NodeDegenerate",
            PipelineError::Inverse(InverseError::PositivityFailure { .. }) => "PositivityFailure",
            PipelineError::Inverse(InverseError::WindowTooSmallForCompletion { .. }) => "WindowTooSmall",
            PipelineError::Inverse(InverseError::Direct(_)) => "GrowthOverflow",
            PipelineError::Inverse(_) => "InvalidInverseInput",
            PipelineError::Config(_) => "InvalidConfig",
        }
    }
}

/// Tolerances checked by the round trip report.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// β constraint residuals.
    pub validation: f64,
    /// Node identity relative to ‖S‖.
    pub node: f64,
    /// Interior relative error of the recovered Hamiltonian.
    pub roundtrip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { validation: 1e-12, node: 1e-3, roundtrip: 0.05 }
    }
}

/// λ points for Herglotz sweeps: radii log-spaced in [min_abs, max_abs],
/// arguments spread over (0, π) by the golden ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSweep {
    pub count: usize,
    pub min_abs: f64,
    pub max_abs: f64,
}

impl Default for LambdaSweep {
    fn default() -> Self {
        Self { count: 100, min_abs: 0.1, max_abs: 10.0 }
    }
}

impl LambdaSweep {
    pub fn points(&self) -> Vec<C64> {
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        let span = if self.count > 1 { (self.count - 1) as f64 } else { 1.0 };
        (0..self.count)
            .map(|k| {
                let rho = self.min_abs * (self.max_abs / self.min_abs).powf(k as f64 / span);
                let frac = ((k as f64 + 0.5) * golden).fract();
                let theta = std::f64::consts::PI * (0.02 + 0.96 * frac);
                C64::from_polar(rho, theta)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub p: usize,
    pub r: f64,
    pub n: usize,
    pub lambda_sweep: LambdaSweep,
    /// Height of the Stieltjes line.
    pub y: f64,
    pub t_window: (f64, f64),
    /// Samples on the Stieltjes line; spacing must not exceed y.
    pub t_count: usize,
    /// Relative trace floor below which Stieltjes masses are dropped.
    pub prune_floor: f64,
    pub completion: TailCompletion,
    /// Interior of [0, r] where recovery errors are measured, as fractions of r.
    pub interior: (f64, f64),
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            p: 1,
            r: 1.0,
            n: 400,
            lambda_sweep: LambdaSweep::default(),
            y: 1e-2,
            t_window: (-100.0, 100.0),
            t_count: 20001,
            prune_floor: 1e-4,
            completion: TailCompletion::Lattice,
            interior: (0.05, 0.95),
            tolerances: Tolerances::default(),
            seed: 7,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.p == 0 {
            return bad("p must be at least 1".into());
        }
        if self.n < 2 || self.t_count < 2 || self.lambda_sweep.count < 2 {
            return bad("counts must be at least 2".into());
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("r = {} must be positive", self.r));
        }
        if !(self.y > 0.0) {
            return bad(format!("inversion height {} must be positive", self.y));
        }
        if !(self.t_window.0 < self.t_window.1) {
            return bad(format!("window [{}, {}] is empty", self.t_window.0, self.t_window.1));
        }
        if !(self.lambda_sweep.min_abs > 0.0 && self.lambda_sweep.min_abs <= self.lambda_sweep.max_abs) {
            return bad("lambda sweep radii must satisfy 0 < min <= max".into());
        }
        let t = &self.tolerances;
        if !(t.validation > 0.0 && t.node > 0.0 && t.roundtrip > 0.0 && self.prune_floor >= 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(0.0 <= self.interior.0 && self.interior.0 < self.interior.1 && self.interior.1 <= 1.0) {
            return bad("interior must be a subinterval of [0, 1]".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, PipelineError> {
        Ok(Grid::new(self.r, self.n)?)
    }
}

/// Weyl samples on the Stieltjes line plus the anchor value φ(i).
#[derive(Debug, Clone)]
pub struct WeylData {
    pub y: f64,
    pub samples: WeylSamples,
    pub anchor_phi_at_i: ComplexMatrix,
}

pub fn weyl_data(h: &HamiltonianSamples, pair: &PropertyJPair, cfg: &PipelineConfig) -> Result<WeylData, PipelineError> {
    let integ = Integrator::new(h);
    let points = stieltjes_line(cfg.y, cfg.t_window, cfg.t_count);
    let samples = weyl_sweep(&integ, pair, &points)?;
    let anchor_phi_at_i = weyl_function(&integ, pair, C64::new(0.0, 1.0))?;
    Ok(WeylData { y: cfg.y, samples, anchor_phi_at_i })
}

/// Stieltjes inversion, pruning and ν extraction.
pub fn herglotz_data(weyl: &WeylData, prune_floor: f64) -> Result<HerglotzData, PipelineError> {
    let measure = stieltjes_invert(&weyl.samples)?;
    let (pruned, _) = measure.prune(prune_floor);
    Ok(HerglotzData::new(extract_nu(&weyl.anchor_phi_at_i), pruned)?)
}

pub fn invert(data: &HerglotzData, grid: Grid, completion: TailCompletion) -> Result<(SNode, Recovery), PipelineError> {
    let node = assemble_snode_with(data, grid, data.p(), completion)?;
    let recovery = recover(&node)?;
    Ok((node, recovery))
}

/// Cells whose centers lie in [lo·r, hi·r].
pub fn interior_cells(grid: &Grid, interior: (f64, f64)) -> std::ops::Range<usize> {
    let r = grid.r();
    let cells: Vec<usize> =
        (0..grid.n()).filter(|&j| grid.center(j) >= interior.0 * r && grid.center(j) <= interior.1 * r).collect();
    match (cells.first(), cells.last()) {
        (Some(&a), Some(&b)) => a..b + 1,
        _ => 0..0,
    }
}

/// Per-cell ‖Ĥ(x_j) − H(x_j)‖.
pub fn error_curve(truth: &HamiltonianSamples, recovered: &HamiltonianSamples) -> Vec<f64> {
    truth.samples().iter().zip(recovered.samples()).map(|(a, b)| (a - b).norm_op()).collect()
}

/// max over interior cells of ‖Ĥ − H‖, divided by max_j ‖H(x_j)‖.
pub fn interior_relative_error(truth: &HamiltonianSamples, recovered: &HamiltonianSamples, interior: (f64, f64)) -> f64 {
    let curve = error_curve(truth, recovered);
    let worst = interior_cells(truth.grid(), interior).map(|j| curve[j]).fold(0.0, f64::max);
    worst / truth.max_norm()
}

/// Everything produced by one round trip.
#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub truth: HamiltonianSamples,
    pub weyl: WeylData,
    pub data: HerglotzData,
    pub node: SNode,
    pub recovery: Recovery,
    pub error_curve: Vec<f64>,
    pub interior_error: f64,
}

impl RoundTrip {
    pub fn recovered(&self) -> &HamiltonianSamples {
        &self.recovery.hamiltonian
    }
}

pub fn roundtrip(profile: &BetaProfile, pair: &PropertyJPair, cfg: &PipelineConfig) -> Result<RoundTrip, PipelineError> {
    cfg.validate()?;
    let report = validate_beta(profile, cfg.tolerances.validation);
    if let Some(&constraint) = report.failed.first() {
        let residual = match constraint {
            Constraint::Isotropy => report.identity_residual,
            Constraint::Derivative => report.derivative_residual,
            _ => return Err(ModelError::DegenerateBeta2 { margin: report.det_margin }.into()),
        };
        return Err(ModelError::ConstraintViolation { constraint, residual }.into());
    }
    let truth = hamiltonian_from_beta(profile);
    let weyl = weyl_data(&truth, pair, cfg)?;
    let data = herglotz_data(&weyl, cfg.prune_floor)?;
    let (node, recovery) = invert(&data, *profile.grid(), cfg.completion)?;
    let error_curve = error_curve(&truth, &recovery.hamiltonian);
    let interior_error = interior_relative_error(&truth, &recovery.hamiltonian, cfg.interior);
    Ok(RoundTrip { truth, weyl, data, node, recovery, error_curve, interior_error })
}

/// Largest ‖W(ℓ, λ) − w_A(ℓ, 1/λ)‖ over ℓ ∈ {n/2, n} and λ ∈ {1, i, 1+i},
/// with W integrated on the recovered Hamiltonian.
pub fn transfer_cross_check(node: &SNode, recovered: &HamiltonianSamples) -> Result<f64, PipelineError> {
    let integ = Integrator::new(recovered);
    let n = node.grid().n();
    let mut worst: f64 = 0.0;
    for lambda in [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(1.0, 1.0)] {
        let sol = integ.solve(lambda)?;
        for ell in [n / 2, n] {
            let wa = transfer_matrix(node, ell, C64::new(1.0, 0.0) / lambda)?;
            worst = worst.max((sol.at_boundary(ell) - &wa).norm_op());
        }
    }
    Ok(worst)
}

/// Named residuals for the round trip report.
pub fn residuals(profile: &BetaProfile, pair: &PropertyJPair, rt: &RoundTrip, cfg: &PipelineConfig) -> Result<BTreeMap<String, f64>, PipelineError> {
    let mut out = BTreeMap::new();
    let report = validate_beta(profile, cfg.tolerances.validation);
    out.insert("beta_identity_residual".into(), report.identity_residual);
    out.insert("beta_derivative_residual".into(), report.derivative_residual);
    out.insert("beta_det_margin".into(), report.det_margin);
    let grid = *profile.grid();
    let integration = op_integration(grid, 1);
    let square = integration.matrix().matmul(integration.matrix());
    out.insert("a_square_defect".into(), (op_A(grid, 1).matrix() - &square).norm_op());
    for (name, lambda) in [("1", C64::new(1.0, 0.0)), ("i", C64::new(0.0, 1.0)), ("1+i", C64::new(1.0, 1.0))] {
        out.insert(format!("j_unitarity_{name}"), j_unitarity_residual(&rt.truth, lambda));
    }
    let integ = Integrator::new(&rt.truth);
    let sweep = weyl_sweep(&integ, pair, &cfg.lambda_sweep.points())?;
    out.insert("herglotz_defect".into(), herglotz_defect(&sweep));
    out.insert("line_herglotz_defect".into(), herglotz_defect(&rt.weyl.samples));
    out.insert("captured_fraction".into(), rt.data.tau().captured_fraction());
    out.insert("clip_magnitude".into(), rt.data.tau().clip_magnitude());
    out.insert("mass_count".into(), rt.data.tau().len() as f64);
    out.insert("node_identity_residual".into(), rt.node.identity_residual());
    out.insert("node_identity_relative".into(), rt.node.relative_identity_residual());
    out.insert("interior_relative_error".into(), rt.interior_error);
    out.insert("transfer_cross_check".into(), transfer_cross_check(&rt.node, rt.recovered())?);
    out.insert("recovered_positivity_defect".into(), rt.recovered().positivity_defect().max(0.0));
    Ok(out)
}
