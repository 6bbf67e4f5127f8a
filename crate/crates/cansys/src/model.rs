//! β profiles, Hamiltonians H = β*β, and the pointwise string constraints
//! βJβ* = 0, β′Jβ* = iI with det β₂(0) ≠ 0.

use std::fmt;

use thiserror::Error;

use crate::linalg::{det, eig_herm, ComplexMatrix, C64};

/// Relative floor for |det β₂(0)| against ‖β₂(0)‖^p.
pub const DET_FLOOR: f64 = 1e-8;

/// Residual above which family parameters (skew shift, J-unitary factor) are rejected.
pub const PARAMETER_TOL: f64 = 1e-12;

/// Names of the individual constraints a profile or family parameter can violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// C* = −C for the shift of the shifted-line family.
    SkewShift,
    /// UJU* = J for the right factor of the shifted-line family.
    JUnitaryFactor,
    /// β(x)Jβ(x)* = 0.
    Isotropy,
    /// β′(x)Jβ(x)* = iI.
    Derivative,
    /// det β₂(0) ≠ 0.
    EndpointDeterminant,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::SkewShift => "skew-hermitian shift",
            Constraint::JUnitaryFactor => "j-unitary factor",
            Constraint::Isotropy => "beta J beta* = 0",
            Constraint::Derivative => "beta' J beta* = iI",
            Constraint::EndpointDeterminant => "det beta2(0) != 0",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("constraint violated ({constraint}): residual {residual:e}")]
    ConstraintViolation { constraint: Constraint, residual: f64 },
    #[error("degenerate beta2(0): determinant margin {margin:e} below {DET_FLOOR:e}")]
    DegenerateBeta2 { margin: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Uniform cell-centered grid on [0, r].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    r: f64,
    n: usize,
}

impl Grid {
    pub fn new(r: f64, n: usize) -> Result<Self, ModelError> {
        if !(r.is_finite() && r > 0.0) {
            return Err(ModelError::InvalidGrid(format!("length {r} must be positive")));
        }
        if n < 2 {
            return Err(ModelError::InvalidGrid(format!("cell count {n} must be at least 2")));
        }
        Ok(Self { r, n })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.r / self.n as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h()
    }

    pub fn boundary(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.center(j)).collect()
    }

    /// The first `m` cells as a grid of length m·h.
    pub fn prefix(&self, m: usize) -> Result<Self, ModelError> {
        if m > self.n {
            return Err(ModelError::InvalidGrid(format!("prefix {m} exceeds {} cells", self.n)));
        }
        Self::new(self.boundary(m), m)
    }
}

/// The signature matrix J = [[0, I], [I, 0]].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureJ {
    p: usize,
}

impl SignatureJ {
    pub fn new(p: usize) -> Self {
        Self { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let p = self.p;
        ComplexMatrix::from_fn(2 * p, 2 * p, |i, j| {
            if (i < p && j == i + p) || (i >= p && j + p == i) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

/// J as a dense matrix.
pub fn signature_j(p: usize) -> ComplexMatrix {
    SignatureJ::new(p).matrix()
}

/// Sampled p×2p matrix function β with derivative at the cell centers.
#[derive(Debug, Clone)]
pub struct BetaProfile {
    p: usize,
    grid: Grid,
    beta0: ComplexMatrix,
    beta: Vec<ComplexMatrix>,
    dbeta: Vec<ComplexMatrix>,
}

impl BetaProfile {
    pub fn new(
        p: usize,
        grid: Grid,
        beta0: ComplexMatrix,
        beta: Vec<ComplexMatrix>,
        dbeta: Vec<ComplexMatrix>,
    ) -> Result<Self, ModelError> {
        if p == 0 {
            return Err(ModelError::Dimension("block size must be positive".into()));
        }
        if beta.len() != grid.n() || dbeta.len() != grid.n() {
            return Err(ModelError::Dimension(format!(
                "{} beta and {} dbeta samples for {} cells",
                beta.len(),
                dbeta.len(),
                grid.n()
            )));
        }
        let shape_ok = |m: &ComplexMatrix| m.rows() == p && m.cols() == 2 * p;
        if !shape_ok(&beta0) || !beta.iter().all(shape_ok) || !dbeta.iter().all(shape_ok) {
            return Err(ModelError::Dimension(format!("beta samples must be {p}x{}", 2 * p)));
        }
        Ok(Self { p, grid, beta0, beta, dbeta })
    }

    /// Samples closures for β and β′ at x = 0 and at every cell center.
    pub fn from_fn(
        p: usize,
        grid: Grid,
        beta: impl Fn(f64) -> ComplexMatrix,
        dbeta: impl Fn(f64) -> ComplexMatrix,
    ) -> Result<Self, ModelError> {
        let xs = grid.centers();
        Self::new(p, grid, beta(0.0), xs.iter().map(|&x| beta(x)).collect(), xs.iter().map(|&x| dbeta(x)).collect())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn beta0(&self) -> &ComplexMatrix {
        &self.beta0
    }

    pub fn beta(&self) -> &[ComplexMatrix] {
        &self.beta
    }

    pub fn dbeta(&self) -> &[ComplexMatrix] {
        &self.dbeta
    }

    /// β₂(0), the right p×p block of β(0).
    pub fn beta2_at_zero(&self) -> ComplexMatrix {
        self.beta0.block(0, self.p, self.p, self.p)
    }
}

/// Analytic β families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// β(x) = [ixI + C, I]·U.
    ShiftedLine,
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shifted-line" => Ok(Family::ShiftedLine),
            other => Err(format!("unknown family '{other}'")),
        }
    }
}

/// Samples an analytic family after checking its parameters.
///
/// `shift` must be skew-Hermitian and `right_factor` (identity when `None`)
/// J-unitary; both checks use [`PARAMETER_TOL`].
pub fn make_beta_family(
    kind: Family,
    p: usize,
    shift: &ComplexMatrix,
    right_factor: Option<&ComplexMatrix>,
    grid: Grid,
) -> Result<BetaProfile, ModelError> {
    let Family::ShiftedLine = kind;
    if p == 0 || shift.rows() != p || shift.cols() != p {
        return Err(ModelError::Dimension(format!("shift must be {p}x{p}")));
    }
    let skew = (&shift.adjoint() + shift).norm_op();
    if !(skew <= PARAMETER_TOL) {
        return Err(ModelError::ConstraintViolation { constraint: Constraint::SkewShift, residual: skew });
    }
    let j = signature_j(p);
    let u = match right_factor {
        Some(u) => {
            if u.rows() != 2 * p || u.cols() != 2 * p {
                return Err(ModelError::Dimension(format!("right factor must be {0}x{0}", 2 * p)));
            }
            let res = (&u.matmul(&j).matmul(&u.adjoint()) - &j).norm_op();
            if !(res <= PARAMETER_TOL) {
                return Err(ModelError::ConstraintViolation { constraint: Constraint::JUnitaryFactor, residual: res });
            }
            u.clone()
        }
        None => ComplexMatrix::identity(2 * p),
    };
    let eye = ComplexMatrix::identity(p);
    let beta_at = |x: f64| {
        let left = &eye.scale(C64::new(0.0, x)) + shift;
        ComplexMatrix::hstack(&[left, eye.clone()]).matmul(&u)
    };
    let dbeta = ComplexMatrix::hstack(&[eye.scale(C64::new(0.0, 1.0)), ComplexMatrix::zeros(p, p)]).matmul(&u);
    let profile = BetaProfile::from_fn(p, grid, beta_at, |_| dbeta.clone())?;
    let margin = det_margin(&profile.beta2_at_zero());
    if !(margin >= DET_FLOOR) {
        return Err(ModelError::DegenerateBeta2 { margin });
    }
    Ok(profile)
}

/// |det M| / ‖M‖^p, zero for the zero matrix.
fn det_margin(m: &ComplexMatrix) -> f64 {
    let norm = m.norm_op();
    if norm == 0.0 {
        return 0.0;
    }
    det(m).norm() / norm.powi(m.rows() as i32)
}

/// Result of checking a profile against the string constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub tol: f64,
    /// max_j ‖β(x_j)Jβ(x_j)*‖.
    pub identity_residual: f64,
    pub identity_worst_cell: usize,
    /// max_j ‖β′(x_j)Jβ(x_j)* − iI‖.
    pub derivative_residual: f64,
    pub derivative_worst_cell: usize,
    /// |det β₂(0)| / ‖β₂(0)‖^p.
    pub det_margin: f64,
    pub failed: Vec<Constraint>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.failed.is_empty()
    }
}

pub fn validate_beta(profile: &BetaProfile, tol: f64) -> ValidationReport {
    let p = profile.p();
    let j = signature_j(p);
    let i_eye = ComplexMatrix::identity(p).scale(C64::new(0.0, 1.0));
    let mut identity = (0.0, 0);
    let mut derivative = (0.0, 0);
    for (cell, (b, db)) in profile.beta().iter().zip(profile.dbeta()).enumerate() {
        let bj_adj = j.matmul(&b.adjoint());
        let r1 = b.matmul(&bj_adj).norm_op();
        let r2 = (&db.matmul(&bj_adj) - &i_eye).norm_op();
        // NaN residuals must register as failures.
        if !(r1 <= identity.0) {
            identity = (r1, cell);
        }
        if !(r2 <= derivative.0) {
            derivative = (r2, cell);
        }
    }
    let margin = det_margin(&profile.beta2_at_zero());
    let mut failed = Vec::new();
    if !(identity.0 <= tol) {
        failed.push(Constraint::Isotropy);
    }
    if !(derivative.0 <= tol) {
        failed.push(Constraint::Derivative);
    }
    if !(margin >= DET_FLOOR) {
        failed.push(Constraint::EndpointDeterminant);
    }
    ValidationReport {
        tol,
        identity_residual: identity.0,
        identity_worst_cell: identity.1,
        derivative_residual: derivative.0,
        derivative_worst_cell: derivative.1,
        det_margin: margin,
        failed,
    }
}

/// Hermitian 2p×2p Hamiltonian samples at the cell centers.
#[derive(Debug, Clone)]
pub struct HamiltonianSamples {
    p: usize,
    grid: Grid,
    h: Vec<ComplexMatrix>,
}

impl HamiltonianSamples {
    /// Wraps samples after shape checks; each sample is symmetrized.
    pub fn new(p: usize, grid: Grid, h: Vec<ComplexMatrix>) -> Result<Self, ModelError> {
        if p == 0 || h.len() != grid.n() {
            return Err(ModelError::Dimension(format!("{} samples for {} cells", h.len(), grid.n())));
        }
        if !h.iter().all(|m| m.rows() == 2 * p && m.cols() == 2 * p) {
            return Err(ModelError::Dimension(format!("hamiltonian samples must be {0}x{0}", 2 * p)));
        }
        let h = h.iter().map(ComplexMatrix::hermitian_part).collect();
        Ok(Self { p, grid, h })
    }

    /// Wraps samples that are already exactly Hermitian, bit for bit.
    pub(crate) fn from_exact(p: usize, grid: Grid, h: Vec<ComplexMatrix>) -> Self {
        debug_assert_eq!(h.len(), grid.n());
        Self { p, grid, h }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[ComplexMatrix] {
        &self.h
    }

    /// max_j ‖H(x_j)‖.
    pub fn max_norm(&self) -> f64 {
        self.h.iter().map(ComplexMatrix::norm_op).fold(0.0, f64::max)
    }

    /// The first `m` cells.
    pub fn restrict(&self, m: usize) -> Result<Self, ModelError> {
        let grid = self.grid.prefix(m)?;
        Ok(Self { p: self.p, grid, h: self.h[..m].to_vec() })
    }

    /// Worst relative positivity defect −min_eig(H_j)/‖H_j‖ over cells (≤ 0 when p.s.d.).
    pub fn positivity_defect(&self) -> f64 {
        self.h
            .iter()
            .map(|m| {
                let norm = m.norm_op();
                if norm == 0.0 {
                    0.0
                } else {
                    -eig_herm(m)[0] / norm
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Numerical rank at one cell: eigenvalues above `rel`·‖H_j‖.
    pub fn numerical_rank(&self, cell: usize, rel: f64) -> usize {
        let m = &self.h[cell];
        let norm = m.norm_op();
        eig_herm(m).iter().filter(|&&v| v > rel * norm).count()
    }
}

/// H(x_j) = β(x_j)*β(x_j), symmetrized.
pub fn hamiltonian_from_beta(profile: &BetaProfile) -> HamiltonianSamples {
    let h = profile.beta().iter().map(|b| b.adjoint().matmul(b).hermitian_part()).collect();
    HamiltonianSamples::from_exact(profile.p(), *profile.grid(), h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rot() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(2.0, 4).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.centers(), vec![0.25, 0.75, 1.25, 1.75]);
        assert_eq!(g.boundary(4), 2.0);
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(0.0, 8).is_err());
    }

    #[test]
    fn signature_is_involution() {
        for p in 1..4 {
            let j = signature_j(p);
            assert_eq!(j.matmul(&j), ComplexMatrix::identity(2 * p));
            assert_eq!(j.adjoint(), j);
        }
    }

    #[test]
    fn scalar_shifted_line_samples() {
        let g = Grid::new(1.0, 10).unwrap();
        let prof = make_beta_family(Family::ShiftedLine, 1, &ComplexMatrix::zeros(1, 1), None, g).unwrap();
        let x = g.center(3);
        assert_eq!(prof.beta()[3], ComplexMatrix::from_rows(&[vec![c(0.0, x), c(1.0, 0.0)]]).unwrap());
        let h = hamiltonian_from_beta(&prof);
        let expect =
            ComplexMatrix::from_rows(&[vec![c(x * x, 0.0), c(0.0, -x)], vec![c(0.0, x), c(1.0, 0.0)]]).unwrap();
        assert!((&h.samples()[3] - &expect).norm_max() < 1e-16);
        let report = validate_beta(&prof, 1e-12);
        assert!(report.passes());
        assert!(report.identity_residual <= 1e-14 && report.derivative_residual <= 1e-14);
    }

    #[test]
    fn two_block_skew_family_has_rank_two() {
        let g = Grid::new(1.0, 16).unwrap();
        let prof = make_beta_family(Family::ShiftedLine, 2, &rot(), None, g).unwrap();
        assert_eq!(prof.beta2_at_zero(), ComplexMatrix::identity(2));
        let report = validate_beta(&prof, 1e-12);
        assert!(report.passes() && report.identity_residual <= 1e-14);
        let h = hamiltonian_from_beta(&prof);
        for cell in 0..16 {
            assert_eq!(h.numerical_rank(cell, 1e-8), 2);
        }
    }

    #[test]
    fn rejects_non_skew_shift() {
        let g = Grid::new(1.0, 8).unwrap();
        let bad = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let err = make_beta_family(Family::ShiftedLine, 2, &bad, None, g).unwrap_err();
        assert!(matches!(err, ModelError::ConstraintViolation { constraint: Constraint::SkewShift, .. }));
    }

    #[test]
    fn rejects_non_j_unitary_factor() {
        let g = Grid::new(1.0, 8).unwrap();
        let u = ComplexMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap();
        let err = make_beta_family(Family::ShiftedLine, 1, &ComplexMatrix::zeros(1, 1), Some(&u), g).unwrap_err();
        assert!(matches!(err, ModelError::ConstraintViolation { constraint: Constraint::JUnitaryFactor, .. }));
    }

    #[test]
    fn factor_killing_beta2_is_degenerate() {
        // U = J is J-unitary and swaps the blocks, so β₂(0) = C = 0.
        let g = Grid::new(1.0, 8).unwrap();
        let err =
            make_beta_family(Family::ShiftedLine, 1, &ComplexMatrix::zeros(1, 1), Some(&signature_j(1)), g)
                .unwrap_err();
        assert!(matches!(err, ModelError::DegenerateBeta2 { .. }));
    }

    #[test]
    fn constant_profile_fails_derivative() {
        let g = Grid::new(1.0, 8).unwrap();
        let zero = ComplexMatrix::zeros(1, 2);
        let prof = BetaProfile::from_fn(
            1,
            g,
            |_| ComplexMatrix::from_real_rows(&[&[0.0, 1.0]]).unwrap(),
            |_| zero.clone(),
        )
        .unwrap();
        let report = validate_beta(&prof, 1e-12);
        assert_eq!(report.failed, vec![Constraint::Derivative]);
    }

    #[test]
    fn vanishing_beta2_fails_determinant() {
        let g = Grid::new(1.0, 8).unwrap();
        let prof = BetaProfile::from_fn(
            1,
            g,
            |x| ComplexMatrix::from_rows(&[vec![c(0.0, x), c(x, 0.0)]]).unwrap(),
            |_| ComplexMatrix::from_rows(&[vec![c(0.0, 1.0), c(1.0, 0.0)]]).unwrap(),
        )
        .unwrap();
        let report = validate_beta(&prof, 1e-12);
        assert!(report.failed.contains(&Constraint::EndpointDeterminant));
        assert_eq!(report.det_margin, 0.0);
    }

    #[test]
    fn restrict_keeps_prefix() {
        let g = Grid::new(1.0, 10).unwrap();
        let prof = make_beta_family(Family::ShiftedLine, 1, &ComplexMatrix::zeros(1, 1), None, g).unwrap();
        let h = hamiltonian_from_beta(&prof).restrict(5).unwrap();
        assert_eq!(h.grid().n(), 5);
        assert!((h.grid().r() - 0.5).abs() < 1e-15);
    }
}
