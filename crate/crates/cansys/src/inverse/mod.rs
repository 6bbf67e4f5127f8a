//! Inverse problem: the S-node (A, S, Π) assembled from Herglotz data,
//! Hamiltonian recovery from nested Cholesky factors, the transfer matrix,
//! and the spectral isometry check.
//!
//! Node algebra lives in h-weighted coordinates: the adjoint of Π is hΠ*,
//! so the node identity reads AS − SA* = i·h·ΠJΠ*. This is the only place
//! the quadrature weight enters.

mod completion;
mod isometry;
mod recovery;

pub use completion::{estimate_lattice_reference, LatticeReference, TailCompletion};
pub use isometry::{spectral_isometry_defect, spectral_isometry_defect_with, ISOMETRY_TAIL_SPAN};
pub use recovery::{recover, recover_hamiltonian, transfer_matrix, Recovery};

use thiserror::Error;

use crate::discretize::{double_integration_resolvent, op_A, resolvent_apply, GridOperator, OperatorKind};
use crate::herglotz::HerglotzData;
use crate::linalg::{ComplexMatrix, LinalgError, C64, CholeskyFactor};
use crate::model::{signature_j, Grid, SignatureJ};

/// Masses per GEMM panel in the S accumulation.
const PANEL: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InverseError {
    #[error("S-node degenerate: S is not positive definite ({0})")]
    NodeDegenerate(LinalgError),
    #[error("S loses definiteness at boundary {boundary}: {source}")]
    PositivityFailure { boundary: usize, source: LinalgError },
    #[error("transfer matrix needs a nonzero spectral parameter")]
    LambdaZero,
    #[error("boundary index {ell} outside 1..={n}")]
    BoundaryOutOfRange { ell: usize, n: usize },
    #[error("window upper edge {t_max} below {needed}, too small for tail completion")]
    WindowTooSmallForCompletion { t_max: f64, needed: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Direct(#[from] crate::direct::DirectError),
}

/// Discretized S-node with Φ₂ fixed to stacked identities.
#[derive(Debug, Clone)]
pub struct SNode {
    grid: Grid,
    p: usize,
    a: GridOperator,
    s: ComplexMatrix,
    phi1: ComplexMatrix,
    j: SignatureJ,
    identity_residual: f64,
}

impl SNode {
    /// Builds a node from its parts and caches the identity residual.
    pub fn from_parts(a: GridOperator, s: ComplexMatrix, phi1: ComplexMatrix) -> Result<Self, InverseError> {
        let grid = *a.grid();
        let p = a.p();
        let np = grid.n() * p;
        if s.rows() != np || s.cols() != np || phi1.rows() != np || phi1.cols() != p {
            return Err(InverseError::Dimension(format!("node blocks must be {np}x{np} and {np}x{p}")));
        }
        let mut node = Self { grid, p, a, s: s.hermitian_part(), phi1, j: SignatureJ::new(p), identity_residual: 0.0 };
        node.identity_residual = node.compute_identity_residual();
        Ok(node)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn a(&self) -> &GridOperator {
        &self.a
    }

    pub fn s(&self) -> &ComplexMatrix {
        &self.s
    }

    pub fn phi1(&self) -> &ComplexMatrix {
        &self.phi1
    }

    pub fn signature(&self) -> SignatureJ {
        self.j
    }

    /// Stacked identity blocks.
    pub fn phi2(&self) -> ComplexMatrix {
        stacked_identity(self.grid.n(), self.p)
    }

    /// Π = [Φ₁ Φ₂].
    pub fn pi(&self) -> ComplexMatrix {
        ComplexMatrix::hstack(&[self.phi1.clone(), self.phi2()])
    }

    /// ‖AS − SA* − i·h·ΠJΠ*‖ (operator norm).
    pub fn identity_residual(&self) -> f64 {
        self.identity_residual
    }

    /// identity_residual / ‖S‖.
    pub fn relative_identity_residual(&self) -> f64 {
        self.identity_residual / self.s.norm_op()
    }

    fn compute_identity_residual(&self) -> f64 {
        let a = self.a.matrix();
        let pi = self.pi();
        let as_ = a.matmul(&self.s);
        let rhs = pi.matmul(&signature_j(self.p)).matmul(&pi.adjoint()).scale(C64::new(0.0, self.grid.h()));
        (&(&as_ - &as_.adjoint()) - &rhs).norm_op()
    }
}

pub(crate) fn stacked_identity(n: usize, p: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n * p, p, |i, c| if i % p == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Running sums of the S and Φ₁ contributions of a list of signed masses.
pub(crate) struct NodeSums {
    pub s: ComplexMatrix,
    pub phi1: ComplexMatrix,
}

/// Adds h·Σ R(t)Φ₂wΦ₂*R(t)* to S and −i·Σ (A R(t)Φ₂ + t/(1+t²)Φ₂)w to Φ₁
/// for every (t, w). Weights may be indefinite (reference subtractions).
pub(crate) fn accumulate(a: &GridOperator, masses: &[(f64, &ComplexMatrix)], sums: &mut NodeSums) {
    if masses.is_empty() {
        return;
    }
    match a.kind() {
        OperatorKind::DoubleIntegration => accumulate_scalar(a, masses, sums),
        _ => accumulate_general(a, masses, sums),
    }
}

fn accumulate_general(a: &GridOperator, masses: &[(f64, &ComplexMatrix)], sums: &mut NodeSums) {
    let p = a.p();
    let n = a.grid().n();
    let h = a.grid().h();
    let phi2 = stacked_identity(n, p);
    for &(t, w) in masses {
        let x = resolvent_apply(t, a, &phi2);
        let xw = x.matmul(w);
        sums.s += &xw.matmul(&x.adjoint()).scale_real(h);
        let c = t / (1.0 + t * t);
        let inner = &a.apply(&x) + &phi2.scale_real(c);
        sums.phi1 += &inner.matmul(w).scale(C64::new(0.0, -1.0));
    }
}

/// Fast path for A = A₁ ⊗ I_p: the resolvent acts on constants through the
/// scalar recurrence, and S couples components only through w, so each
/// component pair (a, b) is one real GEMM per real/imaginary part.
fn accumulate_scalar(a: &GridOperator, masses: &[(f64, &ComplexMatrix)], sums: &mut NodeSums) {
    let grid = *a.grid();
    let p = a.p();
    let n = grid.n();
    let h = grid.h();
    let mut re_parts = vec![vec![0.0; n * n]; p * p];
    let mut im_parts = vec![vec![0.0; n * n]; p * p];
    for panel in masses.chunks(PANEL) {
        let m = panel.len();
        // g is n×m row-major; weighted copies feed the GEMMs.
        let mut g = vec![0.0; n * m];
        let mut ag = vec![0.0; n * m];
        for (col, &(t, _)) in panel.iter().enumerate() {
            let (gc, agc) = double_integration_resolvent(&grid, t);
            for j in 0..n {
                g[j * m + col] = gc[j];
                ag[j * m + col] = agc[j];
            }
        }
        let mut gw = vec![0.0; n * m];
        for ia in 0..p {
            for ib in ia..p {
                for (part, take_im) in [(&mut re_parts, false), (&mut im_parts, true)] {
                    if take_im && ia == ib {
                        continue;
                    }
                    let mut any = false;
                    for (col, &(_, w)) in panel.iter().enumerate() {
                        let z = w[(ia, ib)];
                        let v = if take_im { z.im } else { z.re };
                        any |= v != 0.0;
                        for j in 0..n {
                            gw[j * m + col] = g[j * m + col] * v;
                        }
                    }
                    if !any {
                        continue;
                    }
                    let out = &mut part[ia * p + ib];
                    // SAFETY: gw is n×m row-major, g read with strides (1, m)
                    // is its m×n transpose, out is n×n row-major.
                    unsafe {
                        matrixmultiply::dgemm(
                            n,
                            m,
                            n,
                            h,
                            gw.as_ptr(),
                            m as isize,
                            1,
                            g.as_ptr(),
                            1,
                            m as isize,
                            1.0,
                            out.as_mut_ptr(),
                            n as isize,
                            1,
                        );
                    }
                }
            }
        }
        for (col, &(t, w)) in panel.iter().enumerate() {
            let c = t / (1.0 + t * t);
            for j in 0..n {
                let f = C64::new(0.0, -(ag[j * m + col] + c));
                for ia in 0..p {
                    for ib in 0..p {
                        sums.phi1[(j * p + ia, ib)] += f * w[(ia, ib)];
                    }
                }
            }
        }
    }
    for ia in 0..p {
        for ib in ia..p {
            let re = &re_parts[ia * p + ib];
            let im = &im_parts[ia * p + ib];
            for j in 0..n {
                for k in 0..n {
                    let z = C64::new(re[j * n + k], im[j * n + k]);
                    sums.s[(j * p + ia, k * p + ib)] += z;
                    if ia != ib {
                        sums.s[(k * p + ib, j * p + ia)] += z.conj();
                    }
                }
            }
        }
    }
}

fn masses_of(data: &HerglotzData) -> Vec<(f64, &ComplexMatrix)> {
    data.tau().masses().iter().map(|m| (m.t, &m.w)).collect()
}

fn empty_sums(n: usize, p: usize) -> NodeSums {
    NodeSums { s: ComplexMatrix::zeros(n * p, n * p), phi1: ComplexMatrix::zeros(n * p, p) }
}

fn check_operator(data: &HerglotzData, a: &GridOperator) {
    assert_eq!(data.p(), a.p(), "measure and operator block sizes differ");
}

/// S̃ = h·Σ_k R_kΦ₂w_kΦ₂*R_k*, R_k = (I − t_kA)⁻¹, symmetrized.
#[allow(non_snake_case)]
pub fn build_S(data: &HerglotzData, a: &GridOperator) -> ComplexMatrix {
    check_operator(data, a);
    let mut sums = empty_sums(a.grid().n(), a.p());
    accumulate(a, &masses_of(data), &mut sums);
    sums.s.hermitian_part()
}

/// Φ̃₁ = −i·Σ_k (A R_kΦ₂ + t_k/(1+t_k²)Φ₂)w_k + iΦ₂ν.
#[allow(non_snake_case)]
pub fn build_Phi1(data: &HerglotzData, a: &GridOperator) -> ComplexMatrix {
    check_operator(data, a);
    let mut sums = empty_sums(a.grid().n(), a.p());
    accumulate(a, &masses_of(data), &mut sums);
    add_nu(&mut sums.phi1, data.nu(), a.grid().n());
    sums.phi1
}

fn add_nu(phi1: &mut ComplexMatrix, nu: &ComplexMatrix, n: usize) {
    let p = nu.rows();
    let inu = nu.scale(C64::new(0.0, 1.0));
    for j in 0..n {
        phi1.add_block(j * p, 0, &inu);
    }
}

fn check_definite(node: SNode) -> Result<SNode, InverseError> {
    CholeskyFactor::factor(node.s()).map_err(InverseError::NodeDegenerate)?;
    Ok(node)
}

/// S-node built from the measure as given, with no tail model.
pub fn assemble_snode(data: &HerglotzData, grid: Grid, p: usize) -> Result<SNode, InverseError> {
    assemble_snode_with(data, grid, p, TailCompletion::None)
}

/// S-node with an optional model for the measure beyond the window.
///
/// With [`TailCompletion::Lattice`] the data are used up to a cut inside the
/// window and the rest of the spectrum is replaced by free reference
/// lattices whose weights are fitted on the last band below the cut; see
/// [`estimate_lattice_reference`].
pub fn assemble_snode_with(
    data: &HerglotzData,
    grid: Grid,
    p: usize,
    completion: TailCompletion,
) -> Result<SNode, InverseError> {
    if data.p() != p {
        return Err(InverseError::Dimension(format!("measure block size {} but p = {p}", data.p())));
    }
    let a = op_A(grid, p);
    let mut sums = empty_sums(grid.n(), p);
    match completion {
        TailCompletion::None => accumulate(&a, &masses_of(data), &mut sums),
        TailCompletion::Lattice => {
            let reference = estimate_lattice_reference(data, grid.r())?;
            let t_cut = reference.cut() * reference.cut();
            let kept: Vec<(f64, &ComplexMatrix)> = masses_of(data).into_iter().filter(|&(t, _)| t <= t_cut).collect();
            accumulate(&a, &kept, &mut sums);
            reference.apply(&a, &mut sums);
        }
    }
    add_nu(&mut sums.phi1, data.nu(), grid.n());
    let node = SNode::from_parts(a, sums.s, sums.phi1)?;
    check_definite(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::op_A;
    use crate::herglotz::{Mass, MatrixMeasure};

    fn point_data(p: usize, masses: &[(f64, ComplexMatrix)], nu: ComplexMatrix) -> HerglotzData {
        let m = masses.iter().map(|(t, w)| Mass { t: *t, w: w.clone() }).collect();
        HerglotzData::new(nu, MatrixMeasure::new(p, m, (-10.0, 10.0), 1.0).unwrap()).unwrap()
    }

    #[test]
    fn empty_measure_gives_zero_node() {
        let g = Grid::new(1.0, 10).unwrap();
        let d = point_data(1, &[], ComplexMatrix::zeros(1, 1));
        let a = op_A(g, 1);
        assert_eq!(build_S(&d, &a), ComplexMatrix::zeros(10, 10));
        assert_eq!(build_Phi1(&d, &a), ComplexMatrix::zeros(10, 1));
        assert!(matches!(assemble_snode(&d, g, 1), Err(InverseError::NodeDegenerate(_))));
        let nu = ComplexMatrix::from_real_rows(&[&[2.0]]).unwrap();
        let phi1 = build_Phi1(&point_data(1, &[], nu), &a);
        assert!((0..10).all(|j| phi1[(j, 0)] == C64::new(0.0, 2.0)));
    }

    #[test]
    fn unit_mass_at_origin() {
        let g = Grid::new(1.0, 12).unwrap();
        let d = point_data(2, &[(0.0, ComplexMatrix::identity(2))], ComplexMatrix::zeros(2, 2));
        let a = op_A(g, 2);
        let s = build_S(&d, &a);
        let h = g.h();
        for j in 0..12 {
            for k in 0..12 {
                let block = s.block(2 * j, 2 * k, 2, 2);
                assert!((&block - &ComplexMatrix::identity(2).scale_real(h)).norm_max() < 1e-15);
            }
        }
        let phi1 = build_Phi1(&d, &a);
        for j in 0..12 {
            let x = g.center(j);
            let expect = 0.5 * x * x;
            assert!((phi1[(2 * j, 0)] - C64::new(0.0, expect)).norm() <= h * h);
            assert!(phi1[(2 * j, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn fast_and_general_accumulation_agree() {
        let g = Grid::new(1.0, 9).unwrap();
        let w1 = ComplexMatrix::from_rows(&[
            vec![C64::new(1.0, 0.0), C64::new(0.2, 0.3)],
            vec![C64::new(0.2, -0.3), C64::new(0.5, 0.0)],
        ])
        .unwrap();
        let w2 = ComplexMatrix::identity(2).scale_real(0.3);
        let masses = vec![(-4.0, &w1), (0.0, &w2), (7.5, &w1)];
        let a = op_A(g, 2);
        let mut fast = empty_sums(9, 2);
        accumulate_scalar(&a, &masses, &mut fast);
        let mut slow = empty_sums(9, 2);
        accumulate_general(&a, &masses, &mut slow);
        assert!((&fast.s - &slow.s).norm_max() < 1e-12);
        assert!((&fast.phi1 - &slow.phi1).norm_max() < 1e-12);
    }

    #[test]
    fn node_identity_is_exact_for_point_masses() {
        let g = Grid::new(1.0, 20).unwrap();
        let d = point_data(
            1,
            &[(-2.0, ComplexMatrix::from_real_rows(&[&[0.4]]).unwrap()), (9.0, ComplexMatrix::from_real_rows(&[&[1.5]]).unwrap())],
            ComplexMatrix::from_real_rows(&[&[0.3]]).unwrap(),
        );
        let a = op_A(g, 1);
        let node = SNode::from_parts(a.clone(), build_S(&d, &a), build_Phi1(&d, &a)).unwrap();
        assert!(node.relative_identity_residual() < 1e-12);
    }
}
