//! Hamiltonian recovery H = d/dℓ(Π_ℓ* S_ℓ⁻¹ Π_ℓ) by an incremental sweep,
//! and the transfer matrix w_A(ℓ, λ).

use super::{InverseError, SNode};
use crate::linalg::{CholeskyFactor, ComplexMatrix, C64};
use crate::model::{signature_j, HamiltonianSamples};

/// Output of the recovery sweep.
#[derive(Debug, Clone)]
pub struct Recovery {
    /// Ĥ(x_j) = ΔZ_j*ΔZ_j/h.
    pub hamiltonian: HamiltonianSamples,
    /// ΔZ_j (p×2p), the rows of Z = √h·L⁻¹Π added at cell j.
    pub increments: Vec<ComplexMatrix>,
    /// Cholesky factor of the full S.
    pub factor: CholeskyFactor,
}

impl Recovery {
    /// M(ℓ_{j+1}) − M(ℓ_j) = ΔZ_j*ΔZ_j.
    pub fn m_increment(&self, cell: usize) -> ComplexMatrix {
        gram(&self.increments[cell])
    }

    /// M(ℓ_j) = Σ_{k<j} ΔZ_k*ΔZ_k.
    pub fn m_at(&self, boundary: usize) -> ComplexMatrix {
        let q = self.increments[0].cols();
        let mut m = ComplexMatrix::zeros(q, q);
        for inc in &self.increments[..boundary] {
            m += &gram(inc);
        }
        m
    }
}

/// F*F computed on the upper triangle and mirrored, so the result is
/// Hermitian bit for bit with an exactly real diagonal.
pub(crate) fn gram(f: &ComplexMatrix) -> ComplexMatrix {
    let q = f.cols();
    let mut g = ComplexMatrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..f.rows() {
                acc += f[(k, a)].conj() * f[(k, b)];
            }
            if a == b {
                acc.im = 0.0;
            }
            g[(a, b)] = acc;
            g[(b, a)] = acc.conj();
        }
    }
    g
}

/// Sweeps the cells, extending the Cholesky factor of S_ℓ one block at a
/// time and appending the matching rows of Z = √h·L⁻¹Π.
pub fn recover(node: &SNode) -> Result<Recovery, InverseError> {
    let grid = *node.grid();
    let p = node.p();
    let n = grid.n();
    let h = grid.h();
    let sqrt_h = h.sqrt();
    let s = node.s();
    let pi = node.pi();
    let q = 2 * p;
    let mut factor = CholeskyFactor::empty();
    let mut z: Vec<Vec<C64>> = Vec::with_capacity(n * p);
    let mut increments = Vec::with_capacity(n);
    let mut hs = Vec::with_capacity(n);
    for j in 0..n {
        let start = j * p;
        let rows = if start == 0 { ComplexMatrix::zeros(p, 1) } else { s.block(start, 0, p, start) };
        let corner = s.block(start, start, p, p);
        factor
            .append(&rows, &corner)
            .map_err(|source| InverseError::PositivityFailure { boundary: j + 1, source })?;
        let mut delta = ComplexMatrix::zeros(p, q);
        for a in 0..p {
            let row_idx = start + a;
            let lrow = factor.row(row_idx);
            let mut zr: Vec<C64> = (0..q).map(|c| pi[(row_idx, c)] * sqrt_h).collect();
            for (s_idx, zs) in z.iter().enumerate() {
                let l = lrow[s_idx];
                for (acc, v) in zr.iter_mut().zip(zs) {
                    *acc -= l * v;
                }
            }
            let d = lrow[row_idx].re;
            zr.iter_mut().for_each(|v| *v /= d);
            for (c, v) in zr.iter().enumerate() {
                delta[(a, c)] = *v;
            }
            z.push(zr);
        }
        let mut hj = gram(&delta);
        hj.data_mut().iter_mut().for_each(|v| *v /= h);
        hs.push(hj);
        increments.push(delta);
    }
    Ok(Recovery { hamiltonian: HamiltonianSamples::from_exact(p, grid, hs), increments, factor })
}

/// Ĥ at the cell centers.
pub fn recover_hamiltonian(node: &SNode) -> Result<HamiltonianSamples, InverseError> {
    Ok(recover(node)?.hamiltonian)
}

/// w_A(ℓ, λ) = I − iJ·hΠ_ℓ*S_ℓ⁻¹(A_ℓ − λI)⁻¹Π_ℓ at boundary index `ell`.
pub fn transfer_matrix(node: &SNode, ell: usize, lambda: C64) -> Result<ComplexMatrix, InverseError> {
    let n = node.grid().n();
    if ell == 0 || ell > n {
        return Err(InverseError::BoundaryOutOfRange { ell, n });
    }
    if lambda == C64::new(0.0, 0.0) {
        return Err(InverseError::LambdaZero);
    }
    let p = node.p();
    let m = ell * p;
    let s_l = node.s().block(0, 0, m, m);
    let factor = CholeskyFactor::factor(&s_l).map_err(|source| InverseError::PositivityFailure { boundary: ell, source })?;
    let pi = node.pi().block(0, 0, m, 2 * p);
    let a = node.a().matrix();
    // (A_ℓ − λ)X = Π_ℓ with A_ℓ strictly lower: forward substitution, diagonal −λ.
    let mut x = pi.clone();
    for i in 0..m {
        for k in 0..i {
            let aik = a[(i, k)];
            if aik == C64::new(0.0, 0.0) {
                continue;
            }
            for c in 0..2 * p {
                let v = x[(k, c)];
                x[(i, c)] -= aik * v;
            }
        }
        for c in 0..2 * p {
            x[(i, c)] /= -lambda;
        }
    }
    let y = factor.solve_leading(m, &x);
    let inner = pi.adjoint().matmul(&y).scale_real(node.grid().h());
    let correction = signature_j(p).matmul(&inner).scale(C64::new(0.0, -1.0));
    Ok(&ComplexMatrix::identity(2 * p) + &correction)
}
