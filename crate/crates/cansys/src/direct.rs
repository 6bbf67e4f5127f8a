//! Fundamental solution of w′ = iλJH(x)w by the midpoint exponential rule,
//! and the monodromy 𝒲(r, λ) = W(r, λ̄)*.

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{matrix_exp, min_eig_herm, ComplexMatrix, C64};
use crate::model::{signature_j, Grid, HamiltonianSamples};

/// Frobenius bound on ‖W‖ beyond which integration is abandoned.
pub const GROWTH_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirectError {
    #[error("fundamental solution overflow at boundary {boundary}: norm {norm:e} (|Im lambda|*r too large for the step)")]
    GrowthOverflow { boundary: usize, norm: f64 },
}

/// W(ℓ_j, λ) at every cell boundary, W(0) = I.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub lambda: C64,
    pub grid: Grid,
    pub w: Vec<ComplexMatrix>,
}

impl FundamentalSolution {
    pub fn at_boundary(&self, j: usize) -> &ComplexMatrix {
        &self.w[j]
    }

    pub fn at_end(&self) -> &ComplexMatrix {
        self.w.last().expect("solution has n + 1 boundary values")
    }
}

/// Caches JH(x_j) so that λ sweeps share one preparation.
#[derive(Debug, Clone)]
pub struct Integrator {
    grid: Grid,
    p: usize,
    jh: Vec<ComplexMatrix>,
}

impl Integrator {
    pub fn new(h: &HamiltonianSamples) -> Self {
        let j = signature_j(h.p());
        Self { grid: *h.grid(), p: h.p(), jh: h.samples().iter().map(|m| j.matmul(m)).collect() }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn step(&self, cell: usize, lambda: C64, width: f64) -> ComplexMatrix {
        matrix_exp(&self.jh[cell].scale(C64::new(0.0, width) * lambda))
    }

    /// W at every boundary.
    pub fn solve(&self, lambda: C64) -> Result<FundamentalSolution, DirectError> {
        let h = self.grid.h();
        let mut w = Vec::with_capacity(self.grid.n() + 1);
        w.push(ComplexMatrix::identity(2 * self.p));
        for cell in 0..self.grid.n() {
            let next = self.step(cell, lambda, h).matmul(&w[cell]);
            let norm = next.norm_fro();
            if !(norm <= GROWTH_LIMIT) {
                return Err(DirectError::GrowthOverflow { boundary: cell + 1, norm });
            }
            w.push(next);
        }
        Ok(FundamentalSolution { lambda, grid: self.grid, w })
    }

    /// W at the cell centers, by a half step from each left boundary.
    pub fn solve_centers(&self, lambda: C64) -> Result<Vec<ComplexMatrix>, DirectError> {
        let sol = self.solve(lambda)?;
        let half = 0.5 * self.grid.h();
        Ok((0..self.grid.n()).map(|cell| self.step(cell, lambda, half).matmul(&sol.w[cell])).collect())
    }

    /// 𝒲(ℓ_j, λ) = W(ℓ_j, λ̄)* at the boundary `j`.
    pub fn monodromy_at(&self, lambda: C64, j: usize) -> Result<ComplexMatrix, DirectError> {
        Ok(self.solve(lambda.conj())?.w[j].adjoint())
    }

    pub fn monodromy(&self, lambda: C64) -> Result<ComplexMatrix, DirectError> {
        self.monodromy_at(lambda, self.grid.n())
    }

    /// Monodromies for many λ; output order matches input order.
    pub fn monodromy_sweep(&self, lambdas: &[C64]) -> Result<Vec<ComplexMatrix>, DirectError> {
        lambdas.par_iter().map(|&l| self.monodromy(l)).collect()
    }
}

pub fn fundamental_solution(h: &HamiltonianSamples, lambda: C64) -> Result<FundamentalSolution, DirectError> {
    Integrator::new(h).solve(lambda)
}

pub fn monodromy(h: &HamiltonianSamples, lambda: C64) -> Result<ComplexMatrix, DirectError> {
    Integrator::new(h).monodromy(lambda)
}

/// ‖W(r, λ̄)*JW(r, λ) − J‖; infinite when integration overflows.
pub fn j_unitarity_residual(h: &HamiltonianSamples, lambda: C64) -> f64 {
    let integ = Integrator::new(h);
    let (Ok(a), Ok(b)) = (integ.solve(lambda.conj()), integ.solve(lambda)) else {
        return f64::INFINITY;
    };
    let j = signature_j(h.p());
    (&a.at_end().adjoint().matmul(&j).matmul(b.at_end()) - &j).norm_op()
}

/// min_eig((i/(λ − λ̄))(J − W(r,λ)*JW(r,λ))), which equals the smallest
/// eigenvalue of ∫W*HW and so is ≥ 0 up to discretization error.
pub fn monotone_form_defect(h: &HamiltonianSamples, lambda: C64) -> Result<f64, DirectError> {
    let w = fundamental_solution(h, lambda)?;
    let j = signature_j(h.p());
    let form = &j - &w.at_end().adjoint().matmul(&j).matmul(w.at_end());
    let factor = C64::new(0.0, 1.0) / (lambda - lambda.conj());
    Ok(min_eig_herm(&form.scale(factor)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hamiltonian_from_beta, make_beta_family, Family};

    fn scalar_line(n: usize) -> HamiltonianSamples {
        let g = Grid::new(1.0, n).unwrap();
        hamiltonian_from_beta(&make_beta_family(Family::ShiftedLine, 1, &ComplexMatrix::zeros(1, 1), None, g).unwrap())
    }

    #[test]
    fn zero_lambda_gives_identity() {
        let h = scalar_line(20);
        let sol = fundamental_solution(&h, C64::new(0.0, 0.0)).unwrap();
        assert!(sol.w.iter().all(|w| *w == ComplexMatrix::identity(2)));
        assert_eq!(j_unitarity_residual(&h, C64::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn nilpotent_integrator_is_exact() {
        let g = Grid::new(1.0, 16).unwrap();
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]).unwrap();
        let h = HamiltonianSamples::new(1, g, vec![m; 16]).unwrap();
        let lambda = C64::new(0.7, -0.4);
        let sol = fundamental_solution(&h, lambda).unwrap();
        for (j, w) in sol.w.iter().enumerate() {
            let mut expect = ComplexMatrix::identity(2);
            expect[(0, 1)] = C64::new(0.0, 1.0) * lambda * g.boundary(j);
            assert!((w - &expect).norm_max() < 1e-14);
        }
    }

    #[test]
    fn j_unitarity_converges_at_second_order() {
        let lambda = C64::new(1.0, 0.0);
        let coarse = j_unitarity_residual(&scalar_line(100), lambda);
        let fine = j_unitarity_residual(&scalar_line(200), lambda);
        assert!(coarse <= 1e-3);
        assert!(coarse / fine >= 3.5 || fine <= 1e-13, "ratio {}", coarse / fine);
    }

    #[test]
    fn overflow_is_reported() {
        let g = Grid::new(1.0, 10).unwrap();
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let h = HamiltonianSamples::new(1, g, vec![m; 10]).unwrap();
        let err = fundamental_solution(&h, C64::new(0.0, 60.0)).unwrap_err();
        assert!(matches!(err, DirectError::GrowthOverflow { .. }));
    }

    #[test]
    fn monotone_form_is_nonnegative() {
        let h = scalar_line(100);
        for &l in &[C64::new(1.0, 1.0), C64::new(-3.0, 0.5), C64::new(0.0, 2.0)] {
            assert!(monotone_form_defect(&h, l).unwrap() >= -1e-10);
        }
    }
}
