//! Property-J pairs, the linear-fractional map from the monodromy to Weyl
//! functions, and the Herglotz, disk and Weyl inequality checks.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::direct::{DirectError, Integrator};
use crate::linalg::{condition_number, inverse, min_eig_herm, ComplexMatrix, C64};
use crate::model::{signature_j, HamiltonianSamples};

/// Spectral condition number ceiling for the LFT denominator.
pub const LFT_CONDITION_LIMIT: f64 = 1e12;

/// Tolerance for the property-J inequality P1*P2 + P2*P1 ⪰ 0.
pub const PROPERTY_J_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairCondition {
    /// P1*P1 + P2*P2 ≻ 0.
    Nonsingular,
    /// P1*P2 + P2*P1 ⪰ 0.
    PropertyJ,
}

impl fmt::Display for PairCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairCondition::Nonsingular => "P1*P1 + P2*P2 > 0",
            PairCondition::PropertyJ => "P1*P2 + P2*P1 >= 0",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeylError {
    #[error("pair violates {which}: min eigenvalue {min_eig:e}")]
    PairViolation { which: PairCondition, min_eig: f64 },
    #[error("LFT denominator singular: condition number {condition:e}")]
    DenominatorSingular { condition: f64 },
    #[error("point {index} is not in the open upper half-plane")]
    NotUpperHalfPlane { index: usize },
    #[error("monodromy is not invertible")]
    SingularMonodromy,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Direct(#[from] DirectError),
}

/// Constant pair (P1, P2) with the nonsingularity and property-J conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyJPair {
    p1: ComplexMatrix,
    p2: ComplexMatrix,
}

impl PropertyJPair {
    pub fn p1(&self) -> &ComplexMatrix {
        &self.p1
    }

    pub fn p2(&self) -> &ComplexMatrix {
        &self.p2
    }

    pub fn p(&self) -> usize {
        self.p1.rows()
    }
}

pub fn make_pair(p1: ComplexMatrix, p2: ComplexMatrix) -> Result<PropertyJPair, WeylError> {
    let p = p1.rows();
    if !p1.is_square() || p2.rows() != p || p2.cols() != p {
        return Err(WeylError::Dimension("pair blocks must be equal square matrices".into()));
    }
    let gram = &p1.adjoint().matmul(&p1) + &p2.adjoint().matmul(&p2);
    let g = min_eig_herm(&gram);
    if !(g > 0.0) {
        return Err(WeylError::PairViolation { which: PairCondition::Nonsingular, min_eig: g });
    }
    let cross = &p1.adjoint().matmul(&p2) + &p2.adjoint().matmul(&p1);
    let c = min_eig_herm(&cross);
    if !(c >= -PROPERTY_J_TOL) {
        return Err(WeylError::PairViolation { which: PairCondition::PropertyJ, min_eig: c });
    }
    Ok(PropertyJPair { p1, p2 })
}

/// The pair {0, I}.
pub fn default_pair(p: usize) -> PropertyJPair {
    PropertyJPair { p1: ComplexMatrix::zeros(p, p), p2: ComplexMatrix::identity(p) }
}

/// Weyl function values at points of the open upper half-plane.
#[derive(Debug, Clone)]
pub struct WeylSamples {
    p: usize,
    points: Vec<C64>,
    values: Vec<ComplexMatrix>,
}

impl WeylSamples {
    pub fn new(p: usize, points: Vec<C64>, values: Vec<ComplexMatrix>) -> Result<Self, WeylError> {
        if points.len() != values.len() {
            return Err(WeylError::Dimension(format!("{} points, {} values", points.len(), values.len())));
        }
        if !values.iter().all(|v| v.rows() == p && v.cols() == p) {
            return Err(WeylError::Dimension(format!("values must be {p}x{p}")));
        }
        if let Some(index) = points.iter().position(|z| !(z.im > 0.0)) {
            return Err(WeylError::NotUpperHalfPlane { index });
        }
        Ok(Self { p, points, values })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn values(&self) -> &[ComplexMatrix] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// φ = i(𝒲₁₁P₁ + 𝒲₁₂P₂)(𝒲₂₁P₁ + 𝒲₂₂P₂)⁻¹.
pub fn lft_weyl(wcal: &ComplexMatrix, pair: &PropertyJPair) -> Result<ComplexMatrix, WeylError> {
    let p = pair.p();
    if wcal.rows() != 2 * p || wcal.cols() != 2 * p {
        return Err(WeylError::Dimension(format!("monodromy must be {0}x{0}", 2 * p)));
    }
    let w = |r: usize, c: usize| wcal.block(r * p, c * p, p, p);
    let num = &w(0, 0).matmul(&pair.p1) + &w(0, 1).matmul(&pair.p2);
    let den = &w(1, 0).matmul(&pair.p1) + &w(1, 1).matmul(&pair.p2);
    let condition = condition_number(&den);
    if !(condition <= LFT_CONDITION_LIMIT) {
        return Err(WeylError::DenominatorSingular { condition });
    }
    let inv = inverse(&den).map_err(|_| WeylError::DenominatorSingular { condition })?;
    Ok(num.matmul(&inv).scale(C64::new(0.0, 1.0)))
}

/// min_eig(i(φ* − φ)) for one value.
pub fn imaginary_part_min_eig(phi: &ComplexMatrix) -> f64 {
    min_eig_herm(&(&phi.adjoint() - phi).scale(C64::new(0.0, 1.0)))
}

/// Minimum over samples of min_eig(i(φ* − φ)); +∞ for no samples.
pub fn herglotz_defect(samples: &WeylSamples) -> f64 {
    samples.values.iter().map(imaginary_part_min_eig).fold(f64::INFINITY, f64::min)
}

/// min_eig([iφ* I]·𝔄·[−iφ; I]) with 𝔄 = (𝒲⁻¹)*J𝒲⁻¹.
pub fn disk_membership_residual(phi: &ComplexMatrix, wcal: &ComplexMatrix) -> Result<f64, WeylError> {
    let p = phi.rows();
    if wcal.rows() != 2 * p {
        return Err(WeylError::Dimension("monodromy and phi sizes differ".into()));
    }
    let winv = inverse(wcal).map_err(|_| WeylError::SingularMonodromy)?;
    let j = signature_j(p);
    let frame = ComplexMatrix::vstack(&[phi.scale(C64::new(0.0, -1.0)), ComplexMatrix::identity(p)]);
    let v = winv.matmul(&frame);
    Ok(min_eig_herm(&v.adjoint().matmul(&j).matmul(&v)))
}

/// min_eig of (φ − φ*)/(λ − λ̄) − ∫₀ʳ [I iφ*]W*HW[I; −iφ] dx, midpoint rule
/// with W(x_j, λ) at the cell centers.
pub fn weyl_inequality_residual(h: &HamiltonianSamples, phi: &ComplexMatrix, lambda: C64) -> Result<f64, WeylError> {
    let p = h.p();
    if !(lambda.im > 0.0) {
        return Err(WeylError::NotUpperHalfPlane { index: 0 });
    }
    let centers = Integrator::new(h).solve_centers(lambda)?;
    let frame = ComplexMatrix::vstack(&[ComplexMatrix::identity(p), phi.scale(C64::new(0.0, -1.0))]);
    let mut integral = ComplexMatrix::zeros(p, p);
    for (w, hj) in centers.iter().zip(h.samples()) {
        let v = w.matmul(&frame);
        integral += &v.adjoint().matmul(hj).matmul(&v);
    }
    let quad = integral.scale_real(h.grid().h());
    let lhs = (phi - &phi.adjoint()).scale(C64::new(1.0, 0.0) / (lambda - lambda.conj()));
    Ok(min_eig_herm(&(&lhs - &quad)))
}

/// φ(λ) for one point.
pub fn weyl_function(integ: &Integrator, pair: &PropertyJPair, lambda: C64) -> Result<ComplexMatrix, WeylError> {
    lft_weyl(&integ.monodromy(lambda)?, pair)
}

/// φ over many points in parallel, in input order.
pub fn weyl_sweep(integ: &Integrator, pair: &PropertyJPair, points: &[C64]) -> Result<WeylSamples, WeylError> {
    let values = points.par_iter().map(|&l| weyl_function(integ, pair, l)).collect::<Result<Vec<_>, _>>()?;
    WeylSamples::new(pair.p(), points.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid;

    fn i_scaled(p: usize, s: f64) -> ComplexMatrix {
        ComplexMatrix::identity(p).scale(C64::new(0.0, s))
    }

    #[test]
    fn pair_examples() {
        let eye = ComplexMatrix::identity(2);
        assert!(make_pair(ComplexMatrix::zeros(2, 2), eye.clone()).is_ok());
        assert!(make_pair(eye.clone(), eye.clone()).is_ok());
        let err = make_pair(eye.clone(), eye.scale_real(-1.0)).unwrap_err();
        assert!(matches!(err, WeylError::PairViolation { which: PairCondition::PropertyJ, .. }));
        let err = make_pair(ComplexMatrix::zeros(1, 1), ComplexMatrix::zeros(1, 1)).unwrap_err();
        assert!(matches!(err, WeylError::PairViolation { which: PairCondition::Nonsingular, .. }));
    }

    #[test]
    fn lft_at_identity_monodromy() {
        let eye4 = ComplexMatrix::identity(4);
        assert_eq!(lft_weyl(&eye4, &default_pair(2)).unwrap(), ComplexMatrix::zeros(2, 2));
        let pair = make_pair(ComplexMatrix::identity(2), ComplexMatrix::identity(2)).unwrap();
        assert_eq!(lft_weyl(&eye4, &pair).unwrap(), i_scaled(2, 1.0));
    }

    #[test]
    fn lft_flags_singular_denominator() {
        // 𝒲 = J with pair {0, I} has denominator 𝒲₂₂ = 0.
        let err = lft_weyl(&signature_j(1), &default_pair(1)).unwrap_err();
        assert!(matches!(err, WeylError::DenominatorSingular { .. }));
    }

    #[test]
    fn herglotz_defect_examples() {
        let pts = vec![C64::new(0.0, 1.0)];
        let s = |v: ComplexMatrix| WeylSamples::new(1, pts.clone(), vec![v]).unwrap();
        assert!((herglotz_defect(&s(i_scaled(1, 1.0))) - 2.0).abs() < 1e-15);
        assert_eq!(herglotz_defect(&s(ComplexMatrix::zeros(1, 1))), 0.0);
        assert!((herglotz_defect(&s(i_scaled(1, -1.0))) + 2.0).abs() < 1e-15);
        assert!(WeylSamples::new(1, vec![C64::new(1.0, 0.0)], vec![ComplexMatrix::zeros(1, 1)]).is_err());
    }

    #[test]
    fn disk_membership_at_identity() {
        let eye = ComplexMatrix::identity(2);
        assert!((disk_membership_residual(&i_scaled(1, 1.0), &eye).unwrap() - 2.0).abs() < 1e-15);
        assert!((disk_membership_residual(&i_scaled(1, -1.0), &eye).unwrap() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn weyl_inequality_with_zero_hamiltonian() {
        let g = Grid::new(1.0, 8).unwrap();
        let h = HamiltonianSamples::new(1, g, vec![ComplexMatrix::zeros(2, 2); 8]).unwrap();
        let d = weyl_inequality_residual(&h, &i_scaled(1, 1.0), C64::new(0.0, 1.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }
}
