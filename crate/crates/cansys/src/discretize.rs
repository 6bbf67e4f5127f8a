//! Midpoint discretization of the Volterra operators on L₂^p(0, r).
//!
//! Vector functions are stacked cell by cell: entry `j·p + a` holds component
//! `a` at center x_j. Weights are uniform, so the discrete adjoint is the
//! conjugate transpose.

use crate::linalg::{ComplexMatrix, C64};
use crate::model::{signature_j, BetaProfile, Grid};

/// Which kernel built an operator. Scalar kinds are `kernel ⊗ I_p` and admit
/// fast resolvents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// i∫₀ˣ f.
    Integration,
    /// ∫₀ˣ (t − x) f(t) dt.
    DoubleIntegration,
    General,
}

/// Discretized operator acting on stacked cell-center samples.
#[derive(Debug, Clone)]
pub struct GridOperator {
    grid: Grid,
    p: usize,
    kind: OperatorKind,
    m: ComplexMatrix,
}

impl GridOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn apply(&self, f: &ComplexMatrix) -> ComplexMatrix {
        self.m.matmul(f)
    }

    /// Leading `cells` block rows and columns.
    pub fn leading(&self, cells: usize) -> ComplexMatrix {
        let k = cells * self.p;
        self.m.block(0, 0, k, k)
    }

    /// True when every block (j, k) with k ≥ j has entries of magnitude ≤ `tol`.
    pub fn is_strictly_lower(&self, tol: f64) -> bool {
        let p = self.p;
        let np = self.m.rows();
        (0..np).all(|i| (i / p * p..np).all(|c| self.m[(i, c)].norm() <= tol))
    }
}

fn scalar_operator(grid: Grid, p: usize, kind: OperatorKind, kernel: impl Fn(usize, usize) -> C64) -> GridOperator {
    let n = grid.n();
    let m = ComplexMatrix::from_fn(n * p, n * p, |i, c| if i % p == c % p { kernel(i / p, c / p) } else { C64::new(0.0, 0.0) });
    GridOperator { grid, p, kind, m }
}

/// i∫₀ˣ, with a half-cell diagonal term.
pub fn op_integration(grid: Grid, p: usize) -> GridOperator {
    let h = grid.h();
    scalar_operator(grid, p, OperatorKind::Integration, |j, k| {
        if k < j {
            C64::new(0.0, h)
        } else if k == j {
            C64::new(0.0, 0.5 * h)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// ∫₀ˣ (t − x)·dt; strictly lower block-triangular.
#[allow(non_snake_case)]
pub fn op_A(grid: Grid, p: usize) -> GridOperator {
    let h = grid.h();
    scalar_operator(grid, p, OperatorKind::DoubleIntegration, |j, k| {
        if k < j {
            C64::new(-h * h * (j - k) as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// iβ(x)J∫₀ˣ β(t)*·dt, with the diagonal half-cell term kept.
#[allow(non_snake_case)]
pub fn op_K(profile: &BetaProfile) -> GridOperator {
    let grid = *profile.grid();
    let p = profile.p();
    let n = grid.n();
    let h = grid.h();
    let j = signature_j(p);
    let bj: Vec<ComplexMatrix> = profile.beta().iter().map(|b| b.matmul(&j)).collect();
    let mut m = ComplexMatrix::zeros(n * p, n * p);
    for row in 0..n {
        for col in 0..=row {
            let w = if col < row { h } else { 0.5 * h };
            let block = bj[row].matmul(&profile.beta()[col].adjoint()).scale(C64::new(0.0, w));
            m.set_block(row * p, col * p, &block);
        }
    }
    GridOperator { grid, p, kind: OperatorKind::General, m }
}

/// (I − tA)⁻¹·rhs by forward substitution.
///
/// `a` must be strictly lower block-triangular, which makes the diagonal of
/// I − tA the identity for every real t.
pub fn resolvent_apply(t: f64, a: &GridOperator, rhs: &ComplexMatrix) -> ComplexMatrix {
    let np = a.m.rows();
    assert_eq!(rhs.rows(), np, "resolvent rhs dimension mismatch");
    debug_assert!(a.is_strictly_lower(1e-300) || a.kind == OperatorKind::General);
    let p = a.p;
    let mut x = rhs.clone();
    for i in 0..np {
        let first_in_block = i / p * p;
        for k in 0..first_in_block {
            let aik = a.m[(i, k)];
            if aik == C64::new(0.0, 0.0) {
                continue;
            }
            let f = aik * t;
            for c in 0..rhs.cols() {
                let v = x[(k, c)];
                x[(i, c)] += f * v;
            }
        }
    }
    x
}

/// Scalar resolvent of the double integration on constants: returns
/// g = (I − tA₁)⁻¹·1 and A₁g on the n cells, in O(n) via running sums of
/// the Toeplitz kernel −h²(j − k).
pub fn double_integration_resolvent(grid: &Grid, t: f64) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n();
    let h2 = grid.h() * grid.h();
    let mut g = Vec::with_capacity(n);
    let mut ag = Vec::with_capacity(n);
    // s1 = Σ_{k<j} g_k, s2 = Σ_{k<j} (j − k) g_k.
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let a = -h2 * s2;
        let gj = 1.0 + t * a;
        g.push(gj);
        ag.push(a);
        s1 += gj;
        s2 += s1;
    }
    (g, ag)
}

/// ‖(K − K*) − R‖ / ‖K‖ with R the discretization of iβ(x)J∫₀ʳ β(t)*·dt.
pub fn k_identity_residual(profile: &BetaProfile) -> f64 {
    let k = op_K(profile);
    let p = profile.p();
    let n = profile.grid().n();
    let h = profile.grid().h();
    let b = ComplexMatrix::vstack(profile.beta());
    let bj = b.matmul(&signature_j(p));
    let r = bj.matmul(&b.adjoint()).scale(C64::new(0.0, h));
    debug_assert_eq!(r.rows(), n * p);
    let defect = &(&k.m - &k.m.adjoint()) - &r;
    let norm = k.m.norm_op();
    if norm == 0.0 {
        defect.norm_op()
    } else {
        defect.norm_op() / norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_beta_family, Family};

    fn ones(n: usize, p: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n * p, 1, |_, _| C64::new(1.0, 0.0))
    }

    #[test]
    fn integration_of_constant_and_linear() {
        let g = Grid::new(1.0, 50).unwrap();
        let op = op_integration(g, 1);
        let f1 = op.apply(&ones(50, 1));
        let fx = op.apply(&ComplexMatrix::from_fn(50, 1, |j, _| C64::new(g.center(j), 0.0)));
        for j in 0..50 {
            let x = g.center(j);
            assert!((f1[(j, 0)] - C64::new(0.0, x)).norm() <= g.h() * g.h());
            assert!((fx[(j, 0)] - C64::new(0.0, 0.5 * x * x)).norm() <= g.h() * g.h());
        }
    }

    #[test]
    fn integration_error_is_second_order() {
        let err = |n: usize| {
            let g = Grid::new(1.0, n).unwrap();
            let f = ComplexMatrix::from_fn(n, 1, |j, _| C64::new(g.center(j).cos(), 0.0));
            let out = op_integration(g, 1).apply(&f);
            (0..n).map(|j| (out[(j, 0)] - C64::new(0.0, g.center(j).sin())).norm()).fold(0.0, f64::max)
        };
        assert!(err(100) / err(200) >= 3.5);
    }

    #[test]
    fn double_integration_of_constant() {
        let g = Grid::new(1.0, 40).unwrap();
        let a = op_A(g, 2);
        assert!(a.is_strictly_lower(0.0));
        let out = a.apply(&ones(40, 2));
        for j in 0..40 {
            let x = g.center(j);
            assert!((out[(2 * j, 0)].re + 0.5 * x * x).abs() <= 2.0 * g.h() * g.h());
        }
    }

    #[test]
    fn square_identity_defect_is_first_order() {
        let defect = |n: usize| {
            let g = Grid::new(1.0, n).unwrap();
            let i = op_integration(g, 1);
            (op_A(g, 1).matrix() - &i.matrix().matmul(i.matrix())).norm_max()
        };
        assert!(defect(100) / defect(200) >= 1.9);
    }

    #[test]
    fn resolvent_trivial_at_zero() {
        let g = Grid::new(1.0, 20).unwrap();
        let rhs = ComplexMatrix::from_fn(40, 3, |i, c| C64::new(i as f64, c as f64));
        assert_eq!(resolvent_apply(0.0, &op_A(g, 2), &rhs), rhs);
    }

    #[test]
    fn resolvent_of_constant_is_cosine() {
        let err = |n: usize| {
            let g = Grid::new(1.0, n).unwrap();
            let t = 9.0;
            let out = resolvent_apply(t, &op_A(g, 1), &ones(n, 1));
            (0..n).map(|j| (out[(j, 0)].re - (3.0 * g.center(j)).cos()).abs()).fold(0.0, f64::max)
        };
        assert!(err(100) < 1e-2);
        assert!(err(100) / err(200) >= 3.5);
    }

    #[test]
    fn fast_scalar_resolvent_matches_substitution() {
        let g = Grid::new(1.0, 64).unwrap();
        for &t in &[-30.0, -1.0, 0.0, 2.5, 80.0] {
            let dense = resolvent_apply(t, &op_A(g, 1), &ones(64, 1));
            let ag_dense = op_A(g, 1).apply(&dense);
            let (fast, ag) = double_integration_resolvent(&g, t);
            for j in 0..64 {
                let scale = 1.0 + dense[(j, 0)].norm();
                assert!((dense[(j, 0)].re - fast[j]).abs() <= 1e-12 * scale);
                assert!((ag_dense[(j, 0)].re - ag[j]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn k_matches_a_for_shifted_line() {
        let g = Grid::new(1.0, 30).unwrap();
        let shift = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
        let prof = make_beta_family(Family::ShiftedLine, 2, &shift, None, g).unwrap();
        let k = op_K(&prof);
        assert!((k.matrix() - op_A(g, 2).matrix()).norm_max() <= 1e-10);
        assert!(k_identity_residual(&prof) <= 1e-12);
        let zero = ComplexMatrix::zeros(60, 1);
        assert_eq!(k.apply(&zero), zero);
    }
}
