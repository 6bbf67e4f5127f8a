#![allow(dead_code)]

use cansys::linalg::{matrix_exp, ComplexMatrix, C64};
use cansys::model::{make_beta_family, signature_j, BetaProfile, Family, Grid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// β = [ixI + shift, I] on [0, r].
pub fn shifted_line(p: usize, shift: &ComplexMatrix, r: f64, n: usize) -> BetaProfile {
    make_beta_family(Family::ShiftedLine, p, shift, None, Grid::new(r, n).unwrap()).unwrap()
}

pub fn scalar_line(n: usize) -> BetaProfile {
    shifted_line(1, &ComplexMatrix::zeros(1, 1), 1.0, n)
}

/// The p = 2 skew shift [[0, 1], [−1, 0]].
pub fn rotation_shift() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap()
}

pub fn rotation_line(n: usize) -> BetaProfile {
    shifted_line(2, &rotation_shift(), 1.0, n)
}

pub fn normal(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ComplexMatrix {
    random_matrix(rng, n, n).hermitian_part().scale_real(scale)
}

/// exp(iJG) with G Hermitian satisfies UJU* = J.
pub fn random_j_unitary(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> ComplexMatrix {
    let g = random_hermitian(rng, 2 * p, scale);
    matrix_exp(&signature_j(p).matmul(&g).scale(c(0.0, 1.0)))
}

/// Skew-Hermitian p×p.
pub fn random_skew(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> ComplexMatrix {
    let m = random_matrix(rng, p, p);
    (&m - &m.adjoint()).scale_real(0.5 * scale)
}

/// f(x_j) = Σ_{q<3} sin((q+1)πx_j + q)·c_q with complex normal c_q, as n × 2p rows.
pub fn smooth_test_function(rng: &mut ChaCha8Rng, grid: &Grid, p: usize) -> ComplexMatrix {
    let coeffs: Vec<Vec<C64>> = (0..3).map(|_| (0..2 * p).map(|_| normal(rng)).collect()).collect();
    ComplexMatrix::from_fn(grid.n(), 2 * p, |j, a| {
        let x = grid.center(j);
        coeffs
            .iter()
            .enumerate()
            .map(|(q, cq)| cq[a] * ((q as f64 + 1.0) * std::f64::consts::PI * x + q as f64).sin())
            .sum()
    })
}
