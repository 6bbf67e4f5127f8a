//! Generalized Fourier map U: L₂(r, H) → L₂(dτ) and its isometry defect.

use rayon::prelude::*;

use super::{estimate_lattice_reference, InverseError, TailCompletion};
use crate::direct::Integrator;
use crate::herglotz::HerglotzData;
use crate::linalg::{ComplexMatrix, C64};
use crate::model::HamiltonianSamples;

/// Completed tail atoms stop at t = ISOMETRY_TAIL_SPAN·n/r²; beyond that the
/// cell size no longer resolves the oscillation of W(x, t).
pub const ISOMETRY_TAIL_SPAN: f64 = 4.0;

/// |‖Uf‖²_τ − ‖f‖²_H| / ‖f‖²_H with
/// (Uf)(t) = Σ_j h·[0 I_p]·W(x_j, t)*·H(x_j)·f(x_j), over the masses of τ.
///
/// `f` holds one 2p-vector per cell center as its rows (n × 2p). Returns 0
/// for f with zero H-norm.
pub fn spectral_isometry_defect(h: &HamiltonianSamples, data: &HerglotzData, f: &ComplexMatrix) -> Result<f64, InverseError> {
    spectral_isometry_defect_with(h, data, f, TailCompletion::None)
}

/// As [`spectral_isometry_defect`], with [`TailCompletion::Lattice`] adding
/// the fitted reference atoms above the window.
pub fn spectral_isometry_defect_with(
    h: &HamiltonianSamples,
    data: &HerglotzData,
    f: &ComplexMatrix,
    completion: TailCompletion,
) -> Result<f64, InverseError> {
    let p = h.p();
    let grid = *h.grid();
    let n = grid.n();
    if f.rows() != n || f.cols() != 2 * p || data.p() != p {
        return Err(InverseError::Dimension(format!("test function must be {n}x{}", 2 * p)));
    }
    let step = grid.h();
    let hf: Vec<ComplexMatrix> = (0..n)
        .map(|j| {
            let col = ComplexMatrix::from_fn(2 * p, 1, |a, _| f[(j, a)]);
            h.samples()[j].matmul(&col)
        })
        .collect();
    let norm_h: f64 = (0..n)
        .map(|j| (0..2 * p).map(|a| f[(j, a)].conj() * hf[j][(a, 0)]).sum::<C64>().re)
        .sum::<f64>()
        * step;
    if norm_h == 0.0 {
        return Ok(0.0);
    }
    let tail = match completion {
        TailCompletion::None => Vec::new(),
        TailCompletion::Lattice => {
            let reference = estimate_lattice_reference(data, grid.r())?;
            let k_top = data.tau().window().1.max(0.0).sqrt();
            let k_max = (ISOMETRY_TAIL_SPAN * n as f64).sqrt() / grid.r();
            reference.atoms_between(k_top, k_max)
        }
    };
    let masses: Vec<(f64, &ComplexMatrix)> =
        data.tau().masses().iter().map(|m| (m.t, &m.w)).chain(tail.iter().map(|(t, w)| (*t, w))).collect();
    let integ = Integrator::new(h);
    let terms: Vec<f64> = masses
        .par_iter()
        .map(|&(t, w)| -> Result<f64, InverseError> {
            let centers = integ.solve_centers(C64::new(t, 0.0))?;
            let mut uf = ComplexMatrix::zeros(p, 1);
            for (wx, v) in centers.iter().zip(&hf) {
                // [0 I]W* is the adjoint of the right column block of W.
                let lower = wx.block(0, p, 2 * p, p).adjoint();
                uf += &lower.matmul(v);
            }
            let uf = uf.scale_real(step);
            Ok(uf.adjoint().matmul(w).matmul(&uf)[(0, 0)].re)
        })
        .collect::<Result<_, _>>()?;
    let norm_tau: f64 = terms.iter().sum();
    Ok((norm_tau - norm_h).abs() / norm_h)
}
