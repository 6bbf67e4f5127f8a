//! Tail model for the part of the measure outside the sampled window.
//!
//! A truncated measure makes S singular: S must behave like Γ·I plus a
//! smooth kernel, and the identity part comes from the infinite tail of τ.
//! Two free reference measures reproduce S = I exactly on (0, r):
//!
//! * Neumann lattice: atoms at ((mπ/r)², m ≥ 0) with masses 1/r at m = 0
//!   and 2/r otherwise;
//! * Dirichlet lattice: atoms at (((m+½)π/r)², m ≥ 0) with masses 2/r.
//!
//! The data are kept up to the cut k_c = (M+¼)π/r in √t, halfway between a
//! Neumann and a Dirichlet atom, and the spectrum above the cut is replaced
//! by Γ_N·(Neumann) + Γ_D·(Dirichlet). The weights come from the band
//! k ∈ (k_c − π/r, k_c], which holds exactly one atom of each lattice: the
//! cos(2kr) moment separates the two phases.

use super::{accumulate, InverseError, NodeSums};
use crate::discretize::GridOperator;
use crate::herglotz::HerglotzData;
use crate::linalg::{project_psd, ComplexMatrix, C64};

/// How the measure beyond the window is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailCompletion {
    /// Use the measure as given.
    None,
    /// Replace the spectrum above the cut by fitted reference lattices.
    Lattice,
}

impl std::str::FromStr for TailCompletion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "lattice" => Ok(Self::Lattice),
            other => Err(format!("unknown tail completion '{other}' (expected none or lattice)")),
        }
    }
}

/// Fitted reference lattices above the cut.
#[derive(Debug, Clone)]
pub struct LatticeReference {
    r: f64,
    levels: usize,
    gamma_n: ComplexMatrix,
    gamma_d: ComplexMatrix,
    clip: f64,
}

impl LatticeReference {
    /// Cut in √t units.
    pub fn cut(&self) -> f64 {
        (self.levels as f64 + 0.25) * std::f64::consts::PI / self.r
    }

    /// Index M of the last Neumann atom below the cut.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn gamma_neumann(&self) -> &ComplexMatrix {
        &self.gamma_n
    }

    pub fn gamma_dirichlet(&self) -> &ComplexMatrix {
        &self.gamma_d
    }

    /// Negative eigenvalue magnitude removed when projecting the fitted weights.
    pub fn clip_magnitude(&self) -> f64 {
        self.clip
    }

    /// Neumann (t, mass) atoms below the cut.
    pub fn neumann_atoms(&self) -> Vec<(f64, f64)> {
        let step = std::f64::consts::PI / self.r;
        (0..=self.levels)
            .map(|m| {
                let k = m as f64 * step;
                (k * k, if m == 0 { 1.0 / self.r } else { 2.0 / self.r })
            })
            .collect()
    }

    /// Dirichlet (t, mass) atoms below the cut.
    pub fn dirichlet_atoms(&self) -> Vec<(f64, f64)> {
        let step = std::f64::consts::PI / self.r;
        (0..self.levels)
            .map(|m| {
                let k = (m as f64 + 0.5) * step;
                (k * k, 2.0 / self.r)
            })
            .collect()
    }

    /// Reference atoms (t, weight) with k_lo < √t ≤ k_hi.
    pub fn atoms_between(&self, k_lo: f64, k_hi: f64) -> Vec<(f64, ComplexMatrix)> {
        let step = std::f64::consts::PI / self.r;
        let mut out = Vec::new();
        let mut m = (k_lo / step).floor().max(0.0) as usize;
        while m as f64 * step <= k_hi {
            for (k, gamma) in [(m as f64 * step, &self.gamma_n), ((m as f64 + 0.5) * step, &self.gamma_d)] {
                if k > k_lo && k <= k_hi {
                    let mass = if k == 0.0 { 1.0 / self.r } else { 2.0 / self.r };
                    out.push((k * k, gamma.scale_real(mass)));
                }
            }
            m += 1;
        }
        out
    }

    /// Adds the reference above the cut: the full lattices minus their atoms
    /// below the cut.
    pub(crate) fn apply(&self, a: &GridOperator, sums: &mut NodeSums) {
        let grid = *a.grid();
        let p = a.p();
        let gamma = &self.gamma_n + &self.gamma_d;
        let offset = &self.gamma_n.scale(C64::new(0.0, -neumann_offset(self.r)))
            + &self.gamma_d.scale(C64::new(0.0, -dirichlet_offset(self.r)));
        for j in 0..grid.n() {
            sums.s.add_block(j * p, j * p, &gamma);
            let linear = gamma.scale(C64::new(0.0, grid.center(j)));
            sums.phi1.add_block(j * p, 0, &(&linear + &offset));
        }
        let weights: Vec<(f64, ComplexMatrix)> = self
            .neumann_atoms()
            .into_iter()
            .map(|(t, m)| (t, self.gamma_n.scale_real(-m)))
            .chain(self.dirichlet_atoms().into_iter().map(|(t, m)| (t, self.gamma_d.scale_real(-m))))
            .collect();
        let refs: Vec<(f64, &ComplexMatrix)> = weights.iter().map(|(t, w)| (*t, w)).collect();
        accumulate(a, &refs, sums);
    }
}

/// Re F(i) for the Neumann lattice, F(z) = Σ w_m/(t_m − z) = −cot(r√z)/√z.
pub(crate) fn neumann_offset(r: f64) -> f64 {
    let k = C64::new(0.0, 1.0).sqrt();
    (-(k * r).cos() / (k * r).sin() / k).re
}

/// Re F(i) for the Dirichlet lattice, F(z) = tan(r√z)/√z.
pub(crate) fn dirichlet_offset(r: f64) -> f64 {
    let k = C64::new(0.0, 1.0).sqrt();
    ((k * r).tan() / k).re
}

/// Fits Γ_N and Γ_D on the last full band below the cut.
pub fn estimate_lattice_reference(data: &HerglotzData, r: f64) -> Result<LatticeReference, InverseError> {
    let step = std::f64::consts::PI / r;
    let t_max = data.tau().window().1;
    let needed = (1.25 * step).powi(2);
    if !(t_max >= needed) {
        return Err(InverseError::WindowTooSmallForCompletion { t_max, needed });
    }
    let levels = (t_max.sqrt() / step - 0.25).floor() as usize;
    let cut = (levels as f64 + 0.25) * step;
    let band_lo = (cut - step).powi(2);
    let p = data.p();
    let mut t0 = ComplexMatrix::zeros(p, p);
    let mut t1 = ComplexMatrix::zeros(p, p);
    for m in data.tau().masses().iter().filter(|m| m.t > band_lo && m.t <= cut * cut) {
        t0 += &m.w;
        t1 += &m.w.scale_real((2.0 * m.t.sqrt() * r).cos());
    }
    let (gamma_n, clip_n) = project_psd(&(&t0 + &t1).scale_real(0.25 * r));
    let (gamma_d, clip_d) = project_psd(&(&t0 - &t1).scale_real(0.25 * r));
    Ok(LatticeReference { r, levels, gamma_n, gamma_d, clip: clip_n.max(clip_d) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herglotz::{Mass, MatrixMeasure};

    fn partial_offset(r: f64, theta: f64, terms: usize) -> f64 {
        (0..terms)
            .map(|m| {
                let k = (m as f64 + theta) * std::f64::consts::PI / r;
                let t = k * k;
                let w = if m == 0 && theta == 0.0 { 1.0 / r } else { 2.0 / r };
                w * t / (1.0 + t * t)
            })
            .sum::<f64>()
    }

    #[test]
    fn offsets_match_lattice_sums() {
        // Φ₁(0) of a lattice is −iΣ w t/(1+t²) = −i·Re F(i).
        for &r in &[0.5, 1.0, 2.0] {
            let tail = 2e-6;
            assert!((neumann_offset(r) - partial_offset(r, 0.0, 400_000)).abs() < tail, "neumann r={r}");
            assert!((dirichlet_offset(r) - partial_offset(r, 0.5, 400_000)).abs() < tail, "dirichlet r={r}");
        }
    }

    fn lattice_data(r: f64, gn: f64, gd: f64, k_max: f64) -> HerglotzData {
        let step = std::f64::consts::PI / r;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut m = 0usize;
        while (m as f64) * step <= k_max {
            let k = m as f64 * step;
            atoms.push((k * k, gn * if m == 0 { 1.0 / r } else { 2.0 / r }));
            let kd = (m as f64 + 0.5) * step;
            if kd <= k_max {
                atoms.push((kd * kd, gd * 2.0 / r));
            }
            m += 1;
        }
        let masses = atoms.into_iter().map(|(t, w)| Mass { t, w: ComplexMatrix::from_real_rows(&[&[w]]).unwrap() }).collect();
        let tau = MatrixMeasure::new(1, masses, (-1.0, k_max * k_max), 1.0).unwrap();
        HerglotzData::new(ComplexMatrix::zeros(1, 1), tau).unwrap()
    }

    #[test]
    fn band_fit_recovers_lattice_weights() {
        let d = lattice_data(1.0, 0.8, 0.3, 10.0);
        let reference = estimate_lattice_reference(&d, 1.0).unwrap();
        assert_eq!(reference.levels(), 2);
        assert!((reference.gamma_neumann()[(0, 0)].re - 0.8).abs() < 1e-12);
        assert!((reference.gamma_dirichlet()[(0, 0)].re - 0.3).abs() < 1e-12);
    }

    #[test]
    fn atoms_between_lists_both_lattices() {
        let d = lattice_data(1.0, 0.8, 0.3, 10.0);
        let reference = estimate_lattice_reference(&d, 1.0).unwrap();
        let pi = std::f64::consts::PI;
        let atoms = reference.atoms_between(0.0, 2.0 * pi);
        let ts: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let expected = [0.25 * pi * pi, pi * pi, 2.25 * pi * pi, 4.0 * pi * pi];
        assert_eq!(ts.len(), expected.len());
        for (t, e) in ts.iter().zip(expected) {
            assert!((t - e).abs() < 1e-9);
        }
        assert!((atoms[1].1[(0, 0)].re - 1.6).abs() < 1e-12);
        assert!((atoms[0].1[(0, 0)].re - 0.6).abs() < 1e-12);
    }

    #[test]
    fn small_window_is_rejected() {
        let d = lattice_data(1.0, 1.0, 0.0, 3.0);
        assert!(matches!(estimate_lattice_reference(&d, 1.0), Err(InverseError::WindowTooSmallForCompletion { .. })));
    }

    #[test]
    fn parses_completion_names() {
        assert_eq!("lattice".parse::<TailCompletion>().unwrap(), TailCompletion::Lattice);
        assert_eq!("none".parse::<TailCompletion>().unwrap(), TailCompletion::None);
        assert!("taper".parse::<TailCompletion>().is_err());
    }
}
