//! Herglotz representation data (ν, τ) with μ = 0: evaluation, Stieltjes
//! inversion of Weyl samples along a horizontal line, and ν extraction.

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{min_eig_herm, project_psd, ComplexMatrix, C64};
use crate::weyl::WeylSamples;

/// Distance below which an evaluation point counts as sitting on an atom.
pub const POLE_TOL: f64 = 1e-14;

/// Largest admissible ratio of edge density to peak density.
pub const EDGE_DENSITY_RATIO: f64 = 0.01;

/// Relative tolerance for uniform spacing and common height of samples.
const GRID_TOL: f64 = 1e-9;

/// Relative floor on Im φ below which a sample counts as not Herglotz.
pub const NOT_HERGLOTZ_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HerglotzError {
    #[error("evaluation point within {POLE_TOL:e} of the atom at t = {t}")]
    PoleHit { t: f64 },
    #[error("window too small: edge density is {ratio:.3e} of the interior maximum")]
    WindowTooSmall { ratio: f64 },
    #[error("samples must share one height: point {index} differs")]
    MixedHeights { index: usize },
    #[error("samples must be uniformly spaced in Re(lambda): point {index} breaks the spacing")]
    NonUniformGrid { index: usize },
    #[error("resolution too coarse: spacing {dt:e} exceeds height {y:e}")]
    ResolutionTooCoarse { dt: f64, y: f64 },
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("sample {index} is not Herglotz: Im eigenvalue {defect:e}")]
    NotHerglotz { index: usize, defect: f64 },
}

/// One atom of a discrete matrix measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Mass {
    pub t: f64,
    pub w: ComplexMatrix,
}

/// Discrete nondecreasing matrix measure on a window of the real line.
#[derive(Debug, Clone)]
pub struct MatrixMeasure {
    p: usize,
    masses: Vec<Mass>,
    window: (f64, f64),
    captured_fraction: f64,
    clip_magnitude: f64,
}

impl MatrixMeasure {
    /// Validates ordering and positivity; weights are symmetrized.
    pub fn new(p: usize, masses: Vec<Mass>, window: (f64, f64), captured_fraction: f64) -> Result<Self, HerglotzError> {
        if !(window.0 <= window.1) {
            return Err(HerglotzError::InvalidMeasure(format!("window [{}, {}] is empty", window.0, window.1)));
        }
        if !(0.0..=1.0).contains(&captured_fraction) {
            return Err(HerglotzError::InvalidMeasure(format!("captured fraction {captured_fraction} outside [0, 1]")));
        }
        for (k, m) in masses.iter().enumerate() {
            if m.w.rows() != p || m.w.cols() != p {
                return Err(HerglotzError::InvalidMeasure(format!("mass {k} is not {p}x{p}")));
            }
            if !m.t.is_finite() || (k > 0 && !(m.t > masses[k - 1].t)) {
                return Err(HerglotzError::InvalidMeasure(format!("positions not strictly increasing at mass {k}")));
            }
            let norm = m.w.norm_op();
            if !(min_eig_herm(&m.w) >= -1e-12 * norm) || (&m.w - &m.w.adjoint()).norm_max() > 1e-12 * norm.max(1e-300) {
                return Err(HerglotzError::InvalidMeasure(format!("mass {k} is not hermitian p.s.d.")));
            }
        }
        let masses = masses.into_iter().map(|m| Mass { t: m.t, w: m.w.hermitian_part() }).collect();
        Ok(Self { p, masses, window, captured_fraction, clip_magnitude: 0.0 })
    }

    pub fn empty(p: usize, window: (f64, f64)) -> Self {
        Self { p, masses: Vec::new(), window, captured_fraction: 0.0, clip_magnitude: 0.0 }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn masses(&self) -> &[Mass] {
        &self.masses
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn captured_fraction(&self) -> f64 {
        self.captured_fraction
    }

    /// Largest negative eigenvalue magnitude removed by p.s.d. projection.
    pub fn clip_magnitude(&self) -> f64 {
        self.clip_magnitude
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> ComplexMatrix {
        let mut total = ComplexMatrix::zeros(self.p, self.p);
        for m in &self.masses {
            total += &m.w;
        }
        total
    }

    /// Drops masses whose trace is below `rel_floor` times the largest trace.
    /// Returns the pruned measure and the total trace removed.
    pub fn prune(&self, rel_floor: f64) -> (Self, f64) {
        let max_trace = self.masses.iter().map(|m| m.w.trace().re).fold(0.0, f64::max);
        let floor = rel_floor * max_trace;
        let (kept, dropped): (Vec<&Mass>, Vec<&Mass>) = self.masses.iter().partition(|m| m.w.trace().re >= floor);
        let dropped_trace = dropped.iter().map(|m| m.w.trace().re).sum();
        let pruned = Self {
            p: self.p,
            masses: kept.into_iter().cloned().collect(),
            window: self.window,
            captured_fraction: self.captured_fraction,
            clip_magnitude: self.clip_magnitude,
        };
        (pruned, dropped_trace)
    }
}

/// Herglotz data (ν, τ); μ is identically zero.
#[derive(Debug, Clone)]
pub struct HerglotzData {
    nu: ComplexMatrix,
    tau: MatrixMeasure,
}

impl HerglotzData {
    /// `nu` must be Hermitian to 1e-12 relative; it is symmetrized.
    pub fn new(nu: ComplexMatrix, tau: MatrixMeasure) -> Result<Self, HerglotzError> {
        if nu.rows() != tau.p() || nu.cols() != tau.p() {
            return Err(HerglotzError::InvalidMeasure("nu and measure sizes differ".into()));
        }
        if (&nu - &nu.adjoint()).norm_max() > 1e-12 * nu.norm_max().max(1.0) {
            return Err(HerglotzError::InvalidMeasure("nu is not hermitian".into()));
        }
        Ok(Self { nu: nu.hermitian_part(), tau })
    }

    pub fn p(&self) -> usize {
        self.tau.p()
    }

    pub fn nu(&self) -> &ComplexMatrix {
        &self.nu
    }

    pub fn tau(&self) -> &MatrixMeasure {
        &self.tau
    }

    pub fn mu(&self) -> f64 {
        0.0
    }
}

/// φ(λ) = ν + Σ_k (1/(t_k − λ) − t_k/(1 + t_k²))·w_k.
pub fn eval_herglotz(data: &HerglotzData, lambda: C64) -> Result<ComplexMatrix, HerglotzError> {
    let mut phi = data.nu.clone();
    for m in data.tau.masses() {
        let d = C64::new(m.t, 0.0) - lambda;
        if d.norm() < POLE_TOL {
            return Err(HerglotzError::PoleHit { t: m.t });
        }
        let c = C64::new(1.0, 0.0) / d - m.t / (1.0 + m.t * m.t);
        phi += &m.w.scale(c);
    }
    Ok(phi)
}

/// Stieltjes inversion along Im λ = y.
///
/// Samples must share one height y, be uniformly spaced in Re λ with spacing
/// Δt ≤ y, and be given in increasing Re λ. Each weight is
/// Δt·(φ − φ*)/(2πi) projected to the nearest Hermitian p.s.d. matrix.
pub fn stieltjes_invert(samples: &WeylSamples) -> Result<MatrixMeasure, HerglotzError> {
    let pts = samples.points();
    if pts.len() < 3 {
        return Err(HerglotzError::TooFewSamples(pts.len()));
    }
    let y = pts[0].im;
    if let Some(index) = pts.iter().position(|z| (z.im - y).abs() > GRID_TOL * y) {
        return Err(HerglotzError::MixedHeights { index });
    }
    let (t0, t1) = (pts[0].re, pts[pts.len() - 1].re);
    let dt = (t1 - t0) / (pts.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(HerglotzError::NonUniformGrid { index: 1 });
    }
    let spacing_tol = GRID_TOL * (t0.abs() + t1.abs() + dt);
    if let Some(index) = pts.iter().enumerate().position(|(k, z)| (z.re - (t0 + k as f64 * dt)).abs() > spacing_tol) {
        return Err(HerglotzError::NonUniformGrid { index });
    }
    if dt > y * (1.0 + GRID_TOL) {
        return Err(HerglotzError::ResolutionTooCoarse { dt, y });
    }

    for (index, v) in samples.values().iter().enumerate() {
        let defect = min_eig_herm(&v.skew_part_over_i());
        if defect < -NOT_HERGLOTZ_FLOOR * v.norm_max().max(1.0) {
            return Err(HerglotzError::NotHerglotz { index, defect });
        }
    }

    let density: Vec<f64> = samples.values().iter().map(|v| v.skew_part_over_i().trace().re / std::f64::consts::PI).collect();
    let peak = density.iter().copied().fold(0.0, f64::max);
    let edge = density[0].max(density[density.len() - 1]);
    if peak > 0.0 && edge > EDGE_DENSITY_RATIO * peak {
        return Err(HerglotzError::WindowTooSmall { ratio: edge / peak });
    }

    let scale = dt / std::f64::consts::PI;
    let projected: Vec<(ComplexMatrix, f64)> = samples
        .values()
        .par_iter()
        .map(|v| {
            let (w, clip) = project_psd(&v.skew_part_over_i().scale_real(scale));
            (w, clip)
        })
        .collect();
    let clip_magnitude = projected.iter().map(|(_, c)| *c).fold(0.0, f64::max);
    let masses: Vec<Mass> = projected.into_iter().zip(pts).map(|((w, _), z)| Mass { t: z.re, w }).collect();

    // Tail model ρ(t) ~ c/t² beyond each edge integrates to ρ(edge)·|edge|.
    let captured: f64 = masses.iter().map(|m| m.w.trace().re).sum();
    let tail = density[0].max(0.0) * t0.abs().max(dt) + density[density.len() - 1].max(0.0) * t1.abs().max(dt);
    let captured_fraction = if captured + tail > 0.0 { captured / (captured + tail) } else { 0.0 };

    Ok(MatrixMeasure { p: samples.p(), masses, window: (t0, t1), captured_fraction, clip_magnitude })
}

/// Hermitian part of φ(i), which equals ν exactly for μ = 0.
pub fn extract_nu(phi_at_i: &ComplexMatrix) -> ComplexMatrix {
    phi_at_i.hermitian_part()
}

/// Uniform points t + iy for `count` values of t spanning `window`.
pub fn stieltjes_line(y: f64, window: (f64, f64), count: usize) -> Vec<C64> {
    let dt = (window.1 - window.0) / (count - 1) as f64;
    (0..count).map(|k| C64::new(window.0 + k as f64 * dt, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[v]]).unwrap()
    }

    fn data(nu: f64, masses: &[(f64, f64)]) -> HerglotzData {
        let masses = masses.iter().map(|&(t, w)| Mass { t, w: scalar(w) }).collect();
        HerglotzData::new(scalar(nu), MatrixMeasure::new(1, masses, (-10.0, 10.0), 1.0).unwrap()).unwrap()
    }

    fn sample(d: &HerglotzData, y: f64, window: (f64, f64), count: usize) -> WeylSamples {
        let pts = stieltjes_line(y, window, count);
        let vals = pts.iter().map(|&z| eval_herglotz(d, z).unwrap()).collect();
        WeylSamples::new(d.p(), pts, vals).unwrap()
    }

    #[test]
    fn eval_examples() {
        let d = data(0.0, &[(0.0, 1.0)]);
        let l = C64::new(0.3, 0.8);
        assert!((eval_herglotz(&d, l).unwrap()[(0, 0)] + C64::new(1.0, 0.0) / l).norm() < 1e-15);
        let d = data(2.5, &[]);
        assert_eq!(eval_herglotz(&d, l).unwrap(), scalar(2.5));
        let d = data(0.0, &[(1.0, 1.0)]);
        assert!((eval_herglotz(&d, C64::new(0.0, 1.0)).unwrap()[(0, 0)] - C64::new(0.0, 0.5)).norm() < 1e-15);
        let err = eval_herglotz(&d, C64::new(1.0, 0.0)).unwrap_err();
        assert_eq!(err, HerglotzError::PoleHit { t: 1.0 });
    }

    #[test]
    fn poisson_kernel_total_mass() {
        let d = data(0.0, &[(0.0, 1.0)]);
        let m = stieltjes_invert(&sample(&d, 0.01, (-5.0, 5.0), 2001)).unwrap();
        assert!((m.total_mass()[(0, 0)].re - 1.0).abs() < 0.01);
        assert!(m.captured_fraction() > 0.99 && m.captured_fraction() <= 1.0);
    }

    #[test]
    fn constant_function_has_no_mass() {
        let d = data(1.5, &[]);
        let m = stieltjes_invert(&sample(&d, 0.01, (-1.0, 1.0), 201)).unwrap();
        assert!(m.masses().iter().all(|m| m.w.norm_max() <= 1e-12));
    }

    #[test]
    fn two_clusters_keep_their_mass() {
        let d = data(0.0, &[(-1.0, 0.7), (1.0, 1.3)]);
        let m = stieltjes_invert(&sample(&d, 0.01, (-4.0, 4.0), 1601)).unwrap();
        let cluster = |lo: f64, hi: f64| m.masses().iter().filter(|k| k.t > lo && k.t < hi).map(|k| k.w[(0, 0)].re).sum::<f64>();
        assert!((cluster(-4.0, 0.0) - 0.7).abs() < 0.02 * 0.7);
        assert!((cluster(0.0, 4.0) - 1.3).abs() < 0.02 * 1.3);
    }

    #[test]
    fn window_too_small_is_flagged() {
        let d = data(0.0, &[(0.0, 1.0)]);
        let err = stieltjes_invert(&sample(&d, 0.01, (-0.05, 0.05), 21)).unwrap_err();
        assert!(matches!(err, HerglotzError::WindowTooSmall { .. }));
    }

    #[test]
    fn coarse_resolution_is_flagged() {
        let d = data(0.0, &[(0.0, 1.0)]);
        let err = stieltjes_invert(&sample(&d, 0.01, (-5.0, 5.0), 101)).unwrap_err();
        assert!(matches!(err, HerglotzError::ResolutionTooCoarse { .. }));
    }

    #[test]
    fn nu_recovered_from_value_at_i() {
        let d = data(-0.75, &[(-2.0, 0.4), (0.3, 0.2), (4.0, 1.1)]);
        let nu = extract_nu(&eval_herglotz(&d, C64::new(0.0, 1.0)).unwrap());
        assert!((nu[(0, 0)].re + 0.75).abs() < 1e-14 && nu[(0, 0)].im == 0.0);
        let minus_inv = data(0.0, &[(0.0, 1.0)]);
        assert!(extract_nu(&eval_herglotz(&minus_inv, C64::new(0.0, 1.0)).unwrap()).norm_max() < 1e-16);
    }

    #[test]
    fn pruning_drops_small_masses() {
        let d = data(0.0, &[(0.0, 1.0), (1.0, 1e-6), (2.0, 0.5)]);
        let (pruned, dropped) = d.tau().prune(1e-4);
        assert_eq!(pruned.len(), 2);
        assert!((dropped - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn rejects_unordered_or_indefinite_masses() {
        let bad_order = vec![Mass { t: 1.0, w: scalar(1.0) }, Mass { t: 0.0, w: scalar(1.0) }];
        assert!(MatrixMeasure::new(1, bad_order, (-1.0, 1.0), 1.0).is_err());
        let negative = vec![Mass { t: 0.0, w: scalar(-1.0) }];
        assert!(MatrixMeasure::new(1, negative, (-1.0, 1.0), 1.0).is_err());
    }
}
