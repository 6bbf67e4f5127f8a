//! JSON artifacts. Complex scalars are `[re, im]`, matrices are row-major
//! nested arrays, and every file carries `"format_version": 1`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use cansys::herglotz::{HerglotzData, Mass, MatrixMeasure};
use cansys::linalg::{ComplexMatrix, C64};
use cansys::model::{BetaProfile, Grid, HamiltonianSamples};
use cansys::weyl::WeylSamples;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

pub type JsonComplex = [f64; 2];
pub type JsonMatrix = Vec<Vec<JsonComplex>>;

pub fn complex_to_json(z: C64) -> JsonComplex {
    [z.re, z.im]
}

pub fn complex_from_json(z: JsonComplex) -> C64 {
    C64::new(z[0], z[1])
}

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.rows()).map(|i| m.row(i).iter().map(|&z| complex_to_json(z)).collect()).collect()
}

pub fn matrix_from_json(m: &JsonMatrix, what: &str) -> Result<ComplexMatrix, CliError> {
    let rows: Vec<Vec<C64>> = m.iter().map(|r| r.iter().map(|&z| complex_from_json(z)).collect()).collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

fn matrices_from_json(ms: &[JsonMatrix], what: &str) -> Result<Vec<ComplexMatrix>, CliError> {
    ms.iter().enumerate().map(|(k, m)| matrix_from_json(m, &format!("{what}[{k}]"))).collect()
}

fn check_version(v: u32, file: &str) -> Result<(), CliError> {
    if v != FORMAT_VERSION {
        return Err(CliError::Input(format!("{file}: unsupported format_version {v}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

/// Matrix literal from the command line: nested arrays whose entries are
/// real numbers or `[re, im]` pairs.
pub fn parse_matrix_literal(text: &str) -> Result<ComplexMatrix, CliError> {
    let bad = |m: String| CliError::Input(format!("matrix literal {text:?}: {m}"));
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let rows = value.as_array().ok_or_else(|| bad("expected an array of rows".into()))?;
    let parse_entry = |v: &serde_json::Value| -> Option<C64> {
        match v {
            serde_json::Value::Number(x) => Some(C64::new(x.as_f64()?, 0.0)),
            serde_json::Value::Array(pair) if pair.len() == 2 => Some(C64::new(pair[0].as_f64()?, pair[1].as_f64()?)),
            _ => None,
        }
    };
    let parsed: Option<Vec<Vec<C64>>> =
        rows.iter().map(|row| row.as_array().and_then(|r| r.iter().map(parse_entry).collect())).collect();
    let parsed = parsed.ok_or_else(|| bad("entries must be numbers or [re, im] pairs".into()))?;
    ComplexMatrix::from_rows(&parsed).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaFile {
    pub format_version: u32,
    pub p: usize,
    pub r: f64,
    pub n: usize,
    pub beta0: JsonMatrix,
    pub beta: Vec<JsonMatrix>,
    pub dbeta: Vec<JsonMatrix>,
}

impl BetaFile {
    pub fn from_profile(profile: &BetaProfile) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            p: profile.p(),
            r: profile.grid().r(),
            n: profile.grid().n(),
            beta0: matrix_to_json(profile.beta0()),
            beta: profile.beta().iter().map(matrix_to_json).collect(),
            dbeta: profile.dbeta().iter().map(matrix_to_json).collect(),
        }
    }

    pub fn to_profile(&self) -> Result<BetaProfile, CliError> {
        check_version(self.format_version, "beta.json")?;
        let grid = Grid::new(self.r, self.n)?;
        Ok(BetaProfile::new(
            self.p,
            grid,
            matrix_from_json(&self.beta0, "beta0")?,
            matrices_from_json(&self.beta, "beta")?,
            matrices_from_json(&self.dbeta, "dbeta")?,
        )?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeylFile {
    pub format_version: u32,
    pub p: usize,
    pub y: f64,
    pub points: Vec<JsonComplex>,
    pub values: Vec<JsonMatrix>,
    pub anchor_phi_at_i: JsonMatrix,
}

impl WeylFile {
    pub fn new(y: f64, samples: &WeylSamples, anchor: &ComplexMatrix) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            p: samples.p(),
            y,
            points: samples.points().iter().map(|&z| complex_to_json(z)).collect(),
            values: samples.values().iter().map(matrix_to_json).collect(),
            anchor_phi_at_i: matrix_to_json(anchor),
        }
    }

    pub fn samples(&self) -> Result<(WeylSamples, ComplexMatrix), CliError> {
        check_version(self.format_version, "weyl.json")?;
        let points = self.points.iter().map(|&z| complex_from_json(z)).collect();
        let values = matrices_from_json(&self.values, "values")?;
        let samples = WeylSamples::new(self.p, points, values).map_err(cansys::pipeline::PipelineError::from)?;
        let anchor = matrix_from_json(&self.anchor_phi_at_i, "anchor_phi_at_i")?;
        if anchor.rows() != self.p || anchor.cols() != self.p {
            return Err(CliError::Input(format!("anchor_phi_at_i must be {0}x{0}", self.p)));
        }
        Ok((samples, anchor))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassRecord {
    pub t: f64,
    pub w: JsonMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureFile {
    pub format_version: u32,
    pub p: usize,
    pub nu: JsonMatrix,
    pub masses: Vec<MassRecord>,
    pub window: [f64; 2],
    pub captured_fraction: f64,
    /// Largest negative eigenvalue removed by the p.s.d. projection.
    #[serde(default)]
    pub clip_magnitude: f64,
}

impl MeasureFile {
    pub fn from_data(data: &HerglotzData) -> Self {
        let tau = data.tau();
        Self {
            format_version: FORMAT_VERSION,
            p: data.p(),
            nu: matrix_to_json(data.nu()),
            masses: tau.masses().iter().map(|m| MassRecord { t: m.t, w: matrix_to_json(&m.w) }).collect(),
            window: [tau.window().0, tau.window().1],
            captured_fraction: tau.captured_fraction(),
            clip_magnitude: tau.clip_magnitude(),
        }
    }

    pub fn to_data(&self) -> Result<HerglotzData, CliError> {
        check_version(self.format_version, "measure.json")?;
        let masses = self
            .masses
            .iter()
            .enumerate()
            .map(|(k, m)| Ok(Mass { t: m.t, w: matrix_from_json(&m.w, &format!("masses[{k}].w"))? }))
            .collect::<Result<Vec<_>, CliError>>()?;
        let pipeline = |e| CliError::Pipeline(cansys::pipeline::PipelineError::Herglotz(e));
        let tau = MatrixMeasure::new(self.p, masses, (self.window[0], self.window[1]), self.captured_fraction).map_err(pipeline)?;
        HerglotzData::new(matrix_from_json(&self.nu, "nu")?, tau).map_err(pipeline)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub format_version: u32,
    pub p: usize,
    pub r: f64,
    pub n: usize,
    #[serde(rename = "H")]
    pub h: Vec<JsonMatrix>,
}

impl HamiltonianFile {
    pub fn from_samples(h: &HamiltonianSamples) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            p: h.p(),
            r: h.grid().r(),
            n: h.grid().n(),
            h: h.samples().iter().map(matrix_to_json).collect(),
        }
    }

    pub fn to_samples(&self) -> Result<HamiltonianSamples, CliError> {
        check_version(self.format_version, "hamiltonian.json")?;
        Ok(HamiltonianSamples::new(self.p, Grid::new(self.r, self.n)?, matrices_from_json(&self.h, "H")?)?)
    }
}

/// One row of the per-cell error curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub error: f64,
    pub truth_norm: f64,
    pub recovered_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub residuals: BTreeMap<String, f64>,
    pub error_curve: Vec<CurvePoint>,
    /// The error curve as CSV with a header row, for plotting tools.
    pub error_curve_csv: String,
}

impl ReportFile {
    pub fn new(config: serde_json::Value, residuals: BTreeMap<String, f64>, error_curve: Vec<CurvePoint>) -> Self {
        let mut csv = String::from("x,error,truth_norm,recovered_norm\n");
        for c in &error_curve {
            csv.push_str(&format!("{},{},{},{}\n", c.x, c.error, c.truth_norm, c.recovered_norm));
        }
        Self { format_version: FORMAT_VERSION, config, residuals, error_curve, error_curve_csv: csv }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes to a temporary file in the target directory and renames it into
/// place, so a failed command never leaves a partial file.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    serde_json::to_writer(&mut tmp, value).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.write_all(b"\n").map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_literal_accepts_real_and_complex_entries() {
        let m = parse_matrix_literal("[[0,1],[-1,0]]").unwrap();
        assert_eq!(m[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 0)], C64::new(-1.0, 0.0));
        let z = parse_matrix_literal("[[[0, 2]]]").unwrap();
        assert_eq!(z[(0, 0)], C64::new(0.0, 2.0));
        assert!(parse_matrix_literal("[[1,2],[3]]").is_err());
        assert!(parse_matrix_literal("[[\"a\"]]").is_err());
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = ComplexMatrix::from_fn(2, 3, |i, j| C64::new(i as f64 - 0.5, j as f64 * 1e-17));
        assert_eq!(matrix_from_json(&matrix_to_json(&m), "m").unwrap(), m);
    }
}
