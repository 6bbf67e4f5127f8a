//! Dense complex matrix kernels: products, Hermitian factorizations with
//! incremental extension, triangular solves, matrix exponentials and
//! Hermitian eigenvalue bounds.
//!
//! Matrices are stored row-major. Small systems (LU solves, eigenvalues,
//! singular values) are delegated to `nalgebra`; large products go through
//! the `matrixmultiply` complex GEMM.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Relative Cholesky pivot floor, scaled by the largest diagonal magnitude seen.
pub const POSITIVITY_FLOOR: f64 = 1e-13;

/// Relative floor for triangular diagonals, scaled by the largest diagonal magnitude.
pub const SINGULARITY_FLOOR: f64 = 1e-14;

/// Products with fewer multiply-adds than this use the plain triple loop.
const GEMM_THRESHOLD: usize = 32 * 32 * 32;

/// Matrices with at most this many entries get an exact SVD-based operator norm.
const EXACT_NORM_ENTRIES: usize = 64 * 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("pivot {index} not positive: {pivot:e} <= floor {floor:e}")]
    PositivityFailure { index: usize, pivot: f64, floor: f64 },
    #[error("diagonal entry {index} is singular ({magnitude:e})")]
    SingularDiagonal { index: usize, magnitude: f64 },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(LinalgError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<C64>> =
            rows.iter().map(|r| r.iter().map(|&v| C64::new(v, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// (M + M*)/2.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square(), "hermitian part of a non-square matrix");
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// (M − M*)/(2i).
    pub fn skew_part_over_i(&self) -> Self {
        assert!(self.is_square(), "skew part of a non-square matrix");
        let half_over_i = C64::new(0.0, -0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] - self[(j, i)].conj()) * half_over_i)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Copies the `nr`×`nc` block starting at (`r0`, `c0`).
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &ComplexMatrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            let dst = (r0 + i) * self.cols + c0;
            self.data[dst..dst + b.cols].copy_from_slice(b.row(i));
        }
    }

    pub fn add_block(&mut self, r0: usize, c0: usize, b: &ComplexMatrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            let dst = (r0 + i) * self.cols + c0;
            for (d, s) in self.data[dst..dst + b.cols].iter_mut().zip(b.row(i)) {
                *d += *s;
            }
        }
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn vstack(blocks: &[ComplexMatrix]) -> Self {
        let cols = blocks[0].cols;
        assert!(blocks.iter().all(|b| b.cols == cols), "vstack column mismatch");
        let rows = blocks.iter().map(|b| b.rows).sum();
        let data = blocks.iter().flat_map(|b| b.data.iter().copied()).collect();
        Self { rows, cols, data }
    }

    /// Places matrices with equal row counts side by side.
    pub fn hstack(blocks: &[ComplexMatrix]) -> Self {
        let rows = blocks[0].rows;
        assert!(blocks.iter().all(|b| b.rows == rows), "hstack row mismatch");
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let mut c0 = 0;
        for b in blocks {
            m.set_block(0, c0, b);
            c0 += b.cols;
        }
        m
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        let (p, q) = (other.rows, other.cols);
        Self::from_fn(self.rows * p, self.cols * q, |i, j| self[(i / p, j / q)] * other[(i % p, j % q)])
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(m, n);
        if m * k * n < GEMM_THRESHOLD {
            for i in 0..m {
                let orow = &mut out.data[i * n..(i + 1) * n];
                for l in 0..k {
                    let a = self.data[i * k + l];
                    if a == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (o, b) in orow.iter_mut().zip(other.row(l)) {
                        *o += a * *b;
                    }
                }
            }
        } else {
            // SAFETY: Complex64 is repr(C) with layout [re, im]; the slices are
            // sized m×k, k×n and m×n with the row/column strides given.
            unsafe {
                matrixmultiply::zgemm(
                    matrixmultiply::CGemmOption::Standard,
                    matrixmultiply::CGemmOption::Standard,
                    m,
                    k,
                    n,
                    [1.0, 0.0],
                    self.data.as_ptr() as *const [f64; 2],
                    k as isize,
                    1,
                    other.data.as_ptr() as *const [f64; 2],
                    n as isize,
                    1,
                    [0.0, 0.0],
                    out.data.as_mut_ptr() as *mut [f64; 2],
                    n as isize,
                    1,
                );
            }
        }
        out
    }

    /// Largest entry magnitude.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Spectral norm (largest singular value).
    ///
    /// Exact via SVD for small matrices; deterministic power iteration on
    /// M*M for large ones (relative accuracy about 1e-10).
    pub fn norm_op(&self) -> f64 {
        if self.rows * self.cols <= EXACT_NORM_ENTRIES {
            let svd = self.to_nalgebra().svd(false, false);
            return svd.singular_values.iter().copied().fold(0.0, f64::max);
        }
        power_norm(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

fn power_norm(m: &ComplexMatrix) -> f64 {
    let n = m.cols;
    let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + 1e-3 * (i % 7) as f64, 0.0)).collect();
    let mut sigma2 = 0.0;
    for _ in 0..500 {
        let norm_v = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm_v == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|z| *z /= norm_v);
        let mut mv = vec![C64::new(0.0, 0.0); m.rows];
        for (i, out) in mv.iter_mut().enumerate() {
            *out = m.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let mut w = vec![C64::new(0.0, 0.0); n];
        for (i, x) in mv.iter().enumerate() {
            for (wj, a) in w.iter_mut().zip(m.row(i)) {
                *wj += a.conj() * x;
            }
        }
        let next = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let converged = (next - sigma2).abs() <= 1e-13 * next;
        sigma2 = next;
        v = w;
        if converged {
            break;
        }
    }
    sigma2.sqrt()
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add dimension mismatch");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += *b);
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub dimension mismatch");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= *b);
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Lower-triangular Cholesky factor that can be extended by trailing blocks.
///
/// Rows are stored packed (row `i` holds `i + 1` entries), so appending never
/// moves existing rows.
#[derive(Debug, Clone, Default)]
pub struct CholeskyFactor {
    rows: Vec<Vec<C64>>,
    max_diag: f64,
}

impl CholeskyFactor {
    pub fn empty() -> Self {
        Self::default()
    }

    /// One-shot factorization of a Hermitian matrix.
    pub fn factor(s: &ComplexMatrix) -> Result<Self, LinalgError> {
        if !s.is_square() {
            return Err(LinalgError::Dimension("cholesky of a non-square matrix".into()));
        }
        let mut f = Self::empty();
        for i in 0..s.rows {
            f.append_row(|c| s[(i, c)], |c| s[(c, i)])?;
        }
        Ok(f)
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    /// Largest diagonal magnitude of the factored matrix seen so far.
    pub fn max_diagonal(&self) -> f64 {
        self.max_diag
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        if j <= i {
            self.rows[i][j]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.rows[i]
    }

    /// Dense copy of L.
    pub fn l(&self) -> ComplexMatrix {
        let n = self.order().max(1);
        ComplexMatrix::from_fn(n, n, |i, j| if i < self.order() { self.entry(i, j) } else { C64::new(0.0, 0.0) })
    }

    /// Extends the factor by the block row `[trailing_rows, trailing_corner]`.
    ///
    /// `trailing_rows` is k×order (pass any k×1 placeholder when the factor is
    /// empty), `trailing_corner` is k×k Hermitian. On error the factor is left
    /// unchanged.
    pub fn append(
        &mut self,
        trailing_rows: &ComplexMatrix,
        trailing_corner: &ComplexMatrix,
    ) -> Result<(), LinalgError> {
        let m = self.order();
        let k = trailing_corner.rows;
        if !trailing_corner.is_square() || (m > 0 && (trailing_rows.rows != k || trailing_rows.cols != m)) {
            return Err(LinalgError::Dimension(format!(
                "appending {}x{} rows and {}x{} corner to order {m}",
                trailing_rows.rows, trailing_rows.cols, trailing_corner.rows, trailing_corner.cols
            )));
        }
        let saved_len = self.rows.len();
        let saved_max = self.max_diag;
        for i in 0..k {
            let result = self.append_row(
                |c| if c < m { trailing_rows[(i, c)] } else { trailing_corner[(i, c - m)] },
                |c| trailing_corner[(c - m, i)],
            );
            if let Err(e) = result {
                self.rows.truncate(saved_len);
                self.max_diag = saved_max;
                return Err(e);
            }
        }
        Ok(())
    }

    /// Appends one row of the factored matrix. `lower(c)` gives entry (q, c)
    /// for c ≤ q and `upper(c)` gives entry (c, q); the two are averaged on
    /// the corner so the input is symmetrized.
    fn append_row(
        &mut self,
        lower: impl Fn(usize) -> C64,
        upper: impl Fn(usize) -> C64,
    ) -> Result<(), LinalgError> {
        let q = self.order();
        let mut row = Vec::with_capacity(q + 1);
        for c in 0..q {
            let a = lower(c);
            let lc = &self.rows[c];
            let dot: C64 = row.iter().zip(&lc[..c]).map(|(x, y): (&C64, &C64)| x * y.conj()).sum();
            row.push((a - dot) / lc[c].re);
        }
        let a_qq = (lower(q).re + upper(q).re) * 0.5;
        self.max_diag = self.max_diag.max(a_qq.abs());
        let pivot = a_qq - row.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let floor = POSITIVITY_FLOOR * self.max_diag;
        if !(pivot > floor) {
            return Err(LinalgError::PositivityFailure { index: q, pivot, floor });
        }
        row.push(C64::new(pivot.sqrt(), 0.0));
        self.rows.push(row);
        Ok(())
    }

    /// Solves L_m X = B with L_m the leading m×m block of L.
    pub fn forward_solve_leading(&self, m: usize, b: &ComplexMatrix) -> ComplexMatrix {
        assert!(m <= self.order() && b.rows == m, "forward solve dimension mismatch");
        let mut x = b.clone();
        for i in 0..m {
            let li = &self.rows[i];
            for j in 0..i {
                let l = li[j];
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..b.cols {
                    let v = x[(j, c)];
                    x[(i, c)] -= l * v;
                }
            }
            let d = li[i].re;
            for c in 0..b.cols {
                x[(i, c)] /= d;
            }
        }
        x
    }

    /// Solves L_m* X = B with L_m the leading m×m block of L.
    pub fn adjoint_solve_leading(&self, m: usize, b: &ComplexMatrix) -> ComplexMatrix {
        assert!(m <= self.order() && b.rows == m, "adjoint solve dimension mismatch");
        let mut x = b.clone();
        for i in (0..m).rev() {
            let d = self.rows[i][i].re;
            for c in 0..b.cols {
                x[(i, c)] /= d;
            }
            for j in 0..i {
                let l = self.rows[i][j].conj();
                for c in 0..b.cols {
                    let v = x[(i, c)];
                    x[(j, c)] -= l * v;
                }
            }
        }
        x
    }

    /// Solves S_m X = B where S_m = L_m L_m*.
    pub fn solve_leading(&self, m: usize, b: &ComplexMatrix) -> ComplexMatrix {
        self.adjoint_solve_leading(m, &self.forward_solve_leading(m, b))
    }
}

/// Functional form of [`CholeskyFactor::append`].
pub fn cholesky_append(
    mut factor: CholeskyFactor,
    trailing_rows: &ComplexMatrix,
    trailing_corner: &ComplexMatrix,
) -> Result<CholeskyFactor, LinalgError> {
    factor.append(trailing_rows, trailing_corner)?;
    Ok(factor)
}

/// Solves L X = B by forward substitution for lower-triangular L.
pub fn lower_solve(l: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if !l.is_square() || l.rows != b.rows {
        return Err(LinalgError::Dimension("lower_solve shapes".into()));
    }
    let n = l.rows;
    let scale = (0..n).map(|i| l[(i, i)].norm()).fold(0.0, f64::max);
    let floor = SINGULARITY_FLOOR * scale;
    let mut x = b.clone();
    for i in 0..n {
        let d = l[(i, i)];
        if !(d.norm() > floor) {
            return Err(LinalgError::SingularDiagonal { index: i, magnitude: d.norm() });
        }
        for j in 0..i {
            let lij = l[(i, j)];
            if lij == C64::new(0.0, 0.0) {
                continue;
            }
            for c in 0..b.cols {
                let v = x[(j, c)];
                x[(i, c)] -= lij * v;
            }
        }
        for c in 0..b.cols {
            x[(i, c)] /= d;
        }
    }
    Ok(x)
}

/// Matrix exponential by scaling and squaring around a Taylor series.
///
/// The scaled argument has 1-norm at most 1/2 and the series is summed until
/// the next term is below unit roundoff, so nilpotent inputs terminate early.
pub fn matrix_exp(m: &ComplexMatrix) -> ComplexMatrix {
    assert!(m.is_square(), "matrix_exp of a non-square matrix");
    let norm = m.norm_one();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m.scale_real(0.5f64.powi(squarings));
    let mut sum = ComplexMatrix::identity(m.rows);
    let mut term = ComplexMatrix::identity(m.rows);
    for k in 1..=40 {
        term = term.matmul(&scaled).scale_real(1.0 / k as f64);
        sum += &term;
        let t = term.norm_one();
        if t == 0.0 || t <= f64::EPSILON * 0.25 * sum.norm_one() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn eig_herm(m: &ComplexMatrix) -> Vec<f64> {
    let h = m.hermitian_part().to_nalgebra();
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigen-decomposition of the Hermitian part: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
pub fn eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let h = m.hermitian_part().to_nalgebra();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.rows;
    let vecs = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eig_herm(m: &ComplexMatrix) -> f64 {
    eig_herm(m)[0]
}

/// Nearest Hermitian p.s.d. matrix in Frobenius norm, plus the magnitude of
/// the most negative eigenvalue removed (0 when nothing was clipped).
pub fn project_psd(m: &ComplexMatrix) -> (ComplexMatrix, f64) {
    let (vals, vecs) = eigh(m);
    let clip = vals.iter().copied().fold(0.0f64, |acc, v| acc.max(-v));
    if clip == 0.0 {
        return (m.hermitian_part(), 0.0);
    }
    let n = m.rows;
    let out = ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| vecs[(i, k)] * vecs[(j, k)].conj() * vals[k].max(0.0)).sum()
    });
    (out.hermitian_part(), clip)
}

/// Solves M X = B by LU with partial pivoting.
pub fn solve(m: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if !m.is_square() || m.rows != b.rows {
        return Err(LinalgError::Dimension("solve shapes".into()));
    }
    let lu = m.to_nalgebra().lu();
    let x = lu.solve(&b.to_nalgebra()).ok_or(LinalgError::Singular)?;
    let out = ComplexMatrix::from_nalgebra(&x);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(LinalgError::Singular)
    }
}

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    solve(m, &ComplexMatrix::identity(m.rows))
}

pub fn det(m: &ComplexMatrix) -> C64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    m.to_nalgebra().determinant()
}

/// Spectral condition number ‖M‖‖M⁻¹‖; infinite for singular input.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let svd = m.to_nalgebra().svd(false, false);
    let s = &svd.singular_values;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn real(rows: &[&[f64]]) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(rows).unwrap()
    }

    #[test]
    fn append_scalar_corner() {
        let f = cholesky_append(CholeskyFactor::empty(), &real(&[&[0.0]]), &real(&[&[4.0]])).unwrap();
        assert_eq!(f.l(), real(&[&[2.0]]));
    }

    #[test]
    fn append_extends_existing_factor() {
        let f = cholesky_append(CholeskyFactor::empty(), &real(&[&[0.0]]), &real(&[&[4.0]])).unwrap();
        let f = cholesky_append(f, &real(&[&[2.0]]), &real(&[&[5.0]])).unwrap();
        assert_eq!(f.l(), real(&[&[2.0, 0.0], &[1.0, 2.0]]));
        let l = f.l();
        assert_eq!(l.matmul(&l.adjoint()), real(&[&[4.0, 2.0], &[2.0, 5.0]]));
    }

    #[test]
    fn append_rejects_negative_pivot() {
        let err = cholesky_append(CholeskyFactor::empty(), &real(&[&[0.0]]), &real(&[&[-1.0]])).unwrap_err();
        assert!(matches!(err, LinalgError::PositivityFailure { index: 0, .. }));
    }

    #[test]
    fn failed_append_leaves_factor_intact() {
        let mut f = CholeskyFactor::empty();
        f.append(&real(&[&[0.0]]), &real(&[&[4.0]])).unwrap();
        let err = f.append(&real(&[&[2.0]]), &real(&[&[1.0]]));
        assert!(err.is_err());
        assert_eq!(f.order(), 1);
        assert_eq!(f.l(), real(&[&[2.0]]));
    }

    #[test]
    fn one_shot_factor_matches_increments() {
        let s = ComplexMatrix::from_rows(&[
            vec![c(4.0, 0.0), c(1.0, 1.0), c(0.0, -1.0)],
            vec![c(1.0, -1.0), c(3.0, 0.0), c(0.5, 0.0)],
            vec![c(0.0, 1.0), c(0.5, 0.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let f = CholeskyFactor::factor(&s).unwrap();
        let l = f.l();
        assert!((&l.matmul(&l.adjoint()) - &s).norm_max() < 1e-14);
    }

    #[test]
    fn lower_solve_identity_and_substitution() {
        let b = real(&[&[1.0, -3.0], &[2.0, 7.0]]);
        assert_eq!(lower_solve(&ComplexMatrix::identity(2), &b).unwrap(), b);
        let l = real(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let x = lower_solve(&l, &real(&[&[1.0], &[2.0]])).unwrap();
        assert_eq!(x, real(&[&[1.0], &[1.0]]));
    }

    #[test]
    fn lower_solve_flags_zero_diagonal() {
        let l = real(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let err = lower_solve(&l, &real(&[&[1.0], &[2.0]])).unwrap_err();
        assert!(matches!(err, LinalgError::SingularDiagonal { index: 1, .. }));
    }

    #[test]
    fn exp_of_zero_and_nilpotent() {
        let z = ComplexMatrix::zeros(3, 3);
        assert_eq!(matrix_exp(&z), ComplexMatrix::identity(3));
        let n = ComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(3.0, -2.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let e = matrix_exp(&n);
        assert!((&e - &(&ComplexMatrix::identity(2) + &n)).norm_max() < 1e-15);
    }

    #[test]
    fn exp_of_rotation_generator() {
        // J² = I gives exp(iθJ) = cos θ I + i sin θ J.
        let j = real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        for &theta in &[0.3, 1.7, 4.0, 9.5] {
            let e = matrix_exp(&j.scale(c(0.0, theta)));
            let expect = &ComplexMatrix::identity(2).scale_real(theta.cos()) + &j.scale(c(0.0, theta.sin()));
            assert!((&e - &expect).norm_max() < 1e-13, "theta {theta}");
        }
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(min_eig_herm(&ComplexMatrix::identity(3)), 1.0);
        assert!((min_eig_herm(&real(&[&[3.0, 0.0], &[0.0, -2.0]])) + 2.0).abs() < 1e-15);
        assert!((min_eig_herm(&real(&[&[2.0, 1.0], &[1.0, 2.0]])) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn psd_projection_clips_negative_part() {
        let (p, clip) = project_psd(&real(&[&[1.0, 0.0], &[0.0, -0.5]]));
        assert!((clip - 0.5).abs() < 1e-15);
        assert!((&p - &real(&[&[1.0, 0.0], &[0.0, 0.0]])).norm_max() < 1e-15);
    }

    #[test]
    fn large_products_match_small_loop() {
        let a = ComplexMatrix::from_fn(40, 37, |i, j| c((i * 3 + j) as f64 * 0.01, (i as f64 - j as f64) * 0.02));
        let b = ComplexMatrix::from_fn(37, 41, |i, j| c(((i * j) % 5) as f64, 0.1 * j as f64));
        let fast = a.matmul(&b);
        let slow = ComplexMatrix::from_fn(40, 41, |i, j| (0..37).map(|k| a[(i, k)] * b[(k, j)]).sum());
        assert!((&fast - &slow).norm_max() < 1e-11);
    }

    #[test]
    fn operator_norm_paths_agree() {
        let a = ComplexMatrix::from_fn(70, 70, |i, j| c(1.0 / (1.0 + i as f64 + j as f64), 0.0));
        let exact = a.to_nalgebra().svd(false, false).singular_values.iter().copied().fold(0.0, f64::max);
        assert!((a.norm_op() - exact).abs() < 1e-9 * exact);
    }
}
