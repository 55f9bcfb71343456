//! Dense complex matrix/vector kernel.
//!
//! Conventions fixed once for the whole crate:
//! - `CMatrix` is row-major; `vec(·)` stacks **columns** (so entry `(i, j)` of
//!   an `m×n` matrix lands at position `j*m + i` of the vectorization).
//!   Builders that need `vec(X^*)` must conjugate explicitly.
//! - A `CVector` is a logical column; row-vector algebra goes through the
//!   `row_*` helpers.
//! - Hermitian flags are asserted, not trusted: `hermitianize` symmetrizes
//!   when the drift is below `1e-12 * (1 + max|A|)` and rejects otherwise.

use ndarray::Array2;
use num_complex::Complex;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use thiserror::Error;

pub type C64 = Complex<f64>;

pub const C_ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const C_ONE: C64 = Complex { re: 1.0, im: 0.0 };
pub const C_I: C64 = Complex { re: 0.0, im: 1.0 };

/// Hermitian drift tolerance relative to `1 + max|A|`.
pub const HERMITIAN_DRIFT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: String, got: String },
    #[error("matrix is not Hermitian (drift {drift:.3e} exceeds tolerance {tol:.3e})")]
    NotHermitian { drift: f64, tol: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("eigensolver failed to converge")]
    EigNoConvergence,
}

/// Dense complex vector (logical column).
#[derive(Clone, PartialEq)]
pub struct CVector {
    data: Vec<C64>,
}

impl CVector {
    pub fn zeros(len: usize) -> Self {
        Self { data: vec![C_ZERO; len] }
    }

    pub fn from_vec(data: Vec<C64>) -> Self {
        Self { data }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> C64) -> Self {
        Self { data: (0..len).map(f).collect() }
    }

    /// Standard basis vector `e_i`.
    pub fn basis(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.data[i] = C_ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.data.iter()
    }

    pub fn conj(&self) -> Self {
        Self { data: self.data.iter().map(|c| c.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { data: self.data.iter().map(|c| c * s).collect() }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Hermitian inner product `self^H other`.
    pub fn dot(&self, other: &Self) -> C64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Outer product `self * other^H`.
    pub fn outer(&self, other: &Self) -> CMatrix {
        let mut m = CMatrix::zeros(self.len(), other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                m[(i, j)] = self.data[i] * other.data[j].conj();
            }
        }
        m
    }

    /// Row-vector times matrix: `self^T * m`, returning a logical column of
    /// length `m.cols`. This is the `h * G`-style product for 1×N channels.
    pub fn row_times_mat(&self, m: &CMatrix) -> CVector {
        assert_eq!(self.len(), m.rows, "row_times_mat: inner dim mismatch");
        let mut out = CVector::zeros(m.cols);
        for j in 0..m.cols {
            let mut acc = C_ZERO;
            for i in 0..m.rows {
                acc += self.data[i] * m[(i, j)];
            }
            out.data[j] = acc;
        }
        out
    }

    /// Row-vector times column vector: `self^T * v` (no conjugation).
    pub fn row_dot(&self, v: &CVector) -> C64 {
        assert_eq!(self.len(), v.len(), "row_dot: length mismatch");
        self.data.iter().zip(&v.data).map(|(a, b)| a * b).sum()
    }

    /// Reshape into an `rows x cols` matrix, inverting `CMatrix::vec`.
    pub fn unvec(&self, rows: usize, cols: usize) -> CMatrix {
        assert_eq!(self.len(), rows * cols, "unvec: size mismatch");
        let mut m = CMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = self.data[j * rows + i];
            }
        }
        m
    }

    /// Kronecker product of two vectors (outer index runs over `self`).
    pub fn kron(&self, other: &CVector) -> CVector {
        let mut out = CVector::zeros(self.len() * other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                out.data[i * other.len() + j] = self.data[i] * other.data[j];
            }
        }
        out
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.scale(C64::new(1.0 / n, 0.0))
        } else {
            self.clone()
        }
    }
}

impl Index<usize> for CVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}

impl Add for &CVector {
    type Output = CVector;
    fn add(self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len());
        CVector::from_fn(self.len(), |i| self.data[i] + other.data[i])
    }
}

impl Sub for &CVector {
    type Output = CVector;
    fn sub(self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len());
        CVector::from_fn(self.len(), |i| self.data[i] - other.data[i])
    }
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CVector[{}]{:?}", self.len(), &self.data)
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C_ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C_ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from row slices of real numbers (test convenience).
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(entries: &CVector) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = entries[i];
        }
        m
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(entries[i], 0.0);
        }
        m
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> CVector {
        CVector::from_fn(self.rows, |i| self[(i, j)])
    }

    pub fn row(&self, i: usize) -> CVector {
        CVector::from_fn(self.cols, |j| self[(i, j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        CMatrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|c| c.conj()).collect(),
        }
    }

    /// Hermitian (conjugate) transpose.
    pub fn h(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|c| c * s).collect(),
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul: inner dim mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C_ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols, v.len(), "mul_vec: dim mismatch");
        CVector::from_fn(self.rows, |i| {
            (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()
        })
    }

    pub fn trace(&self) -> C64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Column-stacking vectorization.
    pub fn vec(&self) -> CVector {
        let mut out = CVector::zeros(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out[j * self.rows + i] = self[(i, j)];
            }
        }
        out
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == C_ZERO {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        out[(i * other.rows + p, j * other.cols + q)] = a * other[(p, q)];
                    }
                }
            }
        }
        out
    }

    /// Hermitian drift `max|A - A^H|`.
    pub fn hermitian_drift(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut drift: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                drift = drift.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        drift
    }

    pub fn is_hermitian(&self) -> bool {
        self.rows == self.cols
            && self.hermitian_drift() <= HERMITIAN_DRIFT_TOL * (1.0 + self.max_abs())
    }

    /// Symmetrize `(A + A^H)/2` when the drift is within tolerance, reject
    /// otherwise.
    pub fn hermitianize(&self) -> Result<CMatrix, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let drift = self.hermitian_drift();
        let tol = HERMITIAN_DRIFT_TOL * (1.0 + self.max_abs());
        if drift > tol {
            return Err(LinalgError::NotHermitian { drift, tol });
        }
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        Ok(m)
    }

    /// Real symmetric embedding `[[Re A, -Im A], [Im A, Re A]]` of a Hermitian
    /// matrix. PSD iff the input is PSD; each eigenvalue appears twice.
    pub fn complex_to_real(&self) -> Result<Array2<f64>, LinalgError> {
        let h = self.hermitianize()?;
        let n = h.rows;
        let mut out = Array2::<f64>::zeros((2 * n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                let e = h[(i, j)];
                out[(i, j)] = e.re;
                out[(i, j + n)] = -e.im;
                out[(i + n, j)] = e.im;
                out[(i + n, j + n)] = e.re;
            }
        }
        Ok(out)
    }

    /// Full Hermitian eigendecomposition via the real embedding. Eigenvalues
    /// ascending; eigenvectors unit-norm with residual `‖Av - λv‖ ≤ 1e-9 ‖A‖`
    /// at desk scale.
    pub fn eigh(&self) -> Result<(Vec<f64>, Vec<CVector>), LinalgError> {
        let n = self.rows;
        if n == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        let emb = self.complex_to_real()?;
        let (vals, vecs) = sym_eig(&emb)?;
        // Every complex eigenvalue shows up twice in the embedding; taking
        // every other sorted value recovers the complex spectrum with the
        // right multiplicities.
        let mut evals = Vec::with_capacity(n);
        let mut evecs: Vec<CVector> = Vec::with_capacity(n);
        for k in 0..n {
            let idx = 2 * k;
            evals.push(vals[idx]);
            let col = vecs.column(idx);
            let mut v = CVector::from_fn(n, |i| C64::new(col[i], col[i + n]));
            // Orthogonalize within the eigenvalue cluster picked so far.
            for prev in evecs.iter() {
                let overlap = prev.dot(&v);
                for i in 0..n {
                    let p = prev[i];
                    v[i] -= overlap * p;
                }
            }
            let nv = v.norm();
            if nv < 1e-12 {
                // Mapped vector collapsed onto an earlier one; use the partner
                // embedded eigenvector instead.
                let col2 = vecs.column(idx + 1);
                v = CVector::from_fn(n, |i| C64::new(col2[i], col2[i + n]));
                for prev in evecs.iter() {
                    let overlap = prev.dot(&v);
                    for i in 0..n {
                        let p = prev[i];
                        v[i] -= overlap * p;
                    }
                }
            }
            evecs.push(v.normalized());
        }
        Ok((evals, evecs))
    }

    pub fn min_eigenvalue(&self) -> Result<f64, LinalgError> {
        let (vals, _) = self.eigh()?;
        Ok(vals.first().copied().unwrap_or(0.0))
    }

    /// PSD test: true iff the minimum eigenvalue is at least `-tol`.
    /// Rejects non-Hermitian input.
    pub fn is_psd(&self, tol: f64) -> Result<bool, LinalgError> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Dominant eigenpair of a Hermitian matrix.
    pub fn max_eigpair(&self) -> Result<(f64, CVector), LinalgError> {
        let (vals, vecs) = self.eigh()?;
        let k = vals.len() - 1;
        Ok((vals[k], vecs[k].clone()))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, other: &CMatrix) -> CMatrix {
        self.matmul(other)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{:.4}{:+.4}i ", self[(i, j)].re, self[(i, j)].im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Real symmetric eigensolver: Householder tridiagonalization + implicit-shift
// QL. Used for the complex routines (via the real embedding) and by the
// interior-point backend for NT scalings.
// ---------------------------------------------------------------------------

/// Eigendecomposition of a dense real symmetric matrix. Returns eigenvalues
/// ascending and the orthonormal eigenvector matrix (columns).
pub fn sym_eig(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), LinalgError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(LinalgError::NotSquare { rows: n, cols: a.ncols() });
    }
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }
    let mut z = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e);
    tqli(&mut d, &mut e, &mut z)?;
    // Sort ascending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, newc)] = z[(r, oldc)];
        }
    }
    Ok((vals, vecs))
}

/// Householder reduction of a real symmetric matrix to tridiagonal form.
fn tred2(a: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = a.nrows();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let mut f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                f = 0.0;
                for j in 0..=l {
                    a[(j, i)] = a[(i, j)] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[(i, k)] * a[(k, j)];
                }
                for k in 0..i {
                    a[(k, j)] -= g * a[(k, i)];
                }
            }
        }
        d[i] = a[(i, i)];
        a[(i, i)] = 1.0;
        for j in 0..i {
            a[(j, i)] = 0.0;
            a[(i, j)] = 0.0;
        }
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix, updating the
/// transformation matrix `z` so its columns become eigenvectors.
fn tqli(d: &mut [f64], e: &mut [f64], z: &mut Array2<f64>) -> Result<(), LinalgError> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(LinalgError::EigNoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if r == 0.0 && m > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{proptest, prop_assert, prop_assert_eq, ProptestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cmatrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        })
    }

    fn rand_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
        let a = rand_cmatrix(rng, n, n);
        (&a + &a.h()).scale(C64::new(0.5, 0.0))
    }

    #[test]
    fn kron_identity_case() {
        let i2 = CMatrix::identity(2);
        let i3 = CMatrix::identity(3);
        assert_eq!(i2.kron(&i3), CMatrix::identity(6));
    }

    #[test]
    fn kron_scalar_block() {
        let swap = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let two = CMatrix::from_real_rows(&[&[2.0]]);
        let expect = CMatrix::from_real_rows(&[&[0.0, 2.0], &[2.0, 0.0]]);
        assert_eq!(swap.kron(&two), expect);
    }

    #[test]
    fn vec_identity_and_row_shape() {
        let v = CMatrix::identity(2).vec();
        assert_eq!(
            v.as_slice(),
            &[C_ONE, C_ZERO, C_ZERO, C_ONE],
            "column stacking of I2"
        );
        // vec of a 1×n row equals its entries in order.
        let row = CMatrix::from_fn(1, 4, |_, j| C64::new(j as f64, -1.0));
        let rv = row.vec();
        for j in 0..4 {
            assert_eq!(rv[j], row[(0, j)]);
        }
    }

    #[test]
    fn vec_kron_identity_oracle() {
        // vec(A·X·B) = (B^T ⊗ A) vec(X), both sides evaluated directly.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = rand_cmatrix(&mut rng, 2, 3);
        let x = rand_cmatrix(&mut rng, 3, 2);
        let b = rand_cmatrix(&mut rng, 2, 2);
        let lhs = a.matmul(&x).matmul(&b).vec();
        let rhs = b.transpose().kron(&a).mul_vec(&x.vec());
        let diff = (&lhs - &rhs).norm();
        assert!(diff < 1e-12, "vec identity residual {diff}");
    }

    #[test]
    fn unvec_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = rand_cmatrix(&mut rng, 4, 3);
        assert_eq!(a.vec().unvec(4, 3), a);
    }

    #[test]
    fn is_psd_trivial_cases() {
        assert!(CMatrix::identity(4).is_psd(1e-9).unwrap());
        let neg = CMatrix::identity(2).scale(C64::new(-1.0, 0.0));
        assert!(!neg.is_psd(1e-9).unwrap());
    }

    #[test]
    fn is_psd_gram_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = rand_cmatrix(&mut rng, 3, 5);
            let gram = x.h().matmul(&x);
            assert!(gram.is_psd(1e-9).unwrap());
        }
    }

    #[test]
    fn is_psd_rejects_non_hermitian() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        assert!(a.is_psd(1e-9).is_err());
    }

    #[test]
    fn max_eigpair_diagonal() {
        let d = CMatrix::diag_real(&[1.0, 2.0, 3.0]);
        let (val, vec) = d.max_eigpair().unwrap();
        assert!((val - 3.0).abs() < 1e-12);
        assert!((vec[2].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn max_eigpair_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = CVector::from_fn(4, |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let m = x.outer(&x);
        let (val, v) = m.max_eigpair().unwrap();
        assert!((val - x.norm_sqr()).abs() < 1e-10 * x.norm_sqr());
        // v matches x up to global phase.
        let overlap = v.dot(&x).norm();
        assert!((overlap - x.norm()).abs() < 1e-8);
    }

    #[test]
    fn max_eigpair_residual_vs_full_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 5, 9, 16] {
            let a = rand_hermitian(&mut rng, n);
            let (val, v) = a.max_eigpair().unwrap();
            let av = a.mul_vec(&v);
            let resid = (&av - &v.scale(C64::new(val, 0.0))).norm();
            let scale = a.frob_norm();
            assert!(resid <= 1e-8 * scale.max(1.0), "residual {resid} at n={n}");
            // Against a power-iteration oracle on |max| eigenvalue.
            let mut y = CVector::from_fn(n, |i| C64::new(1.0 + i as f64, 0.5));
            // Shift so the dominant eigenvalue of (A + sI) is max(eig)+s.
            let shift = a.frob_norm() + 1.0;
            let shifted = &a + &CMatrix::identity(n).scale(C64::new(shift, 0.0));
            for _ in 0..2000 {
                y = shifted.mul_vec(&y).normalized();
            }
            let rayleigh = y.dot(&shifted.mul_vec(&y)).re - shift;
            assert!(
                (rayleigh - val).abs() <= 1e-9 * scale.max(1.0),
                "power-iteration oracle disagrees: {rayleigh} vs {val}"
            );
        }
    }

    #[test]
    fn complex_to_real_real_input_is_block_diag() {
        let a = CMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let e = a.complex_to_real().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(e[(i, j)], a[(i, j)].re);
                assert_eq!(e[(i + 2, j + 2)], a[(i, j)].re);
                assert_eq!(e[(i, j + 2)], 0.0);
                assert_eq!(e[(i + 2, j)], 0.0);
            }
        }
    }

    #[test]
    fn complex_to_real_pauli_y_spectrum() {
        // h = [[0, i], [-i, 0]] has eigenvalues ±1; embedding doubles both.
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = C_I;
        h[(1, 0)] = -C_I;
        let e = h.complex_to_real().unwrap();
        let (vals, _) = sym_eig(&e).unwrap();
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (v, ex) in vals.iter().zip(expect) {
            assert!((v - ex).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn complex_to_real_preserves_psd_status() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let h = rand_hermitian(&mut rng, 4);
            let min_c = h.min_eigenvalue().unwrap();
            let (vals, _) = sym_eig(&h.complex_to_real().unwrap()).unwrap();
            let min_r = vals[0];
            assert!((min_c - min_r).abs() < 1e-9, "{min_c} vs {min_r}");
        }
    }

    #[test]
    fn sym_eig_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in [1usize, 2, 3, 7, 20] {
            let mut a = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen::<f64>() * 2.0 - 1.0;
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            let (vals, vecs) = sym_eig(&a).unwrap();
            let lambda = Array2::from_diag(&ndarray::Array1::from_vec(vals.clone()));
            let recon = vecs.dot(&lambda).dot(&vecs.t());
            let err = (&recon - &a).iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(err < 1e-10 * (n as f64), "reconstruction error {err} at n={n}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

        #[test]
        fn kron_mixed_product(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = rand_cmatrix(&mut rng, 2, 3);
            let b = rand_cmatrix(&mut rng, 3, 2);
            let c = rand_cmatrix(&mut rng, 3, 2);
            let d = rand_cmatrix(&mut rng, 2, 4);
            let lhs = a.kron(&b).matmul(&c.kron(&d));
            let rhs = a.matmul(&c).kron(&b.matmul(&d));
            let err = (&lhs - &rhs).max_abs();
            prop_assert!(err < 1e-11, "mixed product residual {}", err);
        }

        #[test]
        fn vec_identity_property(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(77));
            let m = 1 + (seed % 4) as usize;
            let n = 1 + ((seed / 4) % 4) as usize;
            let p = 1 + ((seed / 16) % 4) as usize;
            let a = rand_cmatrix(&mut rng, m, n);
            let x = rand_cmatrix(&mut rng, n, p);
            let b = rand_cmatrix(&mut rng, p, m);
            let lhs = a.matmul(&x).matmul(&b).vec();
            let rhs = b.transpose().kron(&a).mul_vec(&x.vec());
            prop_assert!((&lhs - &rhs).norm() < 1e-11);
        }

        #[test]
        fn psd_equivalence_under_embedding(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(123));
            let h = rand_hermitian(&mut rng, 3);
            let c = h.is_psd(1e-9).unwrap();
            let (vals, _) = sym_eig(&h.complex_to_real().unwrap()).unwrap();
            let r = vals[0] >= -1e-9;
            prop_assert_eq!(c, r);
        }
    }
}
