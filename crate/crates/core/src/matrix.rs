//! Dense row-major complex matrices and the numerical predicates built on them.
//!
//! Matrices here are small (chirality blocks, per-site dilations), so everything
//! is plain `Vec` storage with straightforward triple loops.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{OqrwError, Result};
use crate::scalar::{re, Real, C};

/// Default tolerance for the positive-semidefinite test.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

#[derive(Clone, PartialEq)]
pub struct CMatrix<R: Real> {
    rows: usize,
    cols: usize,
    data: Vec<C<R>>,
}

impl<R: Real> CMatrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    /// `|i⟩⟨j|` on an `n`-dimensional space.
    pub fn ket_bra(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = C::one();
        m
    }

    /// `|v⟩⟨v|`.
    pub fn outer(v: &[C<R>]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<R>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C<R>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(OqrwError::Dimension("matrix must have at least one row and column".into()));
        }
        if data.len() != rows * cols {
            return Err(OqrwError::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(OqrwError::Dimension("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<C<R>>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(OqrwError::Dimension("ragged matrix rows".into()));
        }
        Self::from_vec(r, c, rows.into_iter().flatten().collect())
    }

    /// Real matrix from `f64` rows; convenient for literals in presets and tests.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == m), "ragged matrix literal");
        Self::from_fn(n, m, |i, j| re(R::lit(rows[i][j])))
    }

    pub fn diag(entries: &[C<R>]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
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

    pub fn as_slice(&self) -> &[C<R>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C<R>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn require_square(&self, what: &str) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(OqrwError::Dimension(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C<R>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: R) -> Self {
        self.scale(re(s))
    }

    /// Kronecker product `a ⊗ b`; row index is `ia * b.rows + ib`.
    pub fn kron(&self, other: &Self) -> Self {
        let (br, bc) = (other.rows, other.cols);
        Self::from_fn(self.rows * br, self.cols * bc, |i, j| {
            self[(i / br, j / bc)] * other[(i % br, j % bc)]
        })
    }

    pub fn trace(&self) -> Result<C<R>> {
        let n = self.require_square("trace")?;
        Ok((0..n).fold(C::zero(), |acc, i| acc + self[(i, i)]))
    }

    /// Real part of the trace, for matrices already known to be square.
    pub(crate) fn trace_re(&self) -> R {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).sum()
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(OqrwError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C<R>]) -> Vec<C<R>> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(C::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// `self * rho * self^*`.
    pub fn conjugate(&self, rho: &Self) -> Self {
        let tmp = self * rho;
        let mut out = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..self.rows {
                let mut acc = C::zero();
                for k in 0..tmp.cols {
                    acc += tmp.data[i * tmp.cols + k] * self.data[j * self.cols + k].conj();
                }
                out.data[i * self.rows + j] = acc;
            }
        }
        out
    }

    /// Entrywise maximum modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> R {
        if self.rows != other.rows || self.cols != other.cols {
            return R::infinity();
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(R::zero(), R::max)
    }

    pub fn max_abs(&self) -> R {
        self.data.iter().map(|z| z.norm()).fold(R::zero(), R::max)
    }

    pub fn is_zero_within(&self, tol: R) -> bool {
        self.max_abs() <= tol
    }

    /// `(m + m^*) / 2`.
    pub fn hermitize(&self) -> Self {
        let half = R::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * half)
    }

    pub fn is_hermitian(&self, tol: R) -> Result<bool> {
        self.require_square("hermiticity test")?;
        Ok(self.max_abs_diff(&self.adjoint()) <= tol)
    }

    /// Eigenvalues of the Hermitian part of `self`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<R>> {
        let n = self.require_square("eigenvalues")?;
        // A = X + iY Hermitian  <=>  [[X, -Y], [Y, X]] real symmetric with doubled spectrum.
        let h = self.hermitize();
        let m = 2 * n;
        let mut s = vec![R::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let z = h[(i, j)];
                s[i * m + j] = z.re;
                s[(i + n) * m + (j + n)] = z.re;
                s[(i + n) * m + j] = z.im;
                s[i * m + (j + n)] = -z.im;
            }
        }
        let mut eig = jacobi_eigenvalues(&mut s, m);
        eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        Ok(eig.chunks(2).map(|p| (p[0] + p[1]) * R::lit(0.5)).collect())
    }

    /// Hermitian within `tol` and every eigenvalue at least `-tol`.
    pub fn is_positive_semidefinite(&self, tol: R) -> Result<bool> {
        if !self.is_hermitian(tol)? {
            return Ok(false);
        }
        let eig = self.hermitian_eigenvalues()?;
        Ok(eig.first().is_none_or(|&lo| lo >= -tol))
    }

    /// `‖m^* m − I‖_max ≤ tol`.
    pub fn is_unitary(&self, tol: R) -> Result<bool> {
        let n = self.require_square("unitarity test")?;
        Ok((&self.adjoint() * self).max_abs_diff(&Self::identity(n)) <= tol)
    }

    /// Converts to another scalar precision.
    pub fn cast<S: Real>(&self) -> CMatrix<S> {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|z| C::new(S::lit(z.re.as_f64()), S::lit(z.im.as_f64())))
                .collect(),
        }
    }

    /// Copies the `(r0.., c0..)` sub-block of the given shape.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }
}

/// Cyclic Jacobi rotations on a real symmetric `n×n` matrix (row-major, destroyed).
fn jacobi_eigenvalues<R: Real>(a: &mut [R], n: usize) -> Vec<R> {
    let eps = R::epsilon();
    for _sweep in 0..100 {
        let mut off = R::zero();
        let mut total = R::zero();
        for i in 0..n {
            for j in 0..n {
                let sq = a[i * n + j] * a[i * n + j];
                total += sq;
                if i != j {
                    off += sq;
                }
            }
        }
        if off <= eps * eps * total || off == R::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == R::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (R::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + R::one()).sqrt());
                let cs = R::one() / (t * t + R::one()).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

impl<R: Real> Index<(usize, usize)> for CMatrix<R> {
    type Output = C<R>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<R> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<R: Real> IndexMut<(usize, usize)> for CMatrix<R> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<R> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<R: Real> Mul for &CMatrix<R> {
    type Output = CMatrix<R>;

    fn mul(self, rhs: Self) -> CMatrix<R> {
        self.try_mul(rhs).expect("matrix product dimension mismatch")
    }
}

impl<R: Real> Add for &CMatrix<R> {
    type Output = CMatrix<R>;

    fn add(self, rhs: Self) -> CMatrix<R> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<R: Real> Sub for &CMatrix<R> {
    type Output = CMatrix<R>;

    fn sub(self, rhs: Self) -> CMatrix<R> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix difference shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<R: Real> AddAssign<&CMatrix<R>> for CMatrix<R> {
    fn add_assign(&mut self, rhs: &CMatrix<R>) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += *b;
        }
    }
}

impl<R: Real> fmt::Debug for CMatrix<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "({:+.6e}{:+.6e}i) ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// Literal format: nested array of `[re, im]` pairs, one inner array per row.
impl<R: Real + Serialize> Serialize for CMatrix<R> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[R; 2]>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de, R: Real + Deserialize<'de>> Deserialize<'de> for CMatrix<R> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[R; 2]>> = Vec::deserialize(deserializer)?;
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[a, b]| C::new(a, b)).collect())
            .collect();
        CMatrix::from_rows(rows).map_err(D::Error::custom)
    }
}
