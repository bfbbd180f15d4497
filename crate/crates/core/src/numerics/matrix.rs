use std::fmt;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
///
/// Zero-row matrices are allowed (an empty batch keeps its column count);
/// every public constructor rejects non-finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix<T>", into = "RawMatrix<T>")]
#[serde(bound(
    serialize = "T: Float + Serialize",
    deserialize = "T: Float + Deserialize<'de>"
))]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Float> TryFrom<RawMatrix<T>> for Matrix<T> {
    type Error = Error;

    fn try_from(raw: RawMatrix<T>) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.values)
    }
}

impl<T> From<Matrix<T>> for RawMatrix<T> {
    fn from(m: Matrix<T>) -> Self {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            values: m.values,
        }
    }
}

impl<T: Float> Matrix<T> {
    pub fn new(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(
                "values",
                format!(
                    "expected {} entries for a {rows}x{cols} matrix, got {}",
                    rows * cols,
                    values.len()
                ),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    op: "from_rows",
                    left_rows: 1,
                    left_cols: cols,
                    right_rows: i,
                    right_cols: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    /// Wraps values without the finiteness scan. Callers guarantee the
    /// invariant (or check it before the value escapes the crate).
    pub(crate) fn from_parts(rows: usize, cols: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.values[r * self.cols + c]
    }

    pub(crate) fn set(&mut self, r: usize, c: usize, v: T) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.values[r * c..(r + 1) * c]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact panics on zero chunk size
        let c = self.cols.max(1);
        self.values.chunks_exact(c).take(self.rows)
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self::from_parts(idx.len(), self.cols, values)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols && self.rows > 0 && other.rows > 0 {
            return Err(self.mismatch("vstack", other));
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self::from_parts(self.rows + other.rows, cols, values))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.rows, self.cols, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn frobenius_sq(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`, shapes must agree.
    pub(crate) fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + alpha * b;
        }
    }

    fn mismatch(&self, op: &'static str, other: &Self) -> Error {
        Error::DimensionMismatch {
            op,
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: other.rows,
            right_cols: other.cols,
        }
    }

    fn checked(self, op: &str) -> Result<Self> {
        if self.all_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(format!("result of {op}")))
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(self.mismatch("matmul", other));
        }
        self.mul_kernel(other).checked("matmul")
    }

    /// `self · otherᵀ`, without materializing the transpose.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(self.mismatch("matmul_nt", other));
        }
        self.mul_nt_kernel(other).checked("matmul_nt")
    }

    /// `selfᵀ · other`, without materializing the transpose.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(self.mismatch("matmul_tn", other));
        }
        self.mul_tn_kernel(other).checked("matmul_tn")
    }

    pub(crate) fn mul_kernel(&self, other: &Self) -> Self {
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![T::zero(); n * m];
        for i in 0..n {
            let dst = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.values[i * k + p];
                if a == T::zero() {
                    continue;
                }
                let src = &other.values[p * m..(p + 1) * m];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + a * s;
                }
            }
        }
        Self::from_parts(n, m, out)
    }

    pub(crate) fn mul_nt_kernel(&self, other: &Self) -> Self {
        let (n, m) = (self.rows, other.rows);
        let mut out = vec![T::zero(); n * m];
        let blocks = m / 4;
        for i in 0..n {
            let a = self.row(i);
            let dst = &mut out[i * m..(i + 1) * m];
            for b in 0..blocks {
                let j = 4 * b;
                let d = dot4(a, [other.row(j), other.row(j + 1), other.row(j + 2), other.row(j + 3)]);
                dst[j..j + 4].copy_from_slice(&d);
            }
            for j in 4 * blocks..m {
                dst[j] = dot(a, other.row(j));
            }
        }
        Self::from_parts(n, m, out)
    }

    pub(crate) fn mul_tn_kernel(&self, other: &Self) -> Self {
        let (n, a_cols, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![T::zero(); a_cols * m];
        for r in 0..n {
            let src = other.row(r);
            for i in 0..a_cols {
                let a = self.values[r * a_cols + i];
                if a == T::zero() {
                    continue;
                }
                let dst = &mut out[i * m..(i + 1) * m];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + a * s;
                }
            }
        }
        Self::from_parts(a_cols, m, out)
    }
}

/// Inner product; the slices must have equal length.
pub fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators let the compiler vectorize the f64 loop
    let mut acc = [T::zero(); 4];
    let (a4, a_tail) = a.split_at(a.len() / 4 * 4);
    let (b4, b_tail) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in a_tail.iter().zip(b_tail) {
        tail = tail + x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `a` against four rows at once, summed in the same order as [`dot`].
fn dot4<T: Float>(a: &[T], rows: [&[T]; 4]) -> [T; 4] {
    let split = a.len() / 4 * 4;
    let mut acc = [[T::zero(); 4]; 4];
    let r: [&[T]; 4] = rows.map(|r| &r[..a.len()]);
    for c in (0..split).step_by(4) {
        let x = &a[c..c + 4];
        for (acc_j, row) in acc.iter_mut().zip(&r) {
            let y = &row[c..c + 4];
            for l in 0..4 {
                acc_j[l] = acc_j[l] + x[l] * y[l];
            }
        }
    }
    let mut out = [T::zero(); 4];
    for j in 0..4 {
        let mut tail = T::zero();
        for k in split..a.len() {
            tail = tail + a[k] * r[j][k];
        }
        out[j] = (acc[j][0] + acc[j][1]) + (acc[j][2] + acc[j][3]) + tail;
    }
    out
}

impl<T: Float + fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for row in self.iter_rows() {
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}
