//! Small dense complex linear algebra.
//!
//! Only what the artificial-noise construction needs: Hermitian transpose,
//! products, norms, an orthonormal null-space basis and circularly symmetric
//! Gaussian sampling. Matrices here are at most a few antennas on a side.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::standard_normal;
use crate::scalar::Scalar;

/// Relative tolerance used for rank decisions when the caller has no opinion.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector<T>(pub Vec<Complex<T>>);

impl<T: Scalar> ComplexMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(format!("{} entries", rows * cols), data.len()));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Real-valued matrix from nested rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dims(format!("{cols} columns per row"), "ragged rows"));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&x| Complex::new(T::of(x), T::zero())))
            .collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Complex::one() } else { Complex::zero() })
    }

    /// Matrix with i.i.d. CN(0, `variance`) entries.
    pub fn random_gaussian<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        variance: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let v = sample_complex_gaussian::<T, R>(rows * cols, variance, rng)?;
        Ok(Self { rows, cols, data: v.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> ComplexVector<T> {
        ComplexVector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::dims(
                format!("{} rows on the right", self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &ComplexVector<T>) -> Result<ComplexVector<T>> {
        if self.cols != x.len() {
            return Err(Error::dims(format!("vector of length {}", self.cols), x.len()));
        }
        Ok(ComplexVector(
            (0..self.rows)
                .map(|i| {
                    self.row(i).iter().zip(&x.0).fold(Complex::zero(), |acc, (&a, &b)| acc + a * b)
                })
                .collect(),
        ))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> ComplexVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex::zero(); n])
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self(values.iter().map(|&x| Complex::new(T::of(x), T::zero())).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self(self.0.iter().map(|&z| z * s).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::dims(self.len(), other.len()));
        }
        Ok(Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect()))
    }

    /// Row-vector product `row · self`.
    pub fn dot_row(&self, row: &[Complex<T>]) -> Result<Complex<T>> {
        if row.len() != self.len() {
            return Err(Error::dims(self.len(), row.len()));
        }
        Ok(row.iter().zip(&self.0).fold(Complex::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Orthonormal basis `Z` (t × (t − rank)) for the null space of `h` (r × t).
///
/// Column-pivoted Householder QR of `h†` = Q R; the trailing `t − rank`
/// columns of Q span range(h†)^⊥ = null(h). Rank counts the diagonal entries
/// of R above `tolerance · |R₀₀|`. Column phases are arbitrary.
pub fn null_space_basis<T: Scalar>(h: &ComplexMatrix<T>, tolerance: f64) -> Result<ComplexMatrix<T>> {
    if !h.is_finite() {
        return Err(Error::NonFinite("channel matrix"));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance must be positive, got {tolerance}")));
    }
    let t = h.cols;
    let mut a = h.hermitian();
    let r = a.cols;
    let mut q = ComplexMatrix::<T>::identity(t);
    let steps = t.min(r);
    let mut diag = Vec::with_capacity(steps);

    for k in 0..steps {
        // pivot on the largest trailing column norm
        let col_norm = |a: &ComplexMatrix<T>, j: usize| {
            (k..t).fold(T::zero(), |acc, i| acc + a[(i, j)].norm_sqr())
        };
        let (pivot, _) = (k..r)
            .map(|j| (j, col_norm(&a, j)))
            .fold((k, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot != k {
            for i in 0..t {
                let tmp = a[(i, k)];
                a[(i, k)] = a[(i, pivot)];
                a[(i, pivot)] = tmp;
            }
        }

        let norm_x = col_norm(&a, k).sqrt();
        if norm_x == T::zero() {
            diag.push(T::zero());
            continue;
        }
        let x0 = a[(k, k)];
        let phase = if x0.norm() == T::zero() { Complex::one() } else { x0 / x0.norm() };
        let alpha = -phase * norm_x;
        let mut v: Vec<Complex<T>> = (k..t).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let v_norm = v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        if v_norm == T::zero() {
            diag.push(norm_x);
            continue;
        }
        for z in v.iter_mut() {
            *z /= v_norm;
        }
        let two = T::one() + T::one();

        // A ← (I − 2vv†) A on the trailing block
        for j in k..r {
            let s: Complex<T> =
                v.iter().enumerate().fold(Complex::zero(), |acc, (ii, vi)| acc + vi.conj() * a[(k + ii, j)]);
            for (ii, vi) in v.iter().enumerate() {
                a[(k + ii, j)] -= *vi * s * two;
            }
        }
        // Q ← Q (I − 2vv†)
        for i in 0..t {
            let s: Complex<T> =
                v.iter().enumerate().fold(Complex::zero(), |acc, (ii, vi)| acc + q[(i, k + ii)] * *vi);
            for (ii, vi) in v.iter().enumerate() {
                q[(i, k + ii)] -= s * vi.conj() * two;
            }
        }
        diag.push(a[(k, k)].norm());
    }

    let lead = diag.first().copied().unwrap_or_else(T::zero);
    let threshold = lead * T::of(tolerance);
    let rank = if lead == T::zero() { 0 } else { diag.iter().filter(|&&d| d > threshold).count() };
    if rank >= t {
        return Err(Error::NoNullSpace { rank });
    }
    Ok(ComplexMatrix::from_fn(t, t - rank, |i, j| q[(i, rank + j)]))
}

/// `n` i.i.d. CN(0, `variance`) samples: real and imaginary parts are
/// independent N(0, variance/2).
pub fn sample_complex_gaussian<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    variance: f64,
    rng: &mut R,
) -> Result<ComplexVector<T>> {
    if !(variance >= 0.0) {
        return Err(Error::NegativeVariance(variance));
    }
    let sd = (variance / 2.0).sqrt();
    Ok(ComplexVector(
        (0..n)
            .map(|_| {
                let re = standard_normal(rng) * sd;
                let im = standard_normal(rng) * sd;
                Complex::new(T::of(re), T::of(im))
            })
            .collect(),
    ))
}
