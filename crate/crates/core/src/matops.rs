//! Small dense matrices: the complex carrier for channel blocks, the
//! Gram-matrix spectrum the output density consumes, and signed
//! log-determinants.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::SignedLogValue;

/// Relative eigenvalue gap below which a spectrum is treated as degenerate.
pub const GAP_RELATIVE: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T: Real> {
    rows: usize,
    cols: usize,
    entries: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, entries: Vec<Complex<T>>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.entries
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::InvalidArgument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `Y·Y†`, Hermitian `rows × rows`.
    pub fn gram(&self) -> Self {
        let n = self.rows;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b.conj());
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        g
    }
}

impl<T: Real> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.entries[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.entries[i * self.cols + j]
    }
}

/// Sum of squared entry magnitudes.
pub fn frobenius_sq<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.entries.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// Eigenvalues of `Y·Y†`, ascending and clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSpectrum<T: Real> {
    d: Vec<T>,
}

impl<T: Real> GramSpectrum<T> {
    /// Builds a spectrum from arbitrary nonnegative values, sorting them.
    pub fn new(mut d: Vec<T>) -> Result<Self> {
        if d.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidArgument(
                "spectrum entries must be finite and nonnegative".into(),
            ));
        }
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self { d })
    }

    pub fn values(&self) -> &[T] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn sum(&self) -> T {
        self.d.iter().fold(T::zero(), |a, b| a + *b)
    }

    pub fn max(&self) -> T {
        self.d.last().copied().unwrap_or_else(T::zero)
    }

    /// Smallest distance between consecutive eigenvalues; infinite for one value.
    pub fn min_gap(&self) -> T {
        self.d
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// `GAP_RELATIVE · max(1, d_max)`.
    pub fn gap_threshold(&self) -> T {
        T::lit(GAP_RELATIVE) * self.max().max(T::one())
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations, ascending.
pub fn hermitian_eigenvalues<T: Real>(a: &ComplexMatrix<T>) -> Result<Vec<T>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    let mut m = a.clone();
    let zero = Complex::new(T::zero(), T::zero());
    let eps = T::epsilon();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + m[(i, j)].norm_sqr());
        let diag: T = (0..n).fold(T::zero(), |acc, i| acc + m[(i, i)].re * m[(i, i)].re);
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r == T::zero() {
                    continue;
                }
                // Rotate the phase of column q so the (p, q) pair becomes real.
                let phase = apq.conj() / r;
                for k in 0..n {
                    if k != q {
                        m[(k, q)] = m[(k, q)] * phase;
                        m[(q, k)] = m[(k, q)].conj();
                    }
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (T::lit(2.0) * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c - akq * s;
                    m[(k, q)] = akp * s + akq * c;
                    m[(p, k)] = m[(k, p)].conj();
                    m[(q, k)] = m[(k, q)].conj();
                }
                m[(p, p)] = Complex::new(app - t * r, T::zero());
                m[(q, q)] = Complex::new(aqq + t * r, T::zero());
                m[(p, q)] = zero;
                m[(q, p)] = zero;
            }
        }
    }
    let mut d: Vec<T> = (0..n).map(|i| m[(i, i)].re).collect();
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(d)
}

/// Spectrum of `Y·Y†` for an `n_r × n_b` block with `n_r ≤ n_b`.
pub fn gram_eigenvalues<T: Real>(y: &ComplexMatrix<T>) -> Result<GramSpectrum<T>> {
    if y.rows() > y.cols() {
        return Err(Error::InvalidArgument(format!(
            "gram spectrum needs rows <= cols, got {}x{}",
            y.rows(),
            y.cols()
        )));
    }
    let g = y.gram();
    let d = match y.rows() {
        1 => vec![g[(0, 0)].re],
        _ => hermitian_eigenvalues(&g)?,
    };
    Ok(GramSpectrum {
        d: d.into_iter().map(|v| v.max(T::zero())).collect(),
    })
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix<T: Real> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> RealMatrix<T> {
    /// Square matrix from row-major entries.
    pub fn square(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "{} entries for a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::InvalidArgument("matrix is not square".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.n != rhs.n {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        let n = self.n;
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    data[i * n + j] = data[i * n + j] + a * rhs.data[k * n + j];
                }
            }
        }
        Ok(Self { n, data })
    }
}

impl<T: Real> Index<(usize, usize)> for RealMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for RealMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Sign and log-magnitude of `det m` via row-pivoted elimination. Singular
/// matrices give sign 0.
pub fn signed_log_det<T: Real>(m: &RealMatrix<T>) -> SignedLogValue<T> {
    let n = m.n;
    let mut a = m.data.clone();
    let mut sign: i8 = 1;
    let mut log_mag = T::zero();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty range");
        let pv = a[pivot * n + col];
        if pv == T::zero() || !pv.is_finite() {
            return SignedLogValue::zero();
        }
        if pivot != col {
            for j in 0..n {
                a.swap(pivot * n + j, col * n + j);
            }
            sign = -sign;
        }
        if pv < T::zero() {
            sign = -sign;
        }
        log_mag = log_mag + pv.abs().ln();
        for i in (col + 1)..n {
            let factor = a[i * n + col] / pv;
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                a[i * n + j] = a[i * n + j] - factor * a[col * n + j];
            }
        }
    }
    SignedLogValue::from_log(log_mag, sign)
}
