//! Dense matrix helpers for small `p x p` problems.
//!
//! Everything here assumes the type count `p` stays desk-scale (a handful
//! of types), so cofactor determinants and Gauss-Jordan inversion are the
//! right tools. The matrix norm used throughout is the operator
//! infinity-norm (maximum absolute row sum); it is submultiplicative and
//! exactly computable.

use num_complex::Complex64;

use crate::error::SpectralError;
use crate::poly;

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "rows must be square");
        CMatrix {
            dim,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "rows must be square");
        CMatrix {
            dim,
            data: rows
                .iter()
                .flatten()
                .map(|&x| Complex64::new(x, 0.0))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len());
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Operator infinity-norm: maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `I - self`.
    pub fn sub_from_identity(&self) -> CMatrix {
        CMatrix::identity(self.dim).sub(self)
    }

    fn minor(&self, row: usize, col: usize) -> CMatrix {
        let n = self.dim;
        let mut out = CMatrix::zeros(n - 1);
        let mut r = 0;
        for i in 0..n {
            if i == row {
                continue;
            }
            let mut c = 0;
            for j in 0..n {
                if j == col {
                    continue;
                }
                out.set(r, c, self.get(i, j));
                c += 1;
            }
            r += 1;
        }
        out
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn det(&self) -> Complex64 {
        match self.dim {
            0 => Complex64::new(1.0, 0.0),
            1 => self.get(0, 0),
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0),
            3 => {
                let a = self.get(0, 0);
                let b = self.get(0, 1);
                let c = self.get(0, 2);
                a * (self.get(1, 1) * self.get(2, 2) - self.get(1, 2) * self.get(2, 1))
                    - b * (self.get(1, 0) * self.get(2, 2) - self.get(1, 2) * self.get(2, 0))
                    + c * (self.get(1, 0) * self.get(2, 1) - self.get(1, 1) * self.get(2, 0))
            }
            _ => {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut sign = 1.0;
                for j in 0..self.dim {
                    let a = self.get(0, j);
                    if a != Complex64::new(0.0, 0.0) {
                        acc += a * self.minor(0, j).det() * sign;
                    }
                    sign = -sign;
                }
                acc
            }
        }
    }

    /// Adjugate (transposed cofactor matrix), so `A * adj(A) = det(A) I`.
    pub fn adjugate(&self) -> CMatrix {
        let n = self.dim;
        if n == 1 {
            return CMatrix::identity(1);
        }
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                out.set(j, i, self.minor(i, j).det() * sign);
            }
        }
        out
    }

    /// Gauss-Jordan inverse with partial pivoting. `None` when a pivot
    /// falls below `1e-14` times the matrix scale.
    pub fn inverse(&self) -> Option<CMatrix> {
        let n = self.dim;
        let scale = self.inf_norm().max(1.0);
        let mut a = self.clone();
        let mut inv = CMatrix::identity(n);
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a.get(r, col).norm()))
                .max_by(|x, y| x.1.total_cmp(&y.1))?;
            if pivot_mag < 1e-14 * scale * f64::EPSILON.sqrt() || pivot_mag == 0.0 {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    let (x, y) = (a.get(col, j), a.get(pivot_row, j));
                    a.set(col, j, y);
                    a.set(pivot_row, j, x);
                    let (x, y) = (inv.get(col, j), inv.get(pivot_row, j));
                    inv.set(col, j, y);
                    inv.set(pivot_row, j, x);
                }
            }
            let p = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / p);
                inv.set(col, j, inv.get(col, j) / p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let v = a.get(r, j) - f * a.get(col, j);
                    a.set(r, j, v);
                    let v = inv.get(r, j) - f * inv.get(col, j);
                    inv.set(r, j, v);
                }
            }
        }
        Some(inv)
    }

    /// Monic characteristic polynomial coefficients `c_0..c_n` (ascending,
    /// `c_n = 1`) by the Faddeev-LeVerrier recursion.
    pub fn char_poly(&self) -> Vec<Complex64> {
        let n = self.dim;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[n] = Complex64::new(1.0, 0.0);
        let mut m = CMatrix::identity(n);
        for k in 1..=n {
            let am = self.matmul(&m);
            let c = -am.trace() / (k as f64);
            coeffs[n - k] = c;
            m = am;
            for i in 0..n {
                m.set(i, i, m.get(i, i) + c);
            }
        }
        coeffs
    }

    /// All eigenvalues, as clustered and polished roots of the
    /// characteristic polynomial (repeated eigenvalues repeat).
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>, SpectralError> {
        if self.dim == 0 {
            return Ok(Vec::new());
        }
        let coeffs = self.char_poly();
        let raw = poly::roots(&coeffs).map_err(|iters| SpectralError::Convergence { iters })?;
        let p = poly::CPoly::new(coeffs);
        let scale = 1.0 + raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let clusters = poly::cluster_roots(&p, &raw, 1e-6 * scale);
        Ok(clusters
            .into_iter()
            .flat_map(|c| std::iter::repeat(c.value).take(c.multiplicity))
            .collect())
    }
}

/// Row-major real matrix, used by the exact oracles and Perron iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl RMatrix {
    pub fn zeros(dim: usize) -> Self {
        RMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = RMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "rows must be square");
        RMatrix {
            dim,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn add(&self, other: &RMatrix) -> RMatrix {
        assert_eq!(self.dim, other.dim);
        RMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &RMatrix) -> RMatrix {
        assert_eq!(self.dim, other.dim);
        RMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &RMatrix) -> RMatrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = RMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    /// Solve `self * X = rhs` for the matrix `X` by Gaussian elimination
    /// with partial pivoting. `None` if singular.
    pub fn solve_matrix(&self, rhs: &RMatrix) -> Option<RMatrix> {
        let n = self.dim;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a.get(r, col).abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))?;
            if pivot_mag == 0.0 {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    let (x, y) = (a.get(col, j), a.get(pivot_row, j));
                    a.set(col, j, y);
                    a.set(pivot_row, j, x);
                    let (x, y) = (b.get(col, j), b.get(pivot_row, j));
                    b.set(col, j, y);
                    b.set(pivot_row, j, x);
                }
            }
            let p = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / p);
                b.set(col, j, b.get(col, j) / p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = a.get(r, j) - f * a.get(col, j);
                    a.set(r, j, v);
                    let v = b.get(r, j) - f * b.get(col, j);
                    b.set(r, j, v);
                }
            }
        }
        Some(b)
    }
}

/// Deterministic pairwise (tree) summation over complex matrices; order of
/// accumulation does not depend on thread scheduling because the inputs are
/// already materialized.
pub fn pairwise_sum_matrices(items: &[CMatrix]) -> CMatrix {
    fn rec(items: &[CMatrix]) -> CMatrix {
        match items.len() {
            0 => unreachable!(),
            1 => items[0].clone(),
            n => {
                let mid = n / 2;
                rec(&items[..mid]).add(&rec(&items[mid..]))
            }
        }
    }
    assert!(!items.is_empty());
    rec(items)
}

/// Pairwise summation of plain float slices (same-length vectors).
pub fn pairwise_sum_vecs(items: &[Vec<f64>]) -> Vec<f64> {
    fn rec(items: &[Vec<f64>]) -> Vec<f64> {
        match items.len() {
            0 => unreachable!(),
            1 => items[0].clone(),
            n => {
                let mid = n / 2;
                let a = rec(&items[..mid]);
                let b = rec(&items[mid..]);
                a.iter().zip(&b).map(|(x, y)| x + y).collect()
            }
        }
    }
    assert!(!items.is_empty());
    rec(items)
}
