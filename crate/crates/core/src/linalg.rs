//! Dense complex Hermitian matrices; factorizations are delegated to faer.

use faer::complex_native::c64;
use faer::prelude::SolverCore;
use faer::{Mat, Side};
use num_complex::Complex64;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    /// Replaces the matrix by its Hermitian part `(M + M†)/2`.
    pub fn hermitize(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in i + 1..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = v;
                self.data[j * n + i] = v.conj();
            }
        }
    }

    /// `max |M − M†|`
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    /// `x† M y`
    pub fn sandwich(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let n = self.n;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                row += self.data[i * n + j] * y[j];
            }
            s += x[i].conj() * row;
        }
        s
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn to_faer(&self) -> Mat<c64> {
        Mat::from_fn(self.n, self.n, |i, j| {
            let v = self.get(i, j);
            c64::new(v.re, v.im)
        })
    }

    fn from_faer(m: &Mat<c64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| {
            let v = m.read(i, j);
            Complex64::new(v.re, v.im)
        })
    }
}

/// Inverse of a Hermitian positive-definite matrix (Cholesky, LU fallback).
pub fn hpd_inverse(m: &CMatrix) -> CMatrix {
    let f = m.to_faer();
    let inv = match f.cholesky(Side::Lower) {
        Ok(ch) => ch.inverse(),
        Err(_) => f.partial_piv_lu().inverse(),
    };
    let mut out = CMatrix::from_faer(&inv);
    out.hermitize();
    out
}

/// Eigen-decomposition of a Hermitian matrix, ascending eigenvalues.
/// Eigenvectors are returned as columns (one `Vec` per eigenvalue).
pub fn eigh(m: &CMatrix, vectors: bool) -> (Vec<f64>, Option<Vec<Vec<Complex64>>>) {
    let f = m.to_faer();
    if !vectors {
        let mut vals = f.selfadjoint_eigenvalues(Side::Lower);
        vals.sort_by(|a, b| a.total_cmp(b));
        return (vals, None);
    }
    let evd = f.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.read(a).re.total_cmp(&s.read(b).re));
    let vals = order.iter().map(|&i| s.read(i).re).collect();
    let vecs = order
        .iter()
        .map(|&c| {
            (0..n)
                .map(|r| {
                    let v = u.read(r, c);
                    Complex64::new(v.re, v.im)
                })
                .collect()
        })
        .collect();
    (vals, Some(vecs))
}
