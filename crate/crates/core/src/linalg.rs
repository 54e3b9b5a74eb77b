//! Small dense complex linear algebra.
//!
//! Matrices here are at most a few dozen rows (the truncated spin⊗Fock space),
//! so everything is a flat row-major `Vec<Complex64>` with straightforward
//! loops. The Hermitian eigensolver is a Householder reduction to a real
//! symmetric tridiagonal matrix followed by implicit QL iterations.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;
#[allow(unused_imports)] // float math comes from libm when std is absent
use num_traits::Float;

use crate::error::Error;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major data; `data.len()` must be a perfect square.
    pub fn from_row_major(data: Vec<Complex64>) -> Result<Self, Error> {
        let dim = isqrt(data.len());
        if dim * dim != data.len() {
            return Err(Error::ShapeMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                let orow = &mut out.data[r * n..(r + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(self.dim, v.len());
        (0..self.dim)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise deviation of U†U from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.dim))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigendecomposition `A = V diag(values) V†` of a Hermitian matrix.
///
/// Eigenvalues are ascending; column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Only the lower triangle of `a` is read.
    pub fn new(a: &CMatrix) -> Result<Self, Error> {
        let n = a.dim();
        let mut work = a.data.clone();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut q = CMatrix::identity(n);
        tridiagonalize(n, &mut work, &mut q.data, &mut diag, &mut off);

        // zt[k * n + j]: component j of tridiagonal eigenvector k.
        let mut zt = vec![0.0; n * n];
        for i in 0..n {
            zt[i * n + i] = 1.0;
        }
        tql2(&mut diag, &mut off, &mut zt, n)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
        let values = order.iter().map(|&k| diag[k]).collect();

        // vectors = Q · Z, with Z real.
        let mut vectors = CMatrix::zeros(n);
        for r in 0..n {
            let qrow = &q.data[r * n..(r + 1) * n];
            let out = &mut vectors.data[r * n..(r + 1) * n];
            for (o, &k) in out.iter_mut().zip(&order) {
                let zk = &zt[k * n..(k + 1) * n];
                let mut re = 0.0;
                let mut im = 0.0;
                for (qv, zv) in qrow.iter().zip(zk) {
                    re += qv.re * zv;
                    im += qv.im * zv;
                }
                *o = Complex64::new(re, im);
            }
        }
        Ok(Self { values, vectors })
    }

    /// Reassembles `V f(Λ) V†` for a complex function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let n = self.vectors.dim();
        let fv: Vec<Complex64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        CMatrix::from_fn(n, |r, c| {
            let mut acc = ZERO;
            for k in 0..n {
                acc += v[(r, k)] * fv[k] * v[(c, k)].conj();
            }
            acc
        })
    }
}

/// Householder reduction of a Hermitian matrix (row-major `a`, clobbered) to
/// real symmetric tridiagonal form. `q` (identity on entry) receives the
/// unitary with `q† A q = tridiag(diag, off)`, `off[k]` coupling rows `k`
/// and `k+1`.
fn tridiagonalize(n: usize, a: &mut [Complex64], q: &mut [Complex64], diag: &mut [f64], off: &mut [f64]) {
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let tail: f64 = (lo + 1..n).map(|i| a[i * n + k].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = a[lo * n + k];
        let norm_x = (tail + x0.norm_sqr()).sqrt();
        let x0_abs = x0.norm();
        let phase = if x0_abs > 0.0 { x0 / x0_abs } else { ONE };
        let alpha = -phase * norm_x;
        for i in lo..n {
            v[i] = a[i * n + k];
        }
        v[lo] -= alpha;
        let vnorm2 = tail + v[lo].norm_sqr();
        let beta = 2.0 / vnorm2;

        // p = beta · A[lo.., lo..] v
        for i in lo..n {
            let row = &a[i * n + lo..i * n + n];
            let mut acc = ZERO;
            for (x, y) in row.iter().zip(&v[lo..n]) {
                acc += x * y;
            }
            p[i] = acc * beta;
        }
        let vp: f64 = (lo..n).map(|i| (v[i].conj() * p[i]).re).sum();
        let kk = 0.5 * beta * vp;
        for i in lo..n {
            p[i] -= v[i] * kk;
        }
        // A ← A − v p† − p v† on the trailing block.
        for i in lo..n {
            let (vi, pi) = (v[i], p[i]);
            let row = &mut a[i * n + lo..i * n + n];
            for ((x, vj), pj) in row.iter_mut().zip(&v[lo..n]).zip(&p[lo..n]) {
                *x -= vi * pj.conj() + pi * vj.conj();
            }
        }
        a[lo * n + k] = alpha;
        a[k * n + lo] = alpha.conj();
        for i in lo + 1..n {
            a[i * n + k] = ZERO;
            a[k * n + i] = ZERO;
        }
        // Q ← Q (I − beta v v†)
        for r in 0..n {
            let row = &mut q[r * n + lo..r * n + n];
            let mut acc = ZERO;
            for (x, y) in row.iter().zip(&v[lo..n]) {
                acc += x * y;
            }
            acc *= beta;
            for (x, y) in row.iter_mut().zip(&v[lo..n]) {
                *x -= acc * y.conj();
            }
        }
    }

    // Rotate phases so the sub-diagonal is real and non-negative.
    let mut d = ONE;
    for k in 0..n {
        diag[k] = a[k * n + k].re;
        if k + 1 < n {
            let e = a[(k + 1) * n + k];
            let mag = e.norm();
            off[k] = mag;
            let next = if mag > 0.0 { d * e / mag } else { d };
            for r in 0..n {
                q[r * n + k + 1] *= next;
            }
            d = next;
        } else {
            off[k] = 0.0;
        }
    }
}

#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    let (big, small) = if a > b { (a, b) } else { (b, a) };
    if big == 0.0 {
        return 0.0;
    }
    let r = small / big;
    big * (1.0 + r * r).sqrt()
}

/// Implicit QL on a real symmetric tridiagonal matrix. Rotations are
/// accumulated into `zt`, whose row `k` is eigenvector `k`.
fn tql2(d: &mut [f64], e: &mut [f64], zt: &mut [f64], n: usize) -> Result<(), Error> {
    const MAX_ITER: usize = 60;
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
            if iter > MAX_ITER {
                return Err(Error::EigenNoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = pythag(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (head, rest) = zt.split_at_mut((i + 1) * n);
                let zi = &mut head[i * n..];
                let zi1 = &mut rest[..n];
                for (x, y) in zi.iter_mut().zip(zi1.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *y = s * a + c * b;
                    *x = c * a - s * b;
                }
            }
            if underflow {
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
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = CMatrix::zeros(n);
        for r in 0..n {
            m[(r, r)] = Complex64::new(rng.random_range(-2.0..2.0), 0.0);
            for c in 0..r {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn reconstructs_random_hermitian() {
        for (n, seed) in [(1, 1), (2, 2), (3, 3), (7, 4), (15, 5), (30, 6)] {
            let a = random_hermitian(n, seed);
            let eig = HermitianEigen::new(&a).unwrap();
            let back = eig.apply_fn(|l| Complex64::new(l, 0.0));
            assert!(back.max_abs_diff(&a) < 1e-12, "n={n}: {}", back.max_abs_diff(&a));
            assert!(eig.vectors.unitarity_defect() < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn pauli_x_eigenvalues() {
        let a = CMatrix::from_row_major(vec![ZERO, ONE, ONE, ZERO]).unwrap();
        let eig = HermitianEigen::new(&a).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_already_diagonal() {
        let mut a = CMatrix::zeros(4);
        for i in 0..4 {
            a[(i, i)] = Complex64::new(if i < 2 { 1.0 } else { -3.0 }, 0.0);
        }
        let eig = HermitianEigen::new(&a).unwrap();
        assert_eq!(eig.values, vec![-3.0, -3.0, 1.0, 1.0]);
        assert!(eig.apply_fn(|l| Complex64::new(l, 0.0)).max_abs_diff(&a) < 1e-15);
    }

    #[test]
    fn rejects_non_square_data() {
        assert!(CMatrix::from_row_major(vec![ONE; 3]).is_err());
    }
}
