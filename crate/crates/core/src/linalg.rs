//! Small dense linear algebra over [`Real`] scalars.
//!
//! Row-major storage. Only what the spectral and semigroup code needs:
//! products, an LU solver, and a real-Schur eigenvalue routine
//! (balance, Hessenberg reduction, Francis double-shift QR).

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{QsdError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(QsdError::Shape(format!("row {i} has length {}, expected {c}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[T]>::to_vec).collect()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// Row vector times matrix: `v A`.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "vec_mul shape mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + vi * a;
            }
        }
        out
    }

    /// Matrix times column vector: `A v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "mul_vec shape mismatch");
        (0..self.rows).map(|i| crate::scalar::dot(self.row(i), v)).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    /// Solves `A x = b` by LU with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        Lu::factor(self)?.solve(b)
    }

    /// Eigenvalues of a square matrix, unordered.
    pub fn eigenvalues(&self) -> Result<Vec<Complex<T>>> {
        if !self.is_square() {
            return Err(QsdError::Shape("eigenvalues of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut a = OneBased::new(self);
        a.balance();
        a.hessenberg();
        a.hqr()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(QsdError::Shape("LU of a non-square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == T::zero() {
                return Err(QsdError::Singular);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] = lu[(i, j)] - f * v;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(QsdError::Shape(format!("rhs length {} != {n}", b.len())));
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `x A = b` (i.e. `A^T x^T = b^T`).
    pub fn solve_left(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(QsdError::Shape(format!("rhs length {} != {n}", b.len())));
        }
        // A = P^T L U, so A^T y = b  <=>  U^T L^T P y = b.
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s = s - self.lu[(j, i)] * z[j];
            }
            z[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s = s - self.lu[(j, i)] * z[j];
            }
            z[i] = s;
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        Ok(x)
    }
}

/// 1-based square scratch matrix for the eigenvalue routines.
struct OneBased<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: Real> OneBased<T> {
    fn new(m: &Matrix<T>) -> Self {
        let n = m.rows();
        let mut a = vec![T::zero(); (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                a[(i + 1) * (n + 1) + j + 1] = m[(i, j)];
            }
        }
        Self { n, a }
    }

    #[inline]
    fn g(&self, i: usize, j: usize) -> T {
        self.a[i * (self.n + 1) + j]
    }

    #[inline]
    fn s(&mut self, i: usize, j: usize, v: T) {
        let n1 = self.n + 1;
        self.a[i * n1 + j] = v;
    }

    fn swap(&mut self, (i1, j1): (usize, usize), (i2, j2): (usize, usize)) {
        let n1 = self.n + 1;
        self.a.swap(i1 * n1 + j1, i2 * n1 + j2);
    }

    /// Diagonal similarity scaling by powers of two so row and column norms match.
    fn balance(&mut self) {
        let n = self.n;
        let radix = T::lit(2.0);
        let sqrdx = radix * radix;
        let mut done = false;
        while !done {
            done = true;
            for i in 1..=n {
                let mut r = T::zero();
                let mut c = T::zero();
                for j in 1..=n {
                    if j != i {
                        c = c + self.g(j, i).abs();
                        r = r + self.g(i, j).abs();
                    }
                }
                if c != T::zero() && r != T::zero() {
                    let mut g = r / radix;
                    let mut f = T::one();
                    let s = c + r;
                    while c < g {
                        f = f * radix;
                        c = c * sqrdx;
                    }
                    g = r * radix;
                    while c > g {
                        f = f / radix;
                        c = c / sqrdx;
                    }
                    if (c + r) / f < T::lit(0.95) * s {
                        done = false;
                        let gi = T::one() / f;
                        for j in 1..=n {
                            self.s(i, j, self.g(i, j) * gi);
                        }
                        for j in 1..=n {
                            self.s(j, i, self.g(j, i) * f);
                        }
                    }
                }
            }
        }
    }

    /// Reduction to upper Hessenberg form by stabilized elementary similarities.
    fn hessenberg(&mut self) {
        let n = self.n;
        for m in 2..n {
            let mut x = T::zero();
            let mut i = m;
            for j in m..=n {
                if self.g(j, m - 1).abs() > x.abs() {
                    x = self.g(j, m - 1);
                    i = j;
                }
            }
            if i != m {
                for j in m - 1..=n {
                    self.swap((i, j), (m, j));
                }
                for j in 1..=n {
                    self.swap((j, i), (j, m));
                }
            }
            if x != T::zero() {
                for i in m + 1..=n {
                    let mut y = self.g(i, m - 1);
                    if y != T::zero() {
                        y = y / x;
                        self.s(i, m - 1, y);
                        for j in m..=n {
                            self.s(i, j, self.g(i, j) - y * self.g(m, j));
                        }
                        for j in 1..=n {
                            self.s(j, m, self.g(j, m) + y * self.g(j, i));
                        }
                    }
                }
            }
        }
        for i in 3..=n {
            for j in 1..i - 1 {
                self.s(i, j, T::zero());
            }
        }
    }

    /// Francis double-shift QR on an upper Hessenberg matrix.
    fn hqr(&mut self) -> Result<Vec<Complex<T>>> {
        let n = self.n;
        let mut wr = vec![T::zero(); n + 1];
        let mut wi = vec![T::zero(); n + 1];
        let half = T::lit(0.5);
        let mut anorm = T::zero();
        for i in 1..=n {
            for j in i.saturating_sub(1).max(1)..=n {
                anorm = anorm + self.g(i, j).abs();
            }
        }
        let mut nn = n;
        let mut t = T::zero();
        while nn >= 1 {
            let mut its = 0;
            loop {
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.g(l - 1, l - 1).abs() + self.g(l, l).abs();
                    if s == T::zero() {
                        s = anorm;
                    }
                    if self.g(l, l - 1).abs() + s == s {
                        self.s(l, l - 1, T::zero());
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.g(nn, nn);
                if l == nn {
                    wr[nn] = x + t;
                    wi[nn] = T::zero();
                    nn -= 1;
                    break;
                }
                let mut y = self.g(nn - 1, nn - 1);
                let mut w = self.g(nn, nn - 1) * self.g(nn - 1, nn);
                if l == nn - 1 {
                    let p = half * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x = x + t;
                    if q >= T::zero() {
                        z = p + if p >= T::zero() { z } else { -z };
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != T::zero() {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = T::zero();
                        wi[nn] = T::zero();
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                    break;
                }
                if its == 60 {
                    return Err(QsdError::NoConvergence("Hessenberg QR".into()));
                }
                if its == 10 || its == 20 || its == 40 {
                    t = t + x;
                    for i in 1..=nn {
                        self.s(i, i, self.g(i, i) - x);
                    }
                    let s = self.g(nn, nn - 1).abs() + self.g(nn - 1, nn - 2).abs();
                    x = T::lit(0.75) * s;
                    y = x;
                    w = T::lit(-0.4375) * s * s;
                }
                its += 1;
                let mut m = nn - 2;
                let (mut p, mut q, mut r);
                loop {
                    let z = self.g(m, m);
                    let rr = x - z;
                    let ss = y - z;
                    p = (rr * ss - w) / self.g(m + 1, m) + self.g(m, m + 1);
                    q = self.g(m + 1, m + 1) - z - rr - ss;
                    r = self.g(m + 2, m + 1);
                    let s = p.abs() + q.abs() + r.abs();
                    p = p / s;
                    q = q / s;
                    r = r / s;
                    if m == l {
                        break;
                    }
                    let u = self.g(m, m - 1).abs() * (q.abs() + r.abs());
                    let v = p.abs() * (self.g(m - 1, m - 1).abs() + z.abs() + self.g(m + 1, m + 1).abs());
                    if u + v == v {
                        break;
                    }
                    m -= 1;
                }
                for i in m + 2..=nn {
                    self.s(i, i - 2, T::zero());
                    if i != m + 2 {
                        self.s(i, i - 3, T::zero());
                    }
                }
                let mut k = m;
                while k < nn {
                    if k != m {
                        p = self.g(k, k - 1);
                        q = self.g(k + 1, k - 1);
                        r = T::zero();
                        if k != nn - 1 {
                            r = self.g(k + 2, k - 1);
                        }
                        x = p.abs() + q.abs() + r.abs();
                        if x != T::zero() {
                            p = p / x;
                            q = q / x;
                            r = r / x;
                        }
                    }
                    let norm = (p * p + q * q + r * r).sqrt();
                    let s = if p >= T::zero() { norm } else { -norm };
                    if s != T::zero() {
                        if k == m {
                            if l != m {
                                self.s(k, k - 1, -self.g(k, k - 1));
                            }
                        } else {
                            self.s(k, k - 1, -s * x);
                        }
                        p = p + s;
                        x = p / s;
                        y = q / s;
                        let z = r / s;
                        q = q / p;
                        r = r / p;
                        for j in k..=nn {
                            let mut pp = self.g(k, j) + q * self.g(k + 1, j);
                            if k != nn - 1 {
                                pp = pp + r * self.g(k + 2, j);
                                self.s(k + 2, j, self.g(k + 2, j) - pp * z);
                            }
                            self.s(k + 1, j, self.g(k + 1, j) - pp * y);
                            self.s(k, j, self.g(k, j) - pp * x);
                        }
                        let mmin = if nn < k + 3 { nn } else { k + 3 };
                        for i in l..=mmin {
                            let mut pp = x * self.g(i, k) + y * self.g(i, k + 1);
                            if k != nn - 1 {
                                pp = pp + z * self.g(i, k + 2);
                                self.s(i, k + 2, self.g(i, k + 2) - pp * r);
                            }
                            self.s(i, k + 1, self.g(i, k + 1) - pp * q);
                            self.s(i, k, self.g(i, k) - pp);
                        }
                    }
                    k += 1;
                }
                if l >= nn - 1 {
                    break;
                }
            }
        }
        Ok((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        v.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
        v
    }

    #[test]
    fn eigenvalues_of_t2_generator() {
        let m = Matrix::from_rows(&[vec![-2.0, 1.0], vec![2.0, -2.0]]).unwrap();
        let ev = sorted_re(m.eigenvalues().unwrap());
        let r2 = 2f64.sqrt();
        assert!((ev[0].re - (-2.0 + r2)).abs() < 1e-14);
        assert!((ev[1].re - (-2.0 - r2)).abs() < 1e-14);
        assert!(ev.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn eigenvalues_of_rotation_are_complex() {
        let m = Matrix::from_rows(&[vec![0.0, -1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 3.0]]).unwrap();
        let ev = sorted_re(m.eigenvalues().unwrap());
        assert!((ev[0].re - 3.0).abs() < 1e-14);
        assert!((ev[1].im.abs() - 1.0).abs() < 1e-14);
        assert!((ev[1].re).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_triangular_are_diagonal() {
        let m = Matrix::from_rows(&[
            vec![1.0, 5.0, 7.0, 2.0],
            vec![0.0, -2.0, 3.0, 1.0],
            vec![0.0, 0.0, 4.0, 9.0],
            vec![0.0, 0.0, 0.0, 0.5],
        ])
        .unwrap();
        let ev = sorted_re(m.eigenvalues().unwrap());
        let want = [4.0, 1.0, 0.5, -2.0];
        for (z, w) in ev.iter().zip(want) {
            assert!((z.re - w).abs() < 1e-12, "{z} vs {w}");
        }
    }

    #[test]
    fn lu_solves_both_sides() {
        let a = Matrix::<f64>::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 4.0]]).unwrap();
        let b = [1.0, 2.0, 3.0];
        let lu = Lu::factor(&a).unwrap();
        let x = lu.solve(&b).unwrap();
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip(b) {
            assert!((u - v).abs() < 1e-14);
        }
        let y = lu.solve_left(&b).unwrap();
        let ya = a.vec_mul(&y);
        for (u, v) in ya.iter().zip(b) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(Lu::factor(&a), Err(QsdError::Singular)));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::<f64>::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
