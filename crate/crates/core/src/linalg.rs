//! Dense real and complex matrices with the handful of operations the
//! transceiver chain and the network training loop actually need.
//!
//! Storage is row-major. Real matrix products go through `matrixmultiply`;
//! complex products are assembled from four real products on the split
//! real/imaginary parts.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimError {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Mismatch {
        expected: String,
        got: String,
        context: &'static str,
    },
}

pub(crate) fn dim_err(expected: String, got: String, context: &'static str) -> DimError {
    DimError::Mismatch {
        expected,
        got,
        context,
    }
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec length");
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self * rhs`, panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimensions");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        dgemm_acc(1.0, self, rhs, 0.0, &mut out);
        out
    }

    /// `out = alpha * self * rhs + beta * out`.
    pub fn matmul_into(&self, rhs: &Mat, alpha: f64, beta: f64, out: &mut Mat) {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimensions");
        assert_eq!(out.rows, self.rows, "matmul output rows");
        assert_eq!(out.cols, rhs.cols, "matmul output cols");
        dgemm_acc(alpha, self, rhs, beta, out);
    }

    /// `self^T * rhs` without materialising the transpose.
    pub fn t_matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.rows, rhs.rows, "t_matmul inner dimensions");
        let mut out = Mat::zeros(self.cols, rhs.cols);
        unsafe {
            matrixmultiply::dgemm(
                self.cols,
                self.rows,
                rhs.cols,
                1.0,
                self.data.as_ptr(),
                1,
                self.cols as isize,
                rhs.data.as_ptr(),
                rhs.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        out
    }

    /// `self * rhs^T` without materialising the transpose.
    pub fn matmul_t(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.cols, "matmul_t inner dimensions");
        let mut out = Mat::zeros(self.rows, rhs.rows);
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                self.cols,
                rhs.rows,
                1.0,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                rhs.data.as_ptr(),
                1,
                rhs.cols as isize,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimensions");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &Mat, s: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

fn dgemm_acc(alpha: f64, a: &Mat, b: &Mat, beta: f64, c: &mut Mat) {
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.cols as isize,
            1,
            b.data.as_ptr(),
            b.cols as isize,
            1,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn re(&self) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_re_im(re: &Mat, im: &Mat) -> CMat {
        assert_eq!(re.rows, im.rows);
        assert_eq!(re.cols, im.cols);
        CMat {
            rows: re.rows,
            cols: re.cols,
            data: re
                .data
                .iter()
                .zip(&im.data)
                .map(|(&r, &i)| Complex64::new(r, i))
                .collect(),
        }
    }

    /// Complex product via four real products of the split parts.
    pub fn matmul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "complex matmul inner dimensions");
        let (ar, ai) = (self.re(), self.im());
        let (br, bi) = (rhs.re(), rhs.im());
        // C_re = Ar*Br - Ai*Bi, C_im = Ar*Bi + Ai*Br
        let mut cre = Mat::zeros(self.rows, rhs.cols);
        ar.matmul_into(&br, 1.0, 0.0, &mut cre);
        ai.matmul_into(&bi, -1.0, 1.0, &mut cre);
        let mut cim = Mat::zeros(self.rows, rhs.cols);
        ar.matmul_into(&bi, 1.0, 0.0, &mut cim);
        ai.matmul_into(&br, 1.0, 1.0, &mut cim);
        CMat::from_re_im(&cre, &cim)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, DimError> {
        if v.len() != self.cols {
            return Err(dim_err(
                format!("vector of length {}", self.cols),
                format!("length {}", v.len()),
                "complex matrix-vector product",
            ));
        }
        Ok((0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi rotation method.
///
/// Returned in descending order. Intended for the modest sizes used by the
/// singular-value experiments (n up to a few hundred).
pub fn symmetric_eigenvalues(a: &Mat) -> Vec<f64> {
    assert_eq!(
        a.rows, a.cols,
        "symmetric_eigenvalues needs a square matrix"
    );
    let n = a.rows;
    let mut m = a.clone();
    let scale = m.data.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 || n == 1 {
        let mut d: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
        d.sort_by(|x, y| y.partial_cmp(x).unwrap());
        return d;
    }
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m.get(p, q).abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= tol {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    d.sort_by(|x, y| y.partial_cmp(x).unwrap());
    d
}

/// Singular values of a rectangular matrix, descending, via the eigenvalues
/// of the Gram matrix (the smaller of A^T A and A A^T).
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let gram = if a.rows >= a.cols {
        a.t_matmul(a)
    } else {
        a.matmul_t(a)
    };
    symmetric_eigenvalues(&gram)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_naive() {
        let a = Mat::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        let b = Mat::from_fn(4, 2, |r, c| (r as f64) - (c as f64) * 0.5);
        let c = a.matmul(&b);
        for r in 0..3 {
            for col in 0..2 {
                let want: f64 = (0..4).map(|k| a.get(r, k) * b.get(k, col)).sum();
                assert!((c.get(r, col) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_products_agree() {
        let a = Mat::from_fn(5, 3, |r, c| (r as f64 * 0.3 - c as f64).sin());
        let b = Mat::from_fn(5, 4, |r, c| (r as f64 + c as f64 * 0.7).cos());
        let direct = a.transpose().matmul(&b);
        let fused = a.t_matmul(&b);
        for r in 0..3 {
            for c in 0..4 {
                assert!((direct.get(r, c) - fused.get(r, c)).abs() < 1e-12);
            }
        }
        let d = Mat::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.1);
        let direct2 = a.matmul(&d.transpose());
        let fused2 = a.matmul_t(&d);
        for r in 0..5 {
            for c in 0..4 {
                assert!((direct2.get(r, c) - fused2.get(r, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn complex_matmul_matches_naive() {
        let a = CMat::from_fn(3, 3, |r, c| {
            Complex64::new(r as f64 - c as f64, (r + 2 * c) as f64 * 0.25)
        });
        let b = CMat::from_fn(3, 2, |r, c| Complex64::new(0.5 * r as f64, c as f64 - 1.0));
        let p = a.matmul(&b);
        for r in 0..3 {
            for c in 0..2 {
                let want: Complex64 = (0..3).map(|k| a.get(r, k) * b.get(k, c)).sum();
                assert!((p.get(r, c) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(5, 2, -1) conjugated by a rotation keeps its eigenvalues
        let n = 3;
        let mut q = Mat::identity(n);
        let (c, s) = (0.8, 0.6);
        q.set(0, 0, c);
        q.set(0, 1, -s);
        q.set(1, 0, s);
        q.set(1, 1, c);
        let d = Mat::from_fn(
            n,
            n,
            |r, col| {
                if r == col {
                    [5.0, 2.0, -1.0][r]
                } else {
                    0.0
                }
            },
        );
        let a = q.matmul(&d).matmul(&q.transpose());
        let eig = symmetric_eigenvalues(&a);
        assert!((eig[0] - 5.0).abs() < 1e-10);
        assert!((eig[1] - 2.0).abs() < 1e-10);
        assert!((eig[2] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn singular_values_of_scaled_identity() {
        let mut a = Mat::zeros(4, 2);
        a.set(0, 0, 3.0);
        a.set(1, 1, -2.0);
        let sv = singular_values(&a);
        assert_eq!(sv.len(), 2);
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 2.0).abs() < 1e-12);
    }
}
