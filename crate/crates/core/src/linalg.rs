//! Dense row-major matrices and the one GEMM entry point the crate uses.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape { expected: rows * cols, actual: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape { expected: cols, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty-column matrix would panic
        (0..self.rows).map(move |r| self.row(r))
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

impl Op {
    fn dims(self, m: &Matrix) -> (usize, usize, isize, isize) {
        let (r, c) = (m.rows, m.cols);
        match self {
            Op::N => (r, c, c as isize, 1),
            Op::T => (c, r, 1, c as isize),
        }
    }
}

/// `c <- alpha * op(a) * op(b) + beta * c`
///
/// Single-threaded and therefore bit-reproducible for fixed inputs.
pub fn gemm(alpha: f64, a: &Matrix, op_a: Op, b: &Matrix, op_b: Op, beta: f64, c: &mut Matrix) {
    let (m, k, rsa, csa) = op_a.dims(a);
    let (kb, n, rsb, csb) = op_b.dims(b);
    assert_eq!(k, kb, "gemm inner dimensions");
    assert_eq!((c.rows, c.cols), (m, n), "gemm output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.data.iter_mut() {
            *v *= beta;
        }
        return;
    }
    // SAFETY: the asserts above pin every operand's logical shape to its
    // backing buffer, and the strides are the row-major strides of those
    // buffers (swapped for transposes), so every index touched by the
    // kernel is in bounds. `c` is borrowed mutably and cannot alias.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::Shape { expected: n, actual: a.cols });
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for p in 0..j {
                s -= l.get(i, p) * l.get(j, p);
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::invalid("matrix is not positive definite"));
                }
                l.set(i, i, crate::math::sqrt(s));
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves `l y = b` for lower-triangular `l`, overwriting `b` with `y`.
pub fn solve_lower_in_place(l: &Matrix, b: &mut [f64]) {
    for i in 0..l.rows {
        let mut s = b[i];
        for p in 0..i {
            s -= l.get(i, p) * b[p];
        }
        b[i] = s / l.get(i, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, ta: bool, b: &Matrix, tb: bool) -> Matrix {
        let at = |i: usize, j: usize| if ta { a.get(j, i) } else { a.get(i, j) };
        let bt = |i: usize, j: usize| if tb { b.get(j, i) } else { b.get(i, j) };
        let m = if ta { a.cols } else { a.rows };
        let k = if ta { a.rows } else { a.cols };
        let n = if tb { b.rows } else { b.cols };
        let mut c = Matrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += at(i, p) * bt(p, j);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_for_all_transposes() {
        let a = Matrix::from_vec(3, 4, (0..12).map(|v| v as f64 * 0.5 - 2.0).collect()).unwrap();
        let b = Matrix::from_vec(4, 3, (0..12).map(|v| (v as f64).sin()).collect()).unwrap();
        let at = naive(&a, true, &a, false);
        let mut c = Matrix::zeros(4, 4);
        gemm(1.0, &a, Op::T, &a, Op::N, 0.0, &mut c);
        for (x, y) in c.as_slice().iter().zip(at.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let ab = naive(&a, false, &b, false);
        let mut c = Matrix::zeros(3, 3);
        gemm(1.0, &a, Op::N, &b, Op::N, 0.0, &mut c);
        for (x, y) in c.as_slice().iter().zip(ab.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let abt = naive(&a, false, &a, true);
        let mut c = Matrix::zeros(3, 3);
        c.as_mut_slice().fill(1.0);
        gemm(2.0, &a, Op::N, &a, Op::T, 1.0, &mut c);
        for (x, y) in c.as_slice().iter().zip(abt.as_slice()) {
            assert!((x - (2.0 * y + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = Matrix::from_vec(3, 3, vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]).unwrap();
        let l = cholesky(&a).unwrap();
        let mut llt = Matrix::zeros(3, 3);
        gemm(1.0, &l, Op::N, &l, Op::T, 0.0, &mut llt);
        for (x, y) in llt.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut b = vec![1.0, 2.0, 3.0];
        solve_lower_in_place(&l, &mut b);
        let mut back = [0.0; 3];
        for i in 0..3 {
            back[i] = (0..3).map(|j| l.get(i, j) * b[j]).sum();
        }
        assert!((back[2] - 3.0).abs() < 1e-12 && (back[0] - 1.0).abs() < 1e-12);
        assert!(cholesky(&Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn from_rows_rejects_ragged() {
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
