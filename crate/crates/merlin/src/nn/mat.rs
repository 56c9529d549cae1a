//! Minimal row-major matrix with GEMM helpers.

/// Dense row-major `rows x cols` matrix of `f64`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Mat {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        Mat {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Resizes in place (contents unspecified afterwards).
    pub fn reshape(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.resize(rows * cols, 0.0);
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }
}

/// General slice-level GEMM: `C = A * B + beta * C` with explicit strides.
/// Shapes are `m x k`, `k x n`, and `m x n`; row/column strides let callers
/// pass transposed views without copying.
#[allow(clippy::too_many_arguments)]
pub fn dgemm_slices(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    debug_assert!(c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

/// `c = a * b` (overwrites `c`, reshaping it as needed).
pub fn matmul(c: &mut Mat, a: &Mat, b: &Mat) {
    assert_eq!(a.cols, b.rows, "matmul shape mismatch");
    c.reshape(a.rows, b.cols);
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            1.0,
            a.data.as_ptr(),
            a.cols as isize,
            1,
            b.data.as_ptr(),
            b.cols as isize,
            1,
            0.0,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// `c = a^T * b` where `a` is stored `k x m` and `b` is `k x n`.
pub fn matmul_at_b(c: &mut Mat, a: &Mat, b: &Mat) {
    assert_eq!(a.rows, b.rows, "matmul_at_b shape mismatch");
    c.reshape(a.cols, b.cols);
    unsafe {
        matrixmultiply::dgemm(
            a.cols,
            a.rows,
            b.cols,
            1.0,
            a.data.as_ptr(),
            1,
            a.cols as isize,
            b.data.as_ptr(),
            b.cols as isize,
            1,
            0.0,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// `c = a * b^T` where `a` is `m x k` and `b` is stored `n x k`.
pub fn matmul_a_bt(c: &mut Mat, a: &Mat, b: &Mat) {
    assert_eq!(a.cols, b.cols, "matmul_a_bt shape mismatch");
    c.reshape(a.rows, b.rows);
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.rows,
            1.0,
            a.data.as_ptr(),
            a.cols as isize,
            1,
            b.data.as_ptr(),
            1,
            b.cols as isize,
            0.0,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small_oracle() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Mat::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]);
        let mut c = Mat::zeros(0, 0);
        matmul(&mut c, &a, &b);
        assert_eq!(c.data, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transposed_products_match_naive() {
        let a = Mat::from_rows(&[&[1.0, -2.0, 0.5], &[0.0, 3.0, 1.0]]); // 2x3
        let b = Mat::from_rows(&[&[2.0, 1.0], &[0.5, -1.0]]); // 2x2
        let mut c = Mat::zeros(0, 0);
        matmul_at_b(&mut c, &a, &b); // 3x2 = a^T * b
        for i in 0..3 {
            for j in 0..2 {
                let naive: f64 = (0..2).map(|k| a.row(k)[i] * b.row(k)[j]).sum();
                assert!((c.row(i)[j] - naive).abs() < 1e-12);
            }
        }
        let e = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]); // 2x3
        let mut d = Mat::zeros(0, 0);
        matmul_a_bt(&mut d, &a, &e); // 2x2 = a * e^T
        for i in 0..2 {
            for j in 0..2 {
                let naive: f64 = (0..3).map(|k| a.row(i)[k] * e.row(j)[k]).sum();
                assert!((d.row(i)[j] - naive).abs() < 1e-12);
            }
        }
    }
}
