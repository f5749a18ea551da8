//! Dense row-major matrices and the handful of kernels the network needs.

/// Row-major `rows x cols` matrix of 64-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        Mat { rows, cols, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `C = alpha * op(A) * op(B) + beta * C` where `op(A)` is `m x k` and
/// `op(B)` is `k x n`, all row-major. With `trans_a` the slice `a` holds a
/// `k x m` matrix, likewise for `b`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c[..m * n].iter_mut().for_each(|x| *x = 0.0);
        } else {
            c[..m * n].iter_mut().for_each(|x| *x *= beta);
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: bounds asserted above; strides describe the stated layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out = x * w` for `x: rows x w.rows`.
pub fn matmul(x: &[f64], rows: usize, w: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; rows * w.cols];
    gemm(rows, w.rows, w.cols, 1.0, x, false, &w.data, false, 0.0, &mut out);
    out
}

/// `out += x * w`.
pub fn matmul_acc(x: &[f64], rows: usize, w: &Mat, out: &mut [f64]) {
    gemm(rows, w.rows, w.cols, 1.0, x, false, &w.data, false, 1.0, out);
}

/// `out = d * w^T`, mapping output-side gradients back to the input side.
pub fn matmul_t(d: &[f64], rows: usize, w: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; rows * w.rows];
    gemm(rows, w.cols, w.rows, 1.0, d, false, &w.data, true, 0.0, &mut out);
    out
}

/// `grad += x^T * d` for `x: rows x grad.rows`, `d: rows x grad.cols`.
pub fn outer_acc(x: &[f64], d: &[f64], rows: usize, grad: &mut Mat) {
    let (k, n) = (grad.rows, grad.cols);
    gemm(k, rows, n, 1.0, x, true, d, false, 1.0, &mut grad.data);
}

/// `bias += column sums of d`.
pub fn colsum_acc(d: &[f64], rows: usize, bias: &mut Mat) {
    let n = bias.cols;
    for r in 0..rows {
        for (b, v) in bias.data.iter_mut().zip(&d[r * n..(r + 1) * n]) {
            *b += v;
        }
    }
}

pub fn add_bias(x: &mut [f64], rows: usize, bias: &Mat) {
    let n = bias.cols;
    for r in 0..rows {
        for (v, b) in x[r * n..(r + 1) * n].iter_mut().zip(&bias.data) {
            *v += b;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place softmax; entries equal to `-inf` get probability zero.
pub fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    for v in x.iter_mut() {
        *v /= z;
    }
}

/// Concatenate row-wise: each output row is `[a_row, b_row]`.
pub fn concat_cols(a: &[f64], a_cols: usize, b: &[f64], b_cols: usize, rows: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * (a_cols + b_cols));
    for r in 0..rows {
        out.extend_from_slice(&a[r * a_cols..(r + 1) * a_cols]);
        out.extend_from_slice(&b[r * b_cols..(r + 1) * b_cols]);
    }
    out
}

/// Inverse of [`concat_cols`].
pub fn split_cols(x: &[f64], a_cols: usize, b_cols: usize, rows: usize) -> (Vec<f64>, Vec<f64>) {
    let w = a_cols + b_cols;
    let mut a = Vec::with_capacity(rows * a_cols);
    let mut b = Vec::with_capacity(rows * b_cols);
    for r in 0..rows {
        a.extend_from_slice(&x[r * w..r * w + a_cols]);
        b.extend_from_slice(&x[r * w + a_cols..(r + 1) * w]);
    }
    (a, b)
}
