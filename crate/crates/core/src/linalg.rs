//! Small dense linear algebra for the regression and GRS paths.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Householder QR factorisation of a tall matrix, kept in compact form.
pub struct Qr {
    /// Upper triangle holds R; below the diagonal are the Householder vectors.
    qr: Matrix,
    /// Leading coefficient of each reflector.
    betas: Vec<f64>,
    r_diag: Vec<f64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Self {
        let (m, n) = (a.rows, a.cols);
        assert!(m >= n, "QR requires rows >= cols");
        let mut qr = a.clone();
        let mut betas = vec![0.0; n];
        let mut r_diag = vec![0.0; n];
        for k in 0..n {
            let norm = (k..m)
                .map(|i| {
                    let v = qr.get(i, k);
                    v * v
                })
                .sum::<f64>();
            let norm = libm::sqrt(norm);
            if norm == 0.0 {
                r_diag[k] = 0.0;
                continue;
            }
            let alpha = if qr.get(k, k) > 0.0 { -norm } else { norm };
            // v = x - alpha e1, stored in column k from row k down.
            let v0 = qr.get(k, k) - alpha;
            qr.set(k, k, v0);
            let vtv: f64 = (k..m)
                .map(|i| {
                    let v = qr.get(i, k);
                    v * v
                })
                .sum();
            let beta = 2.0 / vtv;
            for j in k + 1..n {
                let dot: f64 = (k..m).map(|i| qr.get(i, k) * qr.get(i, j)).sum();
                let s = beta * dot;
                for i in k..m {
                    let v = qr.get(i, j) - s * qr.get(i, k);
                    qr.set(i, j, v);
                }
            }
            betas[k] = beta;
            r_diag[k] = alpha;
        }
        Self { qr, betas, r_diag }
    }

    /// Columns whose pivot is negligible relative to the column norms.
    pub fn deficient_columns(&self, a: &Matrix) -> Vec<usize> {
        let n = a.cols;
        (0..n)
            .filter(|&k| {
                let col_norm = libm::sqrt(
                    (0..a.rows)
                        .map(|i| {
                            let v = a.get(i, k);
                            v * v
                        })
                        .sum::<f64>(),
                );
                let rel = if col_norm > 0.0 {
                    self.r_diag[k].abs() / col_norm
                } else {
                    0.0
                };
                rel < 1e-10
            })
            .collect()
    }

    /// Apply Qᵀ to `b` in place.
    fn apply_qt(&self, b: &mut [f64]) {
        let (m, n) = (self.qr.rows, self.qr.cols);
        for k in 0..n {
            if self.betas[k] == 0.0 {
                continue;
            }
            let dot: f64 = (k..m).map(|i| self.qr.get(i, k) * b[i]).sum();
            let s = self.betas[k] * dot;
            for (i, bi) in b.iter_mut().enumerate().take(m).skip(k) {
                *bi -= s * self.qr.get(i, k);
            }
        }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.r_diag[i]
        } else {
            self.qr.get(i, j)
        }
    }

    /// Least-squares solution of `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.qr.cols;
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.r(i, j) * x[j]).sum();
            x[i] = (qtb[i] - s) / self.r(i, i);
        }
        x
    }

    /// `(AᵀA)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn gram_inverse(&self) -> Matrix {
        let n = self.qr.cols;
        // R⁻¹ by back substitution, column by column.
        let mut rinv = Matrix::zeros(n, n);
        for c in 0..n {
            for i in (0..=c).rev() {
                let rhs = if i == c { 1.0 } else { 0.0 };
                let s: f64 = (i + 1..=c).map(|j| self.r(i, j) * rinv.get(j, c)).sum();
                rinv.set(i, c, (rhs - s) / self.r(i, i));
            }
        }
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (i.max(j)..n).map(|k| rinv.get(i, k) * rinv.get(j, k)).sum();
                out.set(i, j, s);
            }
        }
        out
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// if a pivot is not safely positive.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let s: f64 = (0..j)
            .map(|k| {
                let v = l.get(j, k);
                v * v
            })
            .sum();
        let d = a.get(j, j) - s;
        if !(d > 1e-13 * scale) {
            return None;
        }
        let d = libm::sqrt(d);
        l.set(j, j, d);
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| l.get(i, k) * l.get(j, k)).sum();
            l.set(i, j, (a.get(i, j) - s) / d);
        }
    }
    Some(l)
}

/// `xᵀ A⁻¹ x` given the Cholesky factor `L` of `A`.
pub fn inverse_quad_form(l: &Matrix, x: &[f64]) -> f64 {
    let n = l.rows;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l.get(i, k) * y[k]).sum();
        y[i] = (x[i] - s) / l.get(i, i);
    }
    y.iter().map(|v| v * v).sum()
}

/// Covariance of the columns of `data` (`rows` observations) with the given
/// divisor.
pub fn covariance(columns: &[Vec<f64>], divisor: f64) -> Matrix {
    let k = columns.len();
    let means: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let mut out = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let s: f64 = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum();
            out.set(i, j, s / divisor);
            out.set(j, i, s / divisor);
        }
    }
    out
}
