//! Small dense linear-algebra helpers on top of `faer`.
//!
//! Every routine runs sequentially so results do not depend on the number of
//! worker threads.

use faer::{Mat, MatRef};

use crate::error::{CoreError, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha == 0.0 {
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

/// Row-major buffer to a `faer` matrix.
pub fn mat_from_row_major(rows: usize, cols: usize, data: &[f64]) -> Mat<f64> {
    debug_assert_eq!(rows * cols, data.len());
    Mat::from_fn(rows, cols, |i, j| data[i * cols + j])
}

pub fn mat_to_row_major(m: MatRef<'_, f64>) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn column(m: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn matmul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        faer::Accum::Replace,
        a,
        b,
        1.0,
        faer::Par::Seq,
    );
    out
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

/// Thin SVD with non-increasing singular values.
///
/// Each left singular vector is flipped so that its largest-magnitude entry
/// is positive (ties go to the lowest index); the matching right vector is
/// flipped along with it.
pub fn thin_svd(a: MatRef<'_, f64>) -> Result<ThinSvd> {
    let svd = a
        .thin_svd()
        .map_err(|e| CoreError::Linalg(format!("svd did not converge: {e:?}")))?;
    let mut u = svd.U().to_owned();
    let mut v = svd.V().to_owned();
    let s: Vec<f64> = (0..u.ncols()).map(|j| svd.S()[j]).collect();
    for j in 0..u.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..u.nrows() {
            let x = u[(i, j)].abs();
            if x > best_abs {
                best_abs = x;
                best = i;
            }
        }
        if u.nrows() > 0 && u[(best, j)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.nrows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
    Ok(ThinSvd { u, s, v })
}

/// `max |QᵀQ - I|` over all entries.
pub fn orthonormality_defect(q: MatRef<'_, f64>) -> f64 {
    let g = matmul(q.transpose(), q);
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Minimum-norm solutions of the wide system `B X = I`.
///
/// `bt` is `Bᵀ` (tall, `n × r`). Column `j` of the result solves
/// `B x = e_j` with the smallest Euclidean norm. Returns the solutions and the
/// residual `‖B x_j - e_j‖` of each column.
pub fn min_norm_right_inverse(bt: MatRef<'_, f64>, rank_tol: f64) -> Result<(Mat<f64>, Vec<f64>)> {
    let (n, r) = bt.shape();
    if n < r {
        return Err(CoreError::IllConditionedInterpolation {
            residual: f64::INFINITY,
        });
    }
    let qr = bt.col_piv_qr();
    let q = qr.compute_thin_Q();
    let rr = qr.thin_R();
    let (fwd, _) = qr.P().arrays();
    let r00 = rr[(0, 0)].abs();
    let mut solutions = Mat::<f64>::zeros(n, r);
    let deficient = (0..r).any(|i| !(rr[(i, i)].abs() > rank_tol * r00));
    if r00 == 0.0 || deficient {
        let residual = (0..r)
            .map(|i| rr[(i, i)].abs() / r00.max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min);
        return Err(CoreError::IllConditionedInterpolation {
            residual: (1.0 - residual).max(0.0),
        });
    }
    for c in 0..r {
        // rhs in pivoted order: y_j = δ(fwd[j], c)
        let mut z = vec![0.0; r];
        for j in 0..r {
            let mut acc = if fwd[j] == c { 1.0 } else { 0.0 };
            for i in 0..j {
                acc -= rr[(i, j)] * z[i];
            }
            z[j] = acc / rr[(j, j)];
        }
        for row in 0..n {
            let mut acc = 0.0;
            for (i, zi) in z.iter().enumerate() {
                acc += q[(row, i)] * zi;
            }
            solutions[(row, c)] = acc;
        }
    }
    let check = matmul(bt.transpose(), solutions.as_ref());
    let residuals = (0..r)
        .map(|c| {
            (0..r)
                .map(|i| {
                    let t = if i == c { 1.0 } else { 0.0 };
                    (check[(i, c)] - t).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok((solutions, residuals))
}
