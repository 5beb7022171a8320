//! Dense row-major matrices and a one-sided Jacobi SVD.
//!
//! Everything here is deterministic: fixed summation orders, fixed sweep
//! orders, and a fixed sign convention for singular vectors, so identical
//! inputs produce identical output bytes.

use thiserror::Error;

/// Convergence threshold for the Jacobi sweeps (relative column orthogonality).
const JACOBI_TOL: f64 = 1e-12;

/// Hard cap on Jacobi sweeps before reporting non-convergence.
const MAX_SWEEPS: usize = 1000;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("dimension mismatch: cannot multiply {a_rows}x{a_cols} by {b_rows}x{b_cols}")]
    DimMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
    #[error("svd did not converge after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
}

/// Dense matrix of 64-bit floats, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build a matrix from row-major data. Rejects empty shapes, length
    /// mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if rows == 0 || cols == 0 {
            return Err(NumericsError::Empty);
        }
        if data.len() != rows * cols {
            return Err(NumericsError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Standard matrix product with a fixed (i, k, j) loop order.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if a.cols != b.rows {
        return Err(NumericsError::DimMismatch {
            a_rows: a.rows,
            a_cols: a.cols,
            b_rows: b.rows,
            b_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for j in 0..b.cols {
                orow[j] += aik * brow[j];
            }
        }
    }
    Ok(out)
}

/// Thin singular value decomposition `m = u * diag(sigma) * v^T`.
///
/// `u` is N x r and `v` is P x r with r = min(N, P); `sigma` is sorted
/// non-increasing. Each right singular vector is flipped so its
/// largest-magnitude entry (earliest index on ties) is positive.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    /// Rebuild `u * diag(sigma) * v^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.u.rows();
        let p = self.v.rows();
        let r = self.sigma.len();
        let mut out = Matrix::zeros(n, p);
        for i in 0..n {
            for k in 0..r {
                let scale = self.u.get(i, k) * self.sigma[k];
                if scale == 0.0 {
                    continue;
                }
                for j in 0..p {
                    out.data[i * p + j] += scale * self.v.get(j, k);
                }
            }
        }
        out
    }
}

/// One-sided Jacobi SVD of an arbitrary matrix.
///
/// The sweep always runs on the tall orientation (rows >= cols); for wide
/// inputs the factors of the transpose are swapped back.
pub fn svd(m: &Matrix) -> Result<SvdResult, NumericsError> {
    if let Some(index) = m.data.iter().position(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite { index });
    }
    if m.rows >= m.cols {
        let (u, sigma, v) = hestenes(m)?;
        let mut result = SvdResult { u, sigma, v };
        fix_signs(&mut result);
        Ok(result)
    } else {
        let (u, sigma, v) = hestenes(&m.transpose())?;
        // m^T = u S v^T  =>  m = v S u^T
        let mut result = SvdResult { u: v, sigma, v: u };
        fix_signs(&mut result);
        Ok(result)
    }
}

/// Hestenes one-sided orthogonalization on a tall matrix (rows >= cols).
/// Returns (U m x n, sigma n, V n x n).
fn hestenes(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix), NumericsError> {
    let m = a.rows;
    let n = a.cols;
    debug_assert!(m >= n);

    // Column-major working copies: the sweep touches whole columns.
    let mut work: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut col = vec![0.0; n];
            col[j] = 1.0;
            col
        })
        .collect();

    // Columns whose squared norm falls this far below the total energy are
    // numerically zero: annihilating a parallel column pair leaves an
    // eps-scale remnant that is still exactly parallel, so without the
    // floor the relative-orthogonality measure never drops on rank-deficient
    // inputs.
    let frob2: f64 = work.iter().map(|c| dot(c, c)).sum();
    let zero_floor = frob2 * 1e-28;

    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut norms: Vec<f64> = work.iter().map(|c| dot(c, c)).collect();
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                if norms[p] <= zero_floor || norms[q] <= zero_floor {
                    continue;
                }
                let gamma = dot_pair(&work, p, q);
                let denom = (norms[p] * norms[q]).sqrt();
                if denom == 0.0 {
                    continue;
                }
                let off = gamma.abs() / denom;
                worst = worst.max(off);
                if off <= JACOBI_TOL {
                    continue;
                }
                let zeta = (norms[q] - norms[p]) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut work, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
                // Exact norm update for the rotated pair.
                let np = c * c * norms[p] - 2.0 * c * s * gamma + s * s * norms[q];
                let nq = s * s * norms[p] + 2.0 * c * s * gamma + c * c * norms[q];
                norms[p] = np;
                norms[q] = nq;
            }
        }
        residual = worst;
        if worst <= JACOBI_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericsError::NoConvergence {
            sweeps: MAX_SWEEPS,
            residual,
        });
    }

    // Singular values are the column norms; sort descending, stable on ties.
    let mut sigmas: Vec<f64> = work.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigmas[j].partial_cmp(&sigmas[i]).unwrap());
    let work: Vec<Vec<f64>> = order.iter().map(|&j| work[j].clone()).collect();
    let v: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    sigmas = order.iter().map(|&j| sigmas[j]).collect();

    // Normalize left vectors; complete the basis where sigma underflows.
    let sigma_max = sigmas.first().copied().unwrap_or(0.0);
    let tiny = sigma_max * 1e-13;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (j, col) in work.into_iter().enumerate() {
        if sigmas[j] > tiny && sigmas[j] > 0.0 {
            u_cols.push(col.iter().map(|x| x / sigmas[j]).collect());
        } else {
            u_cols.push(complete_basis(&u_cols, m));
        }
    }

    let mut u_mat = Matrix::zeros(m, n);
    for (j, col) in u_cols.iter().enumerate() {
        for i in 0..m {
            u_mat.data[i * n + j] = col[i];
        }
    }
    let mut v_mat = Matrix::zeros(n, n);
    for (j, col) in v.iter().enumerate() {
        for i in 0..n {
            v_mat.data[i * n + j] = col[i];
        }
    }
    Ok((u_mat, sigmas, v_mat))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_pair(cols: &[Vec<f64>], p: usize, q: usize) -> f64 {
    dot(&cols[p], &cols[q])
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = c * *x - s * *y;
        let xq = s * *x + c * *y;
        *x = xp;
        *y = xq;
    }
}

/// Find a unit vector orthogonal to all accumulated columns by projecting
/// standard basis vectors (two Gram-Schmidt passes, earliest viable index).
fn complete_basis(cols: &[Vec<f64>], m: usize) -> Vec<f64> {
    for k in 0..m {
        let mut cand = vec![0.0; m];
        cand[k] = 1.0;
        for _pass in 0..2 {
            for col in cols {
                let proj = dot(&cand, col);
                for (c, &u) in cand.iter_mut().zip(col) {
                    *c -= proj * u;
                }
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        if norm > 0.5 {
            for c in cand.iter_mut() {
                *c /= norm;
            }
            return cand;
        }
    }
    unreachable!("fewer than m orthonormal columns always leave room in R^m");
}

/// Make the largest-magnitude entry of each right singular vector positive
/// (earliest index wins ties); the paired left vector flips with it.
fn fix_signs(svd: &mut SvdResult) {
    let r = svd.sigma.len();
    for j in 0..r {
        let mut best = 0usize;
        let mut best_abs = svd.v.get(0, j).abs();
        for i in 1..svd.v.rows() {
            let a = svd.v.get(i, j).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if svd.v.get(best, j) < 0.0 {
            for i in 0..svd.v.rows() {
                let val = -svd.v.get(i, j);
                svd.v.set(i, j, val);
            }
            for i in 0..svd.u.rows() {
                let val = -svd.u.get(i, j);
                svd.u.set(i, j, val);
            }
        }
    }
}
