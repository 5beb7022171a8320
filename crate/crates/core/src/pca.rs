//! PCA over a stacked image matrix: mean centering, SVD-backed projection
//! to the leading principal directions, and out-of-sample projection.

use crate::numerics::{svd, Matrix, NumericsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("input matrix is empty")]
    EmptyInput,
    #[error("need at least 2 samples to fit, got {n}")]
    TooFewSamples { n: usize },
    #[error("component count {j} out of range 1..={max}")]
    BadComponentCount { j: usize, max: usize },
    #[error("image length {got} does not match feature count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Fitted PCA: mean image, retained directions, and per-sample scores.
#[derive(Debug, Clone)]
pub struct PcaModel {
    /// Column-wise mean of the input matrix, length P.
    pub mean: Vec<f64>,
    /// Retained principal directions, P x j with orthonormal columns.
    pub components: Matrix,
    /// Leading j singular values of the centered matrix, non-increasing.
    pub singular_values: Vec<f64>,
    /// Per-sample scores, N x j: left singular vectors scaled by sigma.
    pub coords: Matrix,
}

/// Subtract the column-wise mean from every row.
pub fn mean_center(images: &Matrix) -> (Matrix, Vec<f64>) {
    let n = images.rows();
    let p = images.cols();
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(images.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut centered = images.clone();
    for i in 0..n {
        for j in 0..p {
            let v = centered.get(i, j) - mean[j];
            centered.set(i, j, v);
        }
    }
    (centered, mean)
}

/// Fit PCA on an N x P image matrix and project every row to j scores.
pub fn fit_project(images: &Matrix, j: usize) -> Result<PcaModel, PcaError> {
    let n = images.rows();
    let p = images.cols();
    if n < 2 {
        return Err(PcaError::TooFewSamples { n });
    }
    let r = n.min(p);
    if j == 0 || j > r {
        return Err(PcaError::BadComponentCount { j, max: r });
    }

    let (centered, mean) = mean_center(images);
    let decomp = svd(&centered)?;

    let mut components = Matrix::zeros(p, j);
    for row in 0..p {
        for col in 0..j {
            components.set(row, col, decomp.v.get(row, col));
        }
    }
    let singular_values: Vec<f64> = decomp.sigma[..j].to_vec();
    let mut coords = Matrix::zeros(n, j);
    for row in 0..n {
        for col in 0..j {
            coords.set(row, col, decomp.u.get(row, col) * decomp.sigma[col]);
        }
    }
    Ok(PcaModel {
        mean,
        components,
        singular_values,
        coords,
    })
}

/// Project a held-out image: `(image - mean) . components`.
pub fn project_new(model: &PcaModel, image: &[f64]) -> Result<Vec<f64>, PcaError> {
    let p = model.mean.len();
    if image.len() != p {
        return Err(PcaError::LengthMismatch {
            expected: p,
            got: image.len(),
        });
    }
    let j = model.components.cols();
    let mut out = vec![0.0; j];
    for row in 0..p {
        let centered = image[row] - model.mean[row];
        if centered == 0.0 {
            continue;
        }
        for (col, o) in out.iter_mut().enumerate() {
            *o += centered * model.components.get(row, col);
        }
    }
    Ok(out)
}

/// Render per-sample scores as `index,x,y` CSV with 17-significant-digit
/// decimals (only meaningful for j = 2 fits, the audit default).
pub fn coords_to_csv(model: &PcaModel) -> String {
    let mut out = String::from("index,x,y\n");
    for i in 0..model.coords.rows() {
        let x = model.coords.get(i, 0);
        let y = if model.coords.cols() > 1 {
            model.coords.get(i, 1)
        } else {
            0.0
        };
        out.push_str(&format!("{i},{x:.16e},{y:.16e}\n"));
    }
    out
}
