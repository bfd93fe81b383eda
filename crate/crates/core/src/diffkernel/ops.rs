use super::tensor::Parameter;
use crate::{Error, Result};

/// Negative slope of the leaky ReLU used by the curiosity networks.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Added inside the log of [`cross_entropy`].
pub const CE_EPSILON: f64 = 1e-12;

/// `y = W x` for a row-major `W` of shape `[rows, cols]`.
pub fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    w.chunks_exact(cols)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// `y = W^T g` for a row-major `W` of shape `[rows, cols]`.
pub fn matvec_transposed(w: &[f64], rows: usize, cols: usize, g: &[f64]) -> Vec<f64> {
    debug_assert_eq!(g.len(), rows);
    let mut out = vec![0.0; cols];
    for (row, &gi) in w.chunks_exact(cols).zip(g) {
        if gi == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(row) {
            *o += a * gi;
        }
    }
    out
}

/// `grad_w += g x^T`.
fn outer_accumulate(grad_w: &mut [f64], cols: usize, g: &[f64], x: &[f64]) {
    for (row, &gi) in grad_w.chunks_exact_mut(cols).zip(g) {
        if gi == 0.0 {
            continue;
        }
        for (d, &xj) in row.iter_mut().zip(x) {
            *d += gi * xj;
        }
    }
}

/// `W x (+ b)`. The caller keeps `x` for [`affine_backward`].
pub fn affine_forward(w: &Parameter, b: Option<&Parameter>, x: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = (w.value.rows(), w.value.cols());
    if x.len() != cols {
        return Err(Error::dim("affine_forward", cols, x.len()));
    }
    let mut y = matvec(w.value.data(), rows, cols, x);
    if let Some(b) = b {
        if b.value.len() != rows {
            return Err(Error::dim("affine_forward bias", rows, b.value.len()));
        }
        for (yi, bi) in y.iter_mut().zip(b.value.data()) {
            *yi += bi;
        }
    }
    Ok(y)
}

/// Accumulates `dW`, `db` and returns `dx`.
pub fn affine_backward(
    w: &mut Parameter,
    b: Option<&mut Parameter>,
    x: &[f64],
    grad_out: &[f64],
) -> Vec<f64> {
    let (rows, cols) = (w.value.rows(), w.value.cols());
    debug_assert_eq!(grad_out.len(), rows);
    outer_accumulate(w.grad.data_mut(), cols, grad_out, x);
    if let Some(b) = b {
        for (d, g) in b.grad.data_mut().iter_mut().zip(grad_out) {
            *d += g;
        }
    }
    matvec_transposed(w.value.data(), rows, cols, grad_out)
}

/// Elementwise nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    LeakyRelu(f64),
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn leaky() -> Self {
        Activation::LeakyRelu(LEAKY_SLOPE)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }

    pub fn forward(self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.apply(v)).collect()
    }

    pub fn backward(self, x: &[f64], y: &[f64], grad_out: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(y)
            .zip(grad_out)
            .map(|((&xi, &yi), &g)| g * self.derivative(xi, yi))
            .collect()
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Vector-Jacobian product of softmax given its output `y`.
pub fn softmax_backward(y: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(grad_out).map(|(a, b)| a * b).sum();
    y.iter().zip(grad_out).map(|(yi, gi)| yi * (gi - dot)).collect()
}

/// `-ln(dist[target] + eps)`.
pub fn cross_entropy(dist: &[f64], target: usize) -> Result<f64> {
    let p = dist.get(target).ok_or(Error::IndexOutOfRange {
        index: target,
        size: dist.len(),
    })?;
    Ok(-(p + CE_EPSILON).ln())
}

/// Gradient of `cross_entropy(softmax(x), target)` with respect to `x`.
pub fn softmax_cross_entropy_grad(dist: &[f64], target: usize) -> Vec<f64> {
    let mut g = dist.to_vec();
    g[target] -= 1.0;
    g
}
