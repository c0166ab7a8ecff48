use rand::Rng;

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Gelu,
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => 0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2)),
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation input.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                cdf + x * pdf
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }

    pub fn forward(self, x: &Matrix) -> Matrix {
        x.map(|v| self.apply(v))
    }

    /// `d_out ⊙ σ'(pre)`
    pub fn backward(self, pre: &Matrix, d_out: &Matrix) -> Matrix {
        let mut d = d_out.clone();
        for (g, &p) in d.data.iter_mut().zip(&pre.data) {
            *g *= self.derivative(p);
        }
        d
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Gelu => "gelu",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "gelu" => Activation::Gelu,
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "identity" => Activation::Identity,
            _ => return None,
        })
    }
}

/// `y = x·W + b`, `b` broadcast over rows.
pub fn affine_forward(x: &Matrix, weight: &Matrix, bias: &Matrix) -> Result<Matrix> {
    if bias.rows != 1 || bias.cols != weight.cols {
        return Err(Error::ShapeMismatch {
            op: "affine bias",
            lhs: weight.shape(),
            rhs: bias.shape(),
        });
    }
    let mut y = x.matmul(weight)?;
    for r in 0..y.rows {
        for (v, b) in y.row_mut(r).iter_mut().zip(&bias.data) {
            *v += b;
        }
    }
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct AffineGrads {
    pub d_input: Matrix,
    pub d_weight: Matrix,
    pub d_bias: Matrix,
}

pub fn affine_backward(x: &Matrix, weight: &Matrix, d_out: &Matrix) -> AffineGrads {
    AffineGrads {
        d_input: d_out.matmul_t(weight),
        d_weight: x.t_matmul(d_out),
        d_bias: d_out.column_sums(),
    }
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NormGrads {
    pub d_input: Matrix,
    pub d_gamma: Matrix,
    pub d_beta: Matrix,
}

/// Row-wise layer normalization with biased variance.
pub fn layer_norm_forward(
    x: &Matrix,
    gamma: &Matrix,
    beta: &Matrix,
    eps: f64,
) -> Result<(Matrix, LayerNormCache)> {
    if gamma.data.len() != x.cols || beta.data.len() != x.cols {
        return Err(Error::ShapeMismatch {
            op: "layer_norm",
            lhs: x.shape(),
            rhs: gamma.shape(),
        });
    }
    let n = x.cols as f64;
    let mut normalized = Matrix::zeros(x.rows, x.cols);
    let mut y = Matrix::zeros(x.rows, x.cols);
    let mut inv_std = Vec::with_capacity(x.rows);
    for r in 0..x.rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let is = 1.0 / (var + eps).sqrt();
        inv_std.push(is);
        let nr = normalized.row_mut(r);
        for (o, v) in nr.iter_mut().zip(row) {
            *o = (v - mean) * is;
        }
        let nr = normalized.row(r);
        for (c, o) in y.row_mut(r).iter_mut().enumerate() {
            *o = nr[c] * gamma.data[c] + beta.data[c];
        }
    }
    Ok((
        y,
        LayerNormCache {
            normalized,
            inv_std,
        },
    ))
}

pub fn layer_norm_backward(cache: &LayerNormCache, gamma: &Matrix, d_out: &Matrix) -> NormGrads {
    let (rows, cols) = d_out.shape();
    let n = cols as f64;
    let mut d_input = Matrix::zeros(rows, cols);
    let mut d_gamma = Matrix::zeros(1, cols);
    let mut d_beta = Matrix::zeros(1, cols);
    let mut d_norm = vec![0.0; cols];
    for r in 0..rows {
        let dy = d_out.row(r);
        let xh = cache.normalized.row(r);
        for c in 0..cols {
            d_gamma.data[c] += dy[c] * xh[c];
            d_beta.data[c] += dy[c];
            d_norm[c] = dy[c] * gamma.data[c];
        }
        let sum: f64 = d_norm.iter().sum();
        let dot: f64 = d_norm.iter().zip(xh).map(|(a, b)| a * b).sum();
        let is = cache.inv_std[r];
        for (c, o) in d_input.row_mut(r).iter_mut().enumerate() {
            *o = is / n * (n * d_norm[c] - sum - xh[c] * dot);
        }
    }
    NormGrads {
        d_input,
        d_gamma,
        d_beta,
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
    mode: Mode,
}

#[derive(Debug, Clone)]
pub struct BatchNormOutput {
    pub output: Matrix,
    pub cache: BatchNormCache,
    /// Per-feature batch mean and unbiased variance; `None` in eval mode.
    pub batch_stats: Option<(Vec<f64>, Vec<f64>)>,
}

/// Column-wise batch normalization. Train mode normalizes with the batch's
/// biased statistics and reports them so the caller can update running
/// averages; eval mode uses the running statistics only.
pub fn batch_norm_forward(
    x: &Matrix,
    gamma: &Matrix,
    beta: &Matrix,
    running_mean: &Matrix,
    running_var: &Matrix,
    eps: f64,
    mode: Mode,
) -> Result<BatchNormOutput> {
    let cols = x.cols;
    for p in [gamma, beta, running_mean, running_var] {
        if p.data.len() != cols {
            return Err(Error::ShapeMismatch {
                op: "batch_norm",
                lhs: x.shape(),
                rhs: p.shape(),
            });
        }
    }
    let (mean, var, stats) = match mode {
        Mode::Train => {
            if x.rows < 2 {
                return Err(Error::BatchTooSmall { size: x.rows });
            }
            let n = x.rows as f64;
            let mean: Vec<f64> = x.column_sums().data.iter().map(|s| s / n).collect();
            let mut var = vec![0.0; cols];
            for r in 0..x.rows {
                for (c, v) in x.row(r).iter().enumerate() {
                    var[c] += (v - mean[c]).powi(2);
                }
            }
            let unbiased = var.iter().map(|v| v / (n - 1.0)).collect();
            let biased: Vec<f64> = var.iter().map(|v| v / n).collect();
            (mean.clone(), biased, Some((mean, unbiased)))
        }
        Mode::Eval => (running_mean.data.clone(), running_var.data.clone(), None),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut normalized = Matrix::zeros(x.rows, cols);
    let mut output = Matrix::zeros(x.rows, cols);
    for r in 0..x.rows {
        for c in 0..cols {
            let h = (x.get(r, c) - mean[c]) * inv_std[c];
            normalized.set(r, c, h);
            output.set(r, c, h * gamma.data[c] + beta.data[c]);
        }
    }
    Ok(BatchNormOutput {
        output,
        cache: BatchNormCache {
            normalized,
            inv_std,
            mode,
        },
        batch_stats: stats,
    })
}

pub fn batch_norm_backward(cache: &BatchNormCache, gamma: &Matrix, d_out: &Matrix) -> NormGrads {
    let (rows, cols) = d_out.shape();
    let n = rows as f64;
    let mut d_gamma = Matrix::zeros(1, cols);
    let mut d_beta = Matrix::zeros(1, cols);
    for r in 0..rows {
        for c in 0..cols {
            d_gamma.data[c] += d_out.get(r, c) * cache.normalized.get(r, c);
            d_beta.data[c] += d_out.get(r, c);
        }
    }
    let mut d_input = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let g = gamma.data[c];
        let is = cache.inv_std[c];
        match cache.mode {
            Mode::Eval => {
                for r in 0..rows {
                    d_input.set(r, c, d_out.get(r, c) * g * is);
                }
            }
            Mode::Train => {
                // d_gamma/d_beta hold exactly the sums this formula needs.
                let sum = d_beta.data[c] * g;
                let dot = d_gamma.data[c] * g;
                for r in 0..rows {
                    let dn = d_out.get(r, c) * g;
                    let xh = cache.normalized.get(r, c);
                    d_input.set(r, c, is / n * (n * dn - sum - xh * dot));
                }
            }
        }
    }
    NormGrads {
        d_input,
        d_gamma,
        d_beta,
    }
}

/// Inverted dropout; returns the output and the applied scale mask (train only).
pub fn dropout_forward(
    x: &Matrix,
    rate: f64,
    mode: Mode,
    rng: &mut impl Rng,
) -> (Matrix, Option<Vec<f64>>) {
    if mode == Mode::Eval || rate <= 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.data.len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mut y = x.clone();
    for (v, m) in y.data.iter_mut().zip(&mask) {
        *v *= m;
    }
    (y, Some(mask))
}

pub fn dropout_backward(mask: Option<&[f64]>, d_out: &Matrix) -> Matrix {
    let mut d = d_out.clone();
    if let Some(mask) = mask {
        for (g, m) in d.data.iter_mut().zip(mask) {
            *g *= m;
        }
    }
    d
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&o| (o - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Loss `-log softmax(o)[target]` and its gradient `softmax(o) - onehot(target)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::ClassOutOfRange {
            class: target,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&o| (o - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}
