//! Fusion of text and graph representations and the MLP classification head.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    affine_backward, affine_forward, softmax, softmax_cross_entropy, Activation, Matrix, ParamId,
    ParamKind, ParameterStore,
};

pub const NORM_EPS: f64 = 1e-12;

/// `x / max(‖x‖₂, 1e-12)`; the zero vector maps to itself.
pub fn l2_normalize(x: &[f64]) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_EPS);
    x.iter().map(|v| v / norm).collect()
}

#[derive(Debug, Clone)]
pub struct L2Cache {
    output: Matrix,
    norms: Vec<f64>,
}

/// Row-wise L2 normalization.
pub fn l2_normalize_rows(x: &Matrix) -> (Matrix, L2Cache) {
    let mut out = Matrix::zeros(x.rows, x.cols);
    let mut norms = Vec::with_capacity(x.rows);
    for r in 0..x.rows {
        let row = x.row(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        norms.push(norm);
        let denom = norm.max(NORM_EPS);
        for (o, v) in out.row_mut(r).iter_mut().zip(row) {
            *o = v / denom;
        }
    }
    (out.clone(), L2Cache { output: out, norms })
}

pub fn l2_normalize_rows_backward(cache: &L2Cache, d_out: &Matrix) -> Matrix {
    let mut d = Matrix::zeros(d_out.rows, d_out.cols);
    for r in 0..d_out.rows {
        let dy = d_out.row(r);
        let norm = cache.norms[r];
        let row = d.row_mut(r);
        if norm > NORM_EPS {
            let y = cache.output.row(r);
            let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
            for ((o, g), yv) in row.iter_mut().zip(dy).zip(y) {
                *o = (g - yv * dot) / norm;
            }
        } else {
            for (o, g) in row.iter_mut().zip(dy) {
                *o = g / NORM_EPS;
            }
        }
    }
    d
}

/// Concatenated, per-half normalized page representation.
#[derive(Debug, Clone, PartialEq)]
pub struct PageRepr {
    pub values: Vec<f64>,
}

impl PageRepr {
    pub fn width(&self) -> usize {
        self.values.len()
    }
}

pub fn fuse(
    text: &[f64],
    graph: &[f64],
    text_width: usize,
    graph_width: usize,
) -> Result<PageRepr> {
    if text.len() != text_width {
        return Err(Error::dim("text representation", text_width, text.len()));
    }
    if graph.len() != graph_width {
        return Err(Error::dim("graph representation", graph_width, graph.len()));
    }
    let mut values = l2_normalize(text);
    values.extend(l2_normalize(graph));
    Ok(PageRepr { values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub label: usize,
    pub loss: Option<f64>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Two-layer MLP: `W₂·σ(W₁x + b₁) + b₂`.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub hidden_weight: ParamId,
    pub hidden_bias: ParamId,
    pub out_weight: ParamId,
    pub out_bias: ParamId,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct ClassifierCache {
    input: Matrix,
    pre_hidden: Matrix,
    hidden: Matrix,
}

/// Default hidden width: `ceil((input + classes) / 2)`.
pub fn default_hidden_width(input: usize, classes: usize) -> usize {
    (input + classes).div_ceil(2)
}

impl Classifier {
    pub fn new(
        store: &mut ParameterStore,
        rng: &mut impl Rng,
        input: usize,
        hidden: usize,
        classes: usize,
        activation: Activation,
    ) -> Self {
        Self {
            hidden_weight: store.add_init(
                "mlp.hidden.weight",
                input,
                hidden,
                ParamKind::Weight,
                rng,
            ),
            hidden_bias: store.add_zeros("mlp.hidden.bias", 1, hidden, ParamKind::Bias),
            out_weight: store.add_init("mlp.out.weight", hidden, classes, ParamKind::Weight, rng),
            out_bias: store.add_zeros("mlp.out.bias", 1, classes, ParamKind::Bias),
            activation,
        }
    }

    pub fn input_width(&self, store: &ParameterStore) -> usize {
        store.value(self.hidden_weight).rows
    }

    pub fn classes(&self, store: &ParameterStore) -> usize {
        store.value(self.out_weight).cols
    }

    /// Logits for a batch of fused representations.
    pub fn forward(&self, store: &ParameterStore, x: &Matrix) -> Result<(Matrix, ClassifierCache)> {
        let pre_hidden = affine_forward(
            x,
            store.value(self.hidden_weight),
            store.value(self.hidden_bias),
        )?;
        let hidden = self.activation.forward(&pre_hidden);
        let logits = affine_forward(
            &hidden,
            store.value(self.out_weight),
            store.value(self.out_bias),
        )?;
        Ok((
            logits,
            ClassifierCache {
                input: x.clone(),
                pre_hidden,
                hidden,
            },
        ))
    }

    /// Returns the gradient with respect to the classifier input.
    pub fn backward(
        &self,
        store: &mut ParameterStore,
        cache: &ClassifierCache,
        d_logits: &Matrix,
    ) -> Matrix {
        let g2 = affine_backward(&cache.hidden, store.value(self.out_weight), d_logits);
        store.accumulate(self.out_weight, &g2.d_weight);
        store.accumulate(self.out_bias, &g2.d_bias);
        let d_pre = self.activation.backward(&cache.pre_hidden, &g2.d_input);
        let g1 = affine_backward(&cache.input, store.value(self.hidden_weight), &d_pre);
        store.accumulate(self.hidden_weight, &g1.d_weight);
        store.accumulate(self.hidden_bias, &g1.d_bias);
        g1.d_input
    }

    pub fn classify(
        &self,
        store: &ParameterStore,
        repr: &PageRepr,
        target: Option<usize>,
    ) -> Result<Prediction> {
        let width = self.input_width(store);
        if repr.width() != width {
            return Err(Error::dim("classifier input", width, repr.width()));
        }
        let (logits, _) = self.forward(store, &Matrix::row_vector(repr.values.clone()))?;
        predict_from_logits(&logits.data, target)
    }
}

pub fn predict_from_logits(logits: &[f64], target: Option<usize>) -> Result<Prediction> {
    let probs = softmax(logits);
    let loss = match target {
        Some(t) => Some(softmax_cross_entropy(logits, t)?.0),
        None => None,
    };
    Ok(Prediction {
        label: argmax(&probs),
        probs,
        loss,
    })
}
