use std::collections::BTreeMap;

use rand::Rng;

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// What a parameter is; decides initialization and whether weight decay applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Embedding,
    Bias,
    /// LayerNorm / BatchNorm scale and shift.
    Norm,
    /// Non-trainable state such as batch-norm running statistics.
    Buffer,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight | ParamKind::Embedding)
    }

    pub fn trainable(self) -> bool {
        self != ParamKind::Buffer
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Weight => "weight",
            ParamKind::Embedding => "embedding",
            ParamKind::Bias => "bias",
            ParamKind::Norm => "norm",
            ParamKind::Buffer => "buffer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "weight" => ParamKind::Weight,
            "embedding" => ParamKind::Embedding,
            "bias" => ParamKind::Bias,
            "norm" => ParamKind::Norm,
            "buffer" => ParamKind::Buffer,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub value: Matrix,
    pub grad: Matrix,
}

/// Every array of a model, each with a same-shape gradient buffer.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    params: Vec<Param>,
    names: BTreeMap<String, ParamId>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, kind: ParamKind, value: Matrix) -> ParamId {
        assert!(!self.names.contains_key(name), "duplicate parameter {name}");
        let id = ParamId(self.params.len());
        let grad = Matrix::zeros(value.rows, value.cols);
        self.params.push(Param {
            name: name.to_string(),
            kind,
            value,
            grad,
        });
        self.names.insert(name.to_string(), id);
        id
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize, kind: ParamKind) -> ParamId {
        self.add(name, kind, Matrix::zeros(rows, cols))
    }

    pub fn add_filled(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        kind: ParamKind,
        value: f64,
    ) -> ParamId {
        self.add(
            name,
            kind,
            Matrix::from_vec(rows, cols, vec![value; rows * cols]),
        )
    }

    /// Weights get Glorot-uniform init `±sqrt(6/(fan_in+fan_out))`; embedding
    /// tables get `±sqrt(3/width)` so each row has roughly unit norm.
    pub fn add_init(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        kind: ParamKind,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = match kind {
            ParamKind::Embedding => (3.0 / cols as f64).sqrt(),
            _ => (6.0 / (rows + cols) as f64).sqrt(),
        };
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        self.add(name, kind, Matrix::from_vec(rows, cols, data))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].grad
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &Matrix) {
        self.params[id.0].grad.add_assign(grad);
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.data.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.kind.trainable())
            .map(|p| p.value.data.len())
            .sum()
    }
}
