//! Tokenization, vocabulary, the fixed-length truncate/pad operator and the
//! built-in text encoder (masked mean of token embeddings + one affine map).
//! Precomputed page vectors from an external language model can be loaded
//! instead and are consumed by the same fusion path.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{affine_backward, affine_forward, Matrix, ParamId, ParamKind, ParameterStore};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Lowercase and split on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Sort `(item, count)` pairs by descending count, then lexicographically.
pub(crate) fn frequency_order(counts: HashMap<&str, usize>, min_count: usize) -> Vec<String> {
    let mut entries: Vec<_> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().map(|(t, _)| t.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::new())
    }
}

impl Vocabulary {
    /// Build from the non-reserved tokens in id order (ids start at 2).
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens);
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens: all, index }
    }

    pub fn build<'a, I>(corpus: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in corpus {
            for t in doc {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        Self::from_tokens(frequency_order(counts, min_count.max(1)))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Tokens in id order, reserved entries included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

pub fn build_vocab(corpus: &[Vec<String>], min_count: usize) -> Vocabulary {
    Vocabulary::build(corpus.iter().map(Vec::as_slice), min_count)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub mask_len: usize,
}

impl TokenSequence {
    pub fn decode(&self, vocab: &Vocabulary) -> Vec<String> {
        self.ids[..self.mask_len]
            .iter()
            .map(|&id| vocab.token(id).unwrap_or(UNK_TOKEN).to_string())
            .collect()
    }
}

/// Truncate to the first `len` tokens, or pad with `PAD_ID` up to `len`.
pub fn encode_eta(tokens: &[String], vocab: &Vocabulary, len: usize) -> TokenSequence {
    let mask_len = tokens.len().min(len);
    let mut ids = Vec::with_capacity(len);
    ids.extend(tokens[..mask_len].iter().map(|t| vocab.id(t)));
    ids.resize(len, PAD_ID);
    TokenSequence { ids, mask_len }
}

/// Built-in stand-in for a pretrained language model.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    pub embedding: ParamId,
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct TextCache {
    pooled: Matrix,
    seqs: Vec<(Vec<usize>, usize)>,
}

impl TextEncoder {
    pub fn new(
        store: &mut ParameterStore,
        rng: &mut impl rand::Rng,
        vocab_size: usize,
        token_width: usize,
        out_width: usize,
    ) -> Self {
        let embedding = store.add_init(
            "text.embedding",
            vocab_size,
            token_width,
            ParamKind::Embedding,
            rng,
        );
        let weight = store.add_init(
            "text.weight",
            token_width,
            out_width,
            ParamKind::Weight,
            rng,
        );
        let bias = store.add_zeros("text.bias", 1, out_width, ParamKind::Bias);
        Self {
            embedding,
            weight,
            bias,
        }
    }

    pub fn out_width(&self, store: &ParameterStore) -> usize {
        store.value(self.weight).cols
    }

    fn pool(&self, store: &ParameterStore, seqs: &[&TokenSequence]) -> Result<Matrix> {
        let table = store.value(self.embedding);
        let mut pooled = Matrix::zeros(seqs.len(), table.cols);
        for (r, seq) in seqs.iter().enumerate() {
            let active = &seq.ids[..seq.mask_len];
            if active.is_empty() {
                continue;
            }
            let row = pooled.row_mut(r);
            for &id in active {
                if id >= table.rows {
                    return Err(Error::IdOutOfRange {
                        id,
                        len: table.rows,
                    });
                }
                for (o, v) in row.iter_mut().zip(table.row(id)) {
                    *o += v;
                }
            }
            let inv = 1.0 / active.len() as f64;
            row.iter_mut().for_each(|v| *v *= inv);
        }
        Ok(pooled)
    }

    /// Text representations for a batch, one row per sequence.
    pub fn forward(
        &self,
        store: &ParameterStore,
        seqs: &[&TokenSequence],
    ) -> Result<(Matrix, TextCache)> {
        let pooled = self.pool(store, seqs)?;
        let out = affine_forward(&pooled, store.value(self.weight), store.value(self.bias))?;
        let cache = TextCache {
            pooled,
            seqs: seqs.iter().map(|s| (s.ids.clone(), s.mask_len)).collect(),
        };
        Ok((out, cache))
    }

    pub fn encode_text(&self, store: &ParameterStore, seq: &TokenSequence) -> Result<Vec<f64>> {
        Ok(self.forward(store, &[seq])?.0.data)
    }

    pub fn backward(&self, store: &mut ParameterStore, cache: &TextCache, d_out: &Matrix) {
        let grads = affine_backward(&cache.pooled, store.value(self.weight), d_out);
        store.accumulate(self.weight, &grads.d_weight);
        store.accumulate(self.bias, &grads.d_bias);
        let table = store.grad_mut(self.embedding);
        for (r, (ids, mask_len)) in cache.seqs.iter().enumerate() {
            if *mask_len == 0 {
                continue;
            }
            let inv = 1.0 / *mask_len as f64;
            let d_row = grads.d_input.row(r);
            for &id in &ids[..*mask_len] {
                for (g, d) in table.row_mut(id).iter_mut().zip(d_row) {
                    *g += d * inv;
                }
            }
        }
    }
}

/// Page vectors computed elsewhere, keyed by page id.
#[derive(Debug, Clone, Default)]
pub struct ExternalEmbeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl ExternalEmbeddings {
    /// Parse `page_id<TAB>v1,v2,...` lines.
    pub fn parse(content: &str, dim: usize) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (n, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, values) = line.split_once('\t').ok_or_else(|| {
                Error::Dataset(format!("embedding line {}: missing tab separator", n + 1))
            })?;
            let vector = values
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Dataset(format!("embedding line {}: {e}", n + 1)))?;
            if vector.len() != dim {
                return Err(Error::dim(format!("embedding for {id}"), dim, vector.len()));
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!(
                    "embedding line {}: non-finite component",
                    n + 1
                )));
            }
            vectors.insert(id.to_string(), vector);
        }
        Ok(Self { dim, vectors })
    }

    pub fn load(path: impl AsRef<Path>, dim: usize) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, page_id: &str) -> Result<&[f64]> {
        self.vectors
            .get(page_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingPage(page_id.to_string()))
    }
}
