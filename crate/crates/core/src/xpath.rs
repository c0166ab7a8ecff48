//! Node features from XPath units: each `(tag, subscript)` step is embedded as
//! the sum of a tag embedding and a subscript embedding, the steps are
//! concatenated to a fixed depth, then LayerNorm, activation and dropout.

use std::collections::HashMap;

use rand::Rng;

use crate::dom::{PageRecord, XPathUnits};
use crate::error::{Error, Result};
use crate::nn::{
    dropout_backward, dropout_forward, layer_norm_backward, layer_norm_forward, Activation,
    LayerNormCache, Matrix, Mode, ParamId, ParamKind, ParameterStore,
};
use crate::text::frequency_order;

pub const PAD_TAG: usize = 0;
pub const UNK_TAG: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocabulary {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagVocabulary {
    pub fn from_tags(tags: Vec<String>) -> Self {
        let mut all = vec!["<pad>".to_string(), "<unk>".to_string()];
        all.extend(tags);
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tags: all, index }
    }

    /// Count each node's own tag across the corpus.
    pub fn build<'a>(records: impl IntoIterator<Item = &'a PageRecord>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for r in records {
            for node in &r.nodes {
                if let Some(u) = node.units.last() {
                    *counts.entry(u.tag.as_str()).or_default() += 1;
                }
            }
        }
        Self::from_tags(frequency_order(counts, 1))
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, tag: &str) -> usize {
        self.index.get(tag).copied().unwrap_or(UNK_TAG)
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

pub fn build_tag_vocab(records: &[PageRecord]) -> TagVocabulary {
    TagVocabulary::build(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XPathEmbedConfig {
    pub max_depth: usize,
    pub unit_width: usize,
    pub tag_vocab_size: usize,
    pub subscript_table: usize,
    pub dropout: f64,
    pub activation: Activation,
    pub norm_eps: f64,
}

impl XPathEmbedConfig {
    pub fn feature_width(&self) -> usize {
        self.max_depth * self.unit_width
    }
}

/// `(tag id, subscript)` per unit, root to node.
pub type EncodedUnits = Vec<(usize, usize)>;

/// Map tags to ids, keep the last `max_depth` units and clamp subscripts.
pub fn encode_units(
    units: &XPathUnits,
    vocab: &TagVocabulary,
    max_depth: usize,
    subscript_table: usize,
) -> EncodedUnits {
    let skip = units.len().saturating_sub(max_depth);
    units.units[skip..]
        .iter()
        .map(|u| (vocab.id(&u.tag), u.subscript.min(subscript_table - 1)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct XPathEmbedding {
    pub config: XPathEmbedConfig,
    pub tag_table: ParamId,
    pub subscript_table: ParamId,
    pub norm_gamma: ParamId,
    pub norm_beta: ParamId,
}

#[derive(Debug, Clone)]
pub struct XPathCache {
    units: Vec<EncodedUnits>,
    norm: LayerNormCache,
    normed: Matrix,
    mask: Option<Vec<f64>>,
}

impl XPathEmbedding {
    pub fn new(store: &mut ParameterStore, rng: &mut impl Rng, config: XPathEmbedConfig) -> Self {
        let d = config.unit_width;
        let width = config.feature_width();
        Self {
            config,
            tag_table: store.add_init(
                "xpath.tag_table",
                config.tag_vocab_size,
                d,
                ParamKind::Embedding,
                rng,
            ),
            subscript_table: store.add_init(
                "xpath.subscript_table",
                config.subscript_table,
                d,
                ParamKind::Embedding,
                rng,
            ),
            norm_gamma: store.add_filled("xpath.norm.gamma", 1, width, ParamKind::Norm, 1.0),
            norm_beta: store.add_zeros("xpath.norm.beta", 1, width, ParamKind::Norm),
        }
    }

    fn concat_units(&self, store: &ParameterStore, nodes: &[EncodedUnits]) -> Result<Matrix> {
        let cfg = &self.config;
        let d = cfg.unit_width;
        let tags = store.value(self.tag_table);
        let subs = store.value(self.subscript_table);
        let mut h0 = Matrix::zeros(nodes.len(), cfg.feature_width());
        for (r, units) in nodes.iter().enumerate() {
            if units.len() > cfg.max_depth {
                return Err(Error::UnitOverflow {
                    len: units.len(),
                    max: cfg.max_depth,
                });
            }
            let row = h0.row_mut(r);
            for k in 0..cfg.max_depth {
                let (t, s) = units.get(k).copied().unwrap_or((PAD_TAG, 0));
                if t >= tags.rows {
                    return Err(Error::IdOutOfRange {
                        id: t,
                        len: tags.rows,
                    });
                }
                if s >= subs.rows {
                    return Err(Error::IdOutOfRange {
                        id: s,
                        len: subs.rows,
                    });
                }
                let slot = &mut row[k * d..(k + 1) * d];
                for ((o, a), b) in slot.iter_mut().zip(tags.row(t)).zip(subs.row(s)) {
                    *o = a + b;
                }
            }
        }
        Ok(h0)
    }

    /// Node feature matrix, one row of width `max_depth * unit_width` per node.
    pub fn forward(
        &self,
        store: &ParameterStore,
        nodes: &[EncodedUnits],
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<(Matrix, XPathCache)> {
        let h0 = self.concat_units(store, nodes)?;
        let (normed, norm) = layer_norm_forward(
            &h0,
            store.value(self.norm_gamma),
            store.value(self.norm_beta),
            self.config.norm_eps,
        )?;
        let activated = self.config.activation.forward(&normed);
        let (h, mask) = dropout_forward(&activated, self.config.dropout, mode, rng);
        Ok((
            h,
            XPathCache {
                units: nodes.to_vec(),
                norm,
                normed,
                mask,
            },
        ))
    }

    pub fn embed_xpath(
        &self,
        store: &ParameterStore,
        units: &EncodedUnits,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<Vec<f64>> {
        Ok(self
            .forward(store, std::slice::from_ref(units), mode, rng)?
            .0
            .data)
    }

    pub fn backward(&self, store: &mut ParameterStore, cache: &XPathCache, d_out: &Matrix) {
        let d_act = dropout_backward(cache.mask.as_deref(), d_out);
        let d_normed = self.config.activation.backward(&cache.normed, &d_act);
        let grads = layer_norm_backward(&cache.norm, store.value(self.norm_gamma), &d_normed);
        store.accumulate(self.norm_gamma, &grads.d_gamma);
        store.accumulate(self.norm_beta, &grads.d_beta);
        let d = self.config.unit_width;
        for (r, units) in cache.units.iter().enumerate() {
            let d_row = grads.d_input.row(r);
            for k in 0..self.config.max_depth {
                let (t, s) = units.get(k).copied().unwrap_or((PAD_TAG, 0));
                let slice = &d_row[k * d..(k + 1) * d];
                for (g, v) in store
                    .grad_mut(self.tag_table)
                    .row_mut(t)
                    .iter_mut()
                    .zip(slice)
                {
                    *g += v;
                }
                for (g, v) in store
                    .grad_mut(self.subscript_table)
                    .row_mut(s)
                    .iter_mut()
                    .zip(slice)
                {
                    *g += v;
                }
            }
        }
    }
}
