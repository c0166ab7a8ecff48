//! The assembled page classifier: text encoder, XPath node embedding, graph
//! encoder with readout and pooler, L2-normalized fusion and the MLP head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dom::PageRecord;
use crate::error::{Error, Result};
use crate::fusion::{
    default_hidden_width, l2_normalize_rows, l2_normalize_rows_backward, predict_from_logits,
    Classifier, ClassifierCache, L2Cache, Prediction,
};
use crate::graph::{
    readout, readout_backward, GnnConfig, GnnLayerCache, GraphBatch, GraphEncoder, GraphTopology,
    Pooler, PoolerCache, ReadoutCache,
};
use crate::harness::config::{ModelConfig, PipelineMode, TextSource};
use crate::nn::{softmax_cross_entropy, Matrix, Mode, ParameterStore};
use crate::text::{
    encode_eta, ExternalEmbeddings, TextCache, TextEncoder, TokenSequence, Vocabulary,
};
use crate::xpath::{
    encode_units, EncodedUnits, TagVocabulary, XPathCache, XPathEmbedConfig, XPathEmbedding,
};

/// A record mapped onto model ids, ready for batching.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPage {
    pub id: String,
    pub label: Option<usize>,
    pub tokens: TokenSequence,
    pub nodes: Vec<EncodedUnits>,
    pub edges: Vec<(usize, usize)>,
    /// Precomputed text vector when the text source is external.
    pub text_vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub labels: Vec<String>,
    pub vocab: Vocabulary,
    pub tags: TagVocabulary,
    pub store: ParameterStore,
    pub text: Option<TextEncoder>,
    pub xpath: Option<XPathEmbedding>,
    pub graph: Option<GraphEncoder>,
    pub pooler: Option<Pooler>,
    pub classifier: Classifier,
}

#[derive(Debug, Clone)]
enum TextPath {
    Builtin(TextCache),
    External,
}

#[derive(Debug, Clone)]
struct GraphPath {
    topology: GraphTopology,
    xpath: XPathCache,
    layers: Vec<GnnLayerCache>,
    readout: ReadoutCache,
    pooler: PoolerCache,
    norm: L2Cache,
}

/// Output of a batched forward pass plus what backward needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Matrix,
    /// Pooler batch statistics (train mode only).
    pub batch_stats: Option<(Vec<f64>, Vec<f64>)>,
    text: Option<(TextPath, L2Cache)>,
    graph: Option<GraphPath>,
    classifier: ClassifierCache,
}

impl Model {
    /// Build a freshly initialized model. Parameters are drawn from `rng` in a
    /// fixed order so a seed fully determines the initialization.
    pub fn new(
        config: ModelConfig,
        labels: Vec<String>,
        vocab: Vocabulary,
        tags: TagVocabulary,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        if labels.len() < 2 {
            return Err(Error::Dataset(format!(
                "need at least 2 classes, found {}",
                labels.len()
            )));
        }
        let mut store = ParameterStore::new();
        let mode = config.mode;
        let text = (mode.uses_text() && config.text_source == TextSource::Builtin).then(|| {
            TextEncoder::new(
                &mut store,
                rng,
                vocab.len(),
                config.token_width,
                config.text_width,
            )
        });
        let (xpath, graph, pooler) = if mode.uses_graph() {
            let xcfg = XPathEmbedConfig {
                max_depth: config.max_depth,
                unit_width: config.unit_width,
                tag_vocab_size: tags.len(),
                subscript_table: config.subscript_table,
                dropout: config.dropout,
                activation: config.activation,
                norm_eps: config.norm_eps,
            };
            let xpath = XPathEmbedding::new(&mut store, rng, xcfg);
            let gcfg = GnnConfig {
                layers: config.gnn_layers,
                width: config.graph_width,
                aggregation: config.aggregation,
                readout: config.readout,
                activation: config.activation,
            };
            let graph = GraphEncoder::new(&mut store, rng, xcfg.feature_width(), &gcfg);
            let pooler = Pooler::new(
                &mut store,
                rng,
                config.graph_width,
                config.activation,
                config.norm_eps,
                config.bn_momentum,
            );
            (Some(xpath), Some(graph), Some(pooler))
        } else {
            (None, None, None)
        };
        let input = match mode {
            PipelineMode::Fused => config.text_width + config.graph_width,
            PipelineMode::TextOnly => config.text_width,
            PipelineMode::GraphOnly => config.graph_width,
        };
        let hidden = match config.hidden_width {
            0 => default_hidden_width(input, labels.len()),
            h => h,
        };
        let classifier = Classifier::new(
            &mut store,
            rng,
            input,
            hidden,
            labels.len(),
            config.activation,
        );
        Ok(Self {
            config,
            labels,
            vocab,
            tags,
            store,
            text,
            xpath,
            graph,
            pooler,
            classifier,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Map a record onto vocabulary ids. Unknown tokens and tags fall back
    /// to the UNK ids; an unknown label yields `label: None`.
    pub fn prepare(
        &self,
        record: &PageRecord,
        external: Option<&ExternalEmbeddings>,
    ) -> Result<PreparedPage> {
        let cfg = &self.config;
        let n = record.nodes.len();
        if cfg.mode.uses_graph() {
            if n == 0 {
                return Err(Error::Dataset(format!("page {}: no DOM nodes", record.id)));
            }
            if let Some(&(s, d)) = record.edges.edges.iter().find(|(s, d)| *s >= n || *d >= n) {
                return Err(Error::Dataset(format!(
                    "page {}: edge ({s}, {d}) outside {n} nodes",
                    record.id
                )));
            }
        }
        let text_vector = if cfg.mode.uses_text() && cfg.text_source == TextSource::External {
            let ext = external.ok_or_else(|| {
                Error::Config("model expects external text embeddings but none were given".into())
            })?;
            if ext.dim() != cfg.text_width {
                return Err(Error::dim("external embeddings", cfg.text_width, ext.dim()));
            }
            Some(ext.get(&record.id)?.to_vec())
        } else {
            None
        };
        Ok(PreparedPage {
            id: record.id.clone(),
            label: self.label_id(&record.label),
            tokens: encode_eta(&record.tokens, &self.vocab, cfg.seq_len),
            nodes: record
                .nodes
                .iter()
                .map(|u| encode_units(u, &self.tags, cfg.max_depth, cfg.subscript_table))
                .collect(),
            edges: record.edges.edges.clone(),
            text_vector,
        })
    }

    pub fn forward(
        &self,
        pages: &[&PreparedPage],
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<ForwardPass> {
        self.forward_with_store(&self.store, pages, mode, rng)
    }

    /// Forward pass reading parameters from `store` instead of the model's
    /// own; `store` must have the model's layout (finite-difference checks
    /// perturb a copy).
    pub fn forward_with_store(
        &self,
        store: &ParameterStore,
        pages: &[&PreparedPage],
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<ForwardPass> {
        let cfg = &self.config;
        let text = if cfg.mode.uses_text() {
            let (x_t, path) = match &self.text {
                Some(enc) => {
                    let seqs: Vec<&TokenSequence> = pages.iter().map(|p| &p.tokens).collect();
                    let (x, cache) = enc.forward(store, &seqs)?;
                    (x, TextPath::Builtin(cache))
                }
                None => {
                    let mut x = Matrix::zeros(pages.len(), cfg.text_width);
                    for (r, p) in pages.iter().enumerate() {
                        let v = p
                            .text_vector
                            .as_ref()
                            .ok_or_else(|| Error::MissingPage(p.id.clone()))?;
                        if v.len() != cfg.text_width {
                            return Err(Error::dim("text vector", cfg.text_width, v.len()));
                        }
                        x.row_mut(r).copy_from_slice(v);
                    }
                    (x, TextPath::External)
                }
            };
            let (normed, norm) = l2_normalize_rows(&x_t);
            Some((normed, path, norm))
        } else {
            None
        };

        let graph = match (&self.xpath, &self.graph, &self.pooler) {
            (Some(xpath), Some(encoder), Some(pooler)) => {
                let topology = GraphTopology::disjoint_union(
                    pages.iter().map(|p| (p.nodes.len(), p.edges.as_slice())),
                )?;
                let nodes: Vec<EncodedUnits> =
                    pages.iter().flat_map(|p| p.nodes.iter().cloned()).collect();
                let (features, xcache) = xpath.forward(store, &nodes, mode, rng)?;
                let batch = GraphBatch { features, topology };
                let (h, layers) = encoder.forward(store, &batch)?;
                let (pooled, rcache) = readout(&h, &batch.topology, cfg.readout)?;
                let pout = pooler.forward(store, &pooled, mode)?;
                let (normed, norm) = l2_normalize_rows(&pout.output);
                Some((
                    normed,
                    GraphPath {
                        topology: batch.topology,
                        xpath: xcache,
                        layers,
                        readout: rcache,
                        pooler: pout.cache,
                        norm,
                    },
                    pout.batch_stats,
                ))
            }
            _ => None,
        };

        let fused = match (&text, &graph) {
            (Some((t, _, _)), Some((g, _, _))) => t.hcat(g)?,
            (Some((t, _, _)), None) => t.clone(),
            (None, Some((g, _, _))) => g.clone(),
            (None, None) => unreachable!("every mode uses text or graph"),
        };
        let (logits, classifier) = self.classifier.forward(store, &fused)?;
        let (graph, batch_stats) = match graph {
            Some((_, path, stats)) => (Some(path), stats),
            None => (None, None),
        };
        Ok(ForwardPass {
            logits,
            batch_stats,
            text: text.map(|(_, path, norm)| (path, norm)),
            graph,
            classifier,
        })
    }

    /// Accumulate parameter gradients for `d_logits` into the store.
    pub fn backward(&mut self, pass: &ForwardPass, d_logits: &Matrix) {
        let d_fused = self
            .classifier
            .backward(&mut self.store, &pass.classifier, d_logits);
        let (d_text, d_graph) = match (&pass.text, &pass.graph) {
            (Some(_), Some(_)) => {
                let (t, g) = d_fused.hsplit(self.config.text_width);
                (Some(t), Some(g))
            }
            (Some(_), None) => (Some(d_fused), None),
            (None, _) => (None, Some(d_fused)),
        };
        if let (Some((path, norm)), Some(d)) = (&pass.text, d_text) {
            let d_x = l2_normalize_rows_backward(norm, &d);
            if let (TextPath::Builtin(cache), Some(enc)) = (path, &self.text) {
                enc.backward(&mut self.store, cache, &d_x);
            }
        }
        if let (Some(path), Some(d)) = (&pass.graph, d_graph) {
            let (xpath, encoder, pooler) = (
                self.xpath.as_ref().expect("graph path implies xpath layer"),
                self.graph.as_ref().expect("graph path implies encoder"),
                self.pooler.as_ref().expect("graph path implies pooler"),
            );
            let d_pooled = l2_normalize_rows_backward(&path.norm, &d);
            let d_readout = pooler.backward(&mut self.store, &path.pooler, &d_pooled);
            let d_h = readout_backward(&path.readout, &d_readout);
            let d_features = encoder.backward(&mut self.store, &path.topology, &path.layers, &d_h);
            xpath.backward(&mut self.store, &path.xpath, &d_features);
        }
    }

    /// Mean cross-entropy over the batch and the matching logit gradient.
    pub fn loss(pass: &ForwardPass, pages: &[&PreparedPage]) -> Result<(f64, Matrix)> {
        let n = pages.len() as f64;
        let mut total = 0.0;
        let mut d = Matrix::zeros(pass.logits.rows, pass.logits.cols);
        for (r, page) in pages.iter().enumerate() {
            let target = page
                .label
                .ok_or_else(|| Error::Dataset(format!("page {} has no known label", page.id)))?;
            let (l, g) = softmax_cross_entropy(pass.logits.row(r), target)?;
            total += l;
            for (o, v) in d.row_mut(r).iter_mut().zip(g) {
                *o = v / n;
            }
        }
        Ok((total / n, d))
    }

    /// Zero gradients, run forward and backward; returns the loss and pass.
    pub fn compute_gradients(
        &mut self,
        pages: &[&PreparedPage],
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<(f64, ForwardPass)> {
        self.store.zero_grads();
        let pass = self.forward(pages, mode, rng)?;
        let (loss, d) = Self::loss(&pass, pages)?;
        self.backward(&pass, &d);
        Ok((loss, pass))
    }

    pub fn update_running_stats(&mut self, pass: &ForwardPass) {
        if let (Some(pooler), Some(stats)) = (&self.pooler, &pass.batch_stats) {
            pooler.update_running(&mut self.store, stats);
        }
    }

    /// Eval-mode predictions for a batch.
    pub fn predict_batch(&self, pages: &[&PreparedPage]) -> Result<Vec<Prediction>> {
        // Eval mode never draws from the rng.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pass = self.forward(pages, Mode::Eval, &mut rng)?;
        pages
            .iter()
            .enumerate()
            .map(|(r, p)| predict_from_logits(pass.logits.row(r), p.label))
            .collect()
    }

    pub fn predict(&self, page: &PreparedPage) -> Result<Prediction> {
        Ok(self.predict_batch(&[page])?.remove(0))
    }
}
