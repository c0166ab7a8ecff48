//! Message passing over DOM graphs, graph-level readout and the pooler.
//!
//! Each layer aggregates a node's own representation together with its
//! neighbours' (`N(v) ∪ {v}`) and applies `σ(W·m + b)`. Several pages are
//! processed at once as a disjoint union with a node → graph segment map.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    affine_backward, affine_forward, batch_norm_backward, batch_norm_forward, Activation,
    BatchNormCache, Matrix, Mode, ParamId, ParamKind, ParameterStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    #[default]
    Sum,
    Max,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Aggregation::Mean),
            "sum" => Some(Aggregation::Sum),
            _ => None,
        }
    }
}

impl Readout {
    pub fn as_str(self) -> &'static str {
        match self {
            Readout::Sum => "sum",
            Readout::Max => "max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sum" => Some(Readout::Sum),
            "max" => Some(Readout::Max),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnnConfig {
    pub layers: usize,
    pub width: usize,
    pub aggregation: Aggregation,
    pub readout: Readout,
    pub activation: Activation,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            width: 128,
            aggregation: Aggregation::Mean,
            readout: Readout::Sum,
            activation: Activation::Gelu,
        }
    }
}

/// Structure of a (possibly batched) graph: edges, incoming-neighbour lists
/// and the graph id of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    pub edges: Vec<(usize, usize)>,
    pub segments: Vec<usize>,
    pub num_graphs: usize,
    incoming: Vec<Vec<usize>>,
}

impl GraphTopology {
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        segments: Vec<usize>,
        num_graphs: usize,
    ) -> Result<Self> {
        if segments.len() != num_nodes {
            return Err(Error::dim("segment map", num_nodes, segments.len()));
        }
        if let Some(&g) = segments.iter().find(|&&g| g >= num_graphs) {
            return Err(Error::Dataset(format!(
                "segment id {g} out of range for {num_graphs} graphs"
            )));
        }
        let mut incoming = vec![Vec::new(); num_nodes];
        for &(src, dst) in &edges {
            if src >= num_nodes || dst >= num_nodes {
                return Err(Error::IndexOutOfRange {
                    index: src.max(dst),
                    len: num_nodes,
                });
            }
            if segments[src] != segments[dst] {
                return Err(Error::Dataset(format!(
                    "edge ({src}, {dst}) crosses graphs"
                )));
            }
            incoming[dst].push(src);
        }
        Ok(Self {
            edges,
            segments,
            num_graphs,
            incoming,
        })
    }

    /// A single graph.
    pub fn single(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(num_nodes, edges.to_vec(), vec![0; num_nodes], 1)
    }

    /// Disjoint union of `(node count, edges)` graphs, offsetting node indices.
    pub fn disjoint_union<'a>(
        graphs: impl IntoIterator<Item = (usize, &'a [(usize, usize)])>,
    ) -> Result<Self> {
        let mut edges = Vec::new();
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut count = 0;
        for (g, (n, es)) in graphs.into_iter().enumerate() {
            for &(s, d) in es {
                if s >= n || d >= n {
                    return Err(Error::IndexOutOfRange {
                        index: s.max(d),
                        len: n,
                    });
                }
                edges.push((s + offset, d + offset));
            }
            segments.extend(std::iter::repeat_n(g, n));
            offset += n;
            count = g + 1;
        }
        Self::new(offset, edges, segments, count)
    }

    pub fn num_nodes(&self) -> usize {
        self.segments.len()
    }

    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }
}

#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub features: Matrix,
    pub topology: GraphTopology,
}

fn aggregate(topo: &GraphTopology, h: &Matrix, agg: Aggregation) -> Matrix {
    let mut m = Matrix::zeros(h.rows, h.cols);
    for v in 0..h.rows {
        let nbrs = topo.incoming(v);
        let row = m.row_mut(v);
        row.copy_from_slice(h.row(v));
        for &u in nbrs {
            for (o, x) in row.iter_mut().zip(h.row(u)) {
                *o += x;
            }
        }
        if agg == Aggregation::Mean {
            let inv = 1.0 / (nbrs.len() + 1) as f64;
            row.iter_mut().for_each(|o| *o *= inv);
        }
    }
    m
}

fn aggregate_backward(topo: &GraphTopology, d_m: &Matrix, agg: Aggregation) -> Matrix {
    let mut d_h = Matrix::zeros(d_m.rows, d_m.cols);
    for v in 0..d_m.rows {
        let nbrs = topo.incoming(v);
        let scale = match agg {
            Aggregation::Mean => 1.0 / (nbrs.len() + 1) as f64,
            Aggregation::Sum => 1.0,
        };
        for &u in nbrs.iter().chain(std::iter::once(&v)) {
            let (src, dst) = (v, u);
            for c in 0..d_m.cols {
                let g = d_m.get(src, c) * scale;
                d_h.data[dst * d_m.cols + c] += g;
            }
        }
    }
    d_h
}

#[derive(Debug, Clone)]
pub struct GnnLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub aggregation: Aggregation,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct GnnLayerCache {
    aggregated: Matrix,
    pre_activation: Matrix,
}

impl GnnLayer {
    pub fn new(
        store: &mut ParameterStore,
        rng: &mut impl Rng,
        name: &str,
        in_width: usize,
        out_width: usize,
        aggregation: Aggregation,
        activation: Activation,
    ) -> Self {
        Self {
            weight: store.add_init(
                &format!("{name}.weight"),
                in_width,
                out_width,
                ParamKind::Weight,
                rng,
            ),
            bias: store.add_zeros(&format!("{name}.bias"), 1, out_width, ParamKind::Bias),
            aggregation,
            activation,
        }
    }

    pub fn forward(
        &self,
        store: &ParameterStore,
        topo: &GraphTopology,
        h: &Matrix,
    ) -> Result<(Matrix, GnnLayerCache)> {
        if h.rows != topo.num_nodes() {
            return Err(Error::ShapeMismatch {
                op: "gnn_layer nodes",
                lhs: h.shape(),
                rhs: (topo.num_nodes(), h.cols),
            });
        }
        let aggregated = aggregate(topo, h, self.aggregation);
        let pre_activation = affine_forward(
            &aggregated,
            store.value(self.weight),
            store.value(self.bias),
        )?;
        let out = self.activation.forward(&pre_activation);
        Ok((
            out,
            GnnLayerCache {
                aggregated,
                pre_activation,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &mut ParameterStore,
        topo: &GraphTopology,
        cache: &GnnLayerCache,
        d_out: &Matrix,
    ) -> Matrix {
        let d_pre = self.activation.backward(&cache.pre_activation, d_out);
        let g = affine_backward(&cache.aggregated, store.value(self.weight), &d_pre);
        store.accumulate(self.weight, &g.d_weight);
        store.accumulate(self.bias, &g.d_bias);
        aggregate_backward(topo, &g.d_input, self.aggregation)
    }
}

/// Stack of message-passing layers: first maps the node feature width to the
/// hidden width, the rest keep it.
#[derive(Debug, Clone)]
pub struct GraphEncoder {
    pub layers: Vec<GnnLayer>,
}

impl GraphEncoder {
    pub fn new(
        store: &mut ParameterStore,
        rng: &mut impl Rng,
        in_width: usize,
        config: &GnnConfig,
    ) -> Self {
        let layers = (0..config.layers)
            .map(|l| {
                let input = if l == 0 { in_width } else { config.width };
                GnnLayer::new(
                    store,
                    rng,
                    &format!("gnn.layer{l}"),
                    input,
                    config.width,
                    config.aggregation,
                    config.activation,
                )
            })
            .collect();
        Self { layers }
    }

    pub fn forward(
        &self,
        store: &ParameterStore,
        batch: &GraphBatch,
    ) -> Result<(Matrix, Vec<GnnLayerCache>)> {
        let mut h = batch.features.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward(store, &batch.topology, &h)?;
            caches.push(cache);
            h = next;
        }
        Ok((h, caches))
    }

    /// Returns the gradient with respect to the input node features.
    pub fn backward(
        &self,
        store: &mut ParameterStore,
        topo: &GraphTopology,
        caches: &[GnnLayerCache],
        d_out: &Matrix,
    ) -> Matrix {
        let mut d = d_out.clone();
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            d = layer.backward(store, topo, cache, &d);
        }
        d
    }
}

pub fn encode_graph(
    encoder: &GraphEncoder,
    store: &ParameterStore,
    batch: &GraphBatch,
) -> Result<Matrix> {
    Ok(encoder.forward(store, batch)?.0)
}

#[derive(Debug, Clone)]
pub struct ReadoutCache {
    readout: Readout,
    segments: Vec<usize>,
    /// For max readout: winning node per (graph, feature).
    argmax: Vec<usize>,
}

/// Per-graph component-wise sum or max over member nodes.
pub fn readout(h: &Matrix, topo: &GraphTopology, kind: Readout) -> Result<(Matrix, ReadoutCache)> {
    let g = topo.num_graphs;
    let mut counts = vec![0usize; g];
    for &s in &topo.segments {
        counts[s] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyGraph { graph: empty });
    }
    let mut out = Matrix::zeros(g, h.cols);
    let mut argmax = Vec::new();
    match kind {
        Readout::Sum => {
            for (v, &s) in topo.segments.iter().enumerate() {
                for (o, x) in out.row_mut(s).iter_mut().zip(h.row(v)) {
                    *o += x;
                }
            }
        }
        Readout::Max => {
            out.data.iter_mut().for_each(|o| *o = f64::NEG_INFINITY);
            argmax = vec![usize::MAX; g * h.cols];
            for (v, &s) in topo.segments.iter().enumerate() {
                for c in 0..h.cols {
                    let x = h.get(v, c);
                    if x > out.get(s, c) || argmax[s * h.cols + c] == usize::MAX {
                        out.set(s, c, x);
                        argmax[s * h.cols + c] = v;
                    }
                }
            }
        }
    }
    Ok((
        out,
        ReadoutCache {
            readout: kind,
            segments: topo.segments.clone(),
            argmax,
        },
    ))
}

pub fn readout_backward(cache: &ReadoutCache, d_out: &Matrix) -> Matrix {
    let cols = d_out.cols;
    let mut d_h = Matrix::zeros(cache.segments.len(), cols);
    match cache.readout {
        Readout::Sum => {
            for (v, &s) in cache.segments.iter().enumerate() {
                d_h.row_mut(v).copy_from_slice(d_out.row(s));
            }
        }
        Readout::Max => {
            for s in 0..d_out.rows {
                for c in 0..cols {
                    let v = cache.argmax[s * cols + c];
                    d_h.data[v * cols + c] += d_out.get(s, c);
                }
            }
        }
    }
    d_h
}

/// `σ(BatchNorm(F(x)))` with `F` a square affine map.
#[derive(Debug, Clone)]
pub struct Pooler {
    pub weight: ParamId,
    pub bias: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub activation: Activation,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct PoolerCache {
    input: Matrix,
    norm: BatchNormCache,
    normed: Matrix,
}

#[derive(Debug, Clone)]
pub struct PoolerOutput {
    pub output: Matrix,
    pub cache: PoolerCache,
    pub batch_stats: Option<(Vec<f64>, Vec<f64>)>,
}

impl Pooler {
    pub fn new(
        store: &mut ParameterStore,
        rng: &mut impl Rng,
        width: usize,
        activation: Activation,
        eps: f64,
        momentum: f64,
    ) -> Self {
        Self {
            weight: store.add_init("pooler.weight", width, width, ParamKind::Weight, rng),
            bias: store.add_zeros("pooler.bias", 1, width, ParamKind::Bias),
            gamma: store.add_filled("pooler.norm.gamma", 1, width, ParamKind::Norm, 1.0),
            beta: store.add_zeros("pooler.norm.beta", 1, width, ParamKind::Norm),
            running_mean: store.add_zeros("pooler.norm.running_mean", 1, width, ParamKind::Buffer),
            running_var: store.add_filled(
                "pooler.norm.running_var",
                1,
                width,
                ParamKind::Buffer,
                1.0,
            ),
            activation,
            eps,
            momentum,
        }
    }

    pub fn forward(&self, store: &ParameterStore, x: &Matrix, mode: Mode) -> Result<PoolerOutput> {
        let z = affine_forward(x, store.value(self.weight), store.value(self.bias))?;
        let bn = batch_norm_forward(
            &z,
            store.value(self.gamma),
            store.value(self.beta),
            store.value(self.running_mean),
            store.value(self.running_var),
            self.eps,
            mode,
        )?;
        Ok(PoolerOutput {
            output: self.activation.forward(&bn.output),
            cache: PoolerCache {
                input: x.clone(),
                norm: bn.cache,
                normed: bn.output,
            },
            batch_stats: bn.batch_stats,
        })
    }

    pub fn backward(
        &self,
        store: &mut ParameterStore,
        cache: &PoolerCache,
        d_out: &Matrix,
    ) -> Matrix {
        let d_normed = self.activation.backward(&cache.normed, d_out);
        let bn = batch_norm_backward(&cache.norm, store.value(self.gamma), &d_normed);
        store.accumulate(self.gamma, &bn.d_gamma);
        store.accumulate(self.beta, &bn.d_beta);
        let g = affine_backward(&cache.input, store.value(self.weight), &bn.d_input);
        store.accumulate(self.weight, &g.d_weight);
        store.accumulate(self.bias, &g.d_bias);
        g.d_input
    }

    /// Exponential moving average of the batch statistics.
    pub fn update_running(&self, store: &mut ParameterStore, stats: &(Vec<f64>, Vec<f64>)) {
        let m = self.momentum;
        for (r, b) in store
            .value_mut(self.running_mean)
            .data
            .iter_mut()
            .zip(&stats.0)
        {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in store
            .value_mut(self.running_var)
            .data
            .iter_mut()
            .zip(&stats.1)
        {
            *r = (1.0 - m) * *r + m * b;
        }
    }
}
