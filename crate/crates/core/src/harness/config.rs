use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Aggregation, Readout};
use crate::nn::{Activation, AdamW};

/// Which representations reach the classification head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PipelineMode {
    #[default]
    Fused,
    TextOnly,
    GraphOnly,
}

impl PipelineMode {
    pub fn uses_text(self) -> bool {
        self != PipelineMode::GraphOnly
    }

    pub fn uses_graph(self) -> bool {
        self != PipelineMode::TextOnly
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::Fused => "fused",
            PipelineMode::TextOnly => "text-only",
            PipelineMode::GraphOnly => "graph-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fused" => Some(PipelineMode::Fused),
            "text-only" => Some(PipelineMode::TextOnly),
            "graph-only" => Some(PipelineMode::GraphOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextSource {
    #[default]
    Builtin,
    External,
}

impl TextSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TextSource::Builtin => "builtin",
            TextSource::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "builtin" => Some(TextSource::Builtin),
            "external" => Some(TextSource::External),
            _ => None,
        }
    }
}

/// Every hyperparameter of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Token sequence length after truncation/padding.
    pub seq_len: usize,
    pub text_width: usize,
    pub token_width: usize,
    pub min_count: usize,
    pub unit_width: usize,
    /// XPath units kept per node.
    pub max_depth: usize,
    pub subscript_table: usize,
    pub graph_width: usize,
    pub gnn_layers: usize,
    pub aggregation: Aggregation,
    pub readout: Readout,
    pub activation: Activation,
    pub dropout: f64,
    /// MLP hidden width; 0 picks `ceil((input + classes) / 2)`.
    pub hidden_width: usize,
    pub norm_eps: f64,
    pub bn_momentum: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub val_ratio: f64,
    pub mode: PipelineMode,
    pub text_source: TextSource,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            seq_len: 512,
            text_width: 128,
            token_width: 128,
            min_count: 1,
            unit_width: 16,
            max_depth: crate::dom::DEFAULT_MAX_DEPTH,
            subscript_table: crate::dom::DEFAULT_SUBSCRIPT_TABLE,
            graph_width: 128,
            gnn_layers: 3,
            aggregation: Aggregation::Mean,
            readout: Readout::Sum,
            activation: Activation::Gelu,
            dropout: 0.1,
            hidden_width: 0,
            norm_eps: 1e-5,
            bn_momentum: 0.1,
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            batch_size: 8,
            epochs: 200,
            seed: 0,
            val_ratio: 0.1,
            mode: PipelineMode::Fused,
            text_source: TextSource::Builtin,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_enum<T>(key: &str, value: &str, f: fn(&str) -> Option<T>) -> Result<T> {
    f(value).ok_or_else(|| Error::Config(format!("{key}: unknown value {value:?}")))
}

impl ModelConfig {
    pub fn optimizer(&self) -> AdamW {
        AdamW {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seq_len" => self.seq_len = parse_num(key, v)?,
            "text_width" => self.text_width = parse_num(key, v)?,
            "token_width" => self.token_width = parse_num(key, v)?,
            "min_count" => self.min_count = parse_num(key, v)?,
            "unit_width" => self.unit_width = parse_num(key, v)?,
            "max_depth" => self.max_depth = parse_num(key, v)?,
            "subscript_table" => self.subscript_table = parse_num(key, v)?,
            "graph_width" => self.graph_width = parse_num(key, v)?,
            "gnn_layers" => self.gnn_layers = parse_num(key, v)?,
            "aggregation" => self.aggregation = parse_enum(key, v, Aggregation::parse)?,
            "readout" => self.readout = parse_enum(key, v, Readout::parse)?,
            "activation" => self.activation = parse_enum(key, v, Activation::parse)?,
            "dropout" => self.dropout = parse_num(key, v)?,
            "hidden_width" => self.hidden_width = parse_num(key, v)?,
            "norm_eps" => self.norm_eps = parse_num(key, v)?,
            "bn_momentum" => self.bn_momentum = parse_num(key, v)?,
            "lr" => self.lr = parse_num(key, v)?,
            "beta1" => self.beta1 = parse_num(key, v)?,
            "beta2" => self.beta2 = parse_num(key, v)?,
            "eps" => self.eps = parse_num(key, v)?,
            "weight_decay" => self.weight_decay = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "val_ratio" => self.val_ratio = parse_num(key, v)?,
            "mode" => self.mode = parse_enum(key, v, PipelineMode::parse)?,
            "text_source" => self.text_source = parse_enum(key, v, TextSource::parse)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parse flat `key=value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("seq_len", self.seq_len),
            ("text_width", self.text_width),
            ("token_width", self.token_width),
            ("min_count", self.min_count),
            ("unit_width", self.unit_width),
            ("max_depth", self.max_depth),
            ("subscript_table", self.subscript_table),
            ("graph_width", self.graph_width),
            ("gnn_layers", self.gnn_layers),
            ("batch_size", self.batch_size),
        ];
        if let Some((k, _)) = widths.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.val_ratio) {
            return Err(Error::Config("val_ratio must lie in [0, 1)".into()));
        }
        for (k, v) in [
            ("lr", self.lr),
            ("eps", self.eps),
            ("norm_eps", self.norm_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        for (k, v) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("bn_momentum", self.bn_momentum),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{k} must lie in [0, 1)")));
            }
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        Ok(())
    }

    /// Render as `key=value` lines; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("seq_len", self.seq_len.to_string());
        put("text_width", self.text_width.to_string());
        put("token_width", self.token_width.to_string());
        put("min_count", self.min_count.to_string());
        put("unit_width", self.unit_width.to_string());
        put("max_depth", self.max_depth.to_string());
        put("subscript_table", self.subscript_table.to_string());
        put("graph_width", self.graph_width.to_string());
        put("gnn_layers", self.gnn_layers.to_string());
        put("aggregation", self.aggregation.as_str().into());
        put("readout", self.readout.as_str().into());
        put("activation", self.activation.as_str().into());
        put("dropout", format!("{:?}", self.dropout));
        put("hidden_width", self.hidden_width.to_string());
        put("norm_eps", format!("{:?}", self.norm_eps));
        put("bn_momentum", format!("{:?}", self.bn_momentum));
        put("lr", format!("{:?}", self.lr));
        put("beta1", format!("{:?}", self.beta1));
        put("beta2", format!("{:?}", self.beta2));
        put("eps", format!("{:?}", self.eps));
        put("weight_decay", format!("{:?}", self.weight_decay));
        put("batch_size", self.batch_size.to_string());
        put("epochs", self.epochs.to_string());
        put("seed", self.seed.to_string());
        put("val_ratio", format!("{:?}", self.val_ratio));
        put("mode", self.mode.as_str().into());
        put("text_source", self.text_source.as_str().into());
        s
    }
}
