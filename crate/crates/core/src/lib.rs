//! Web page classification from page text and DOM structure.
//!
//! A page is cleaned and parsed into a DOM tree. Its visible text feeds a
//! text encoder, and every element's XPath feeds a graph neural network over
//! the tree. The two page vectors are L2-normalized, concatenated and
//! classified by a two-layer MLP. Everything, including gradients, is
//! implemented here in double precision.

pub mod corpus;
pub mod dom;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod harness;
pub mod model;
pub mod nn;
pub mod text;
pub mod xpath;

pub use dom::{
    build_edge_list, clean_html, extract_text, page_to_record, parse_dom, xpath_units, DomNode,
    DomTree, EdgeList, PageRecord, XPathLimits, XPathUnit, XPathUnits,
};
pub use error::{Error, Result};
pub use fusion::{argmax, fuse, l2_normalize, Classifier, PageRepr, Prediction};
pub use graph::{
    encode_graph, readout, Aggregation, GnnConfig, GraphBatch, GraphEncoder, GraphTopology, Pooler,
    Readout,
};
pub use harness::checkpoint::{load_model, save_model};
pub use harness::config::{ModelConfig, PipelineMode, TextSource};
pub use harness::dataset::Dataset;
pub use harness::metrics::{compute_metrics, confusion_matrix, MetricsReport};
pub use harness::split::{split_dataset, Split, SplitRatios};
pub use harness::train::{evaluate, predict_html, train, EpochRecord, History};
pub use model::{Model, PreparedPage};
pub use text::{
    build_vocab, encode_eta, tokenize, ExternalEmbeddings, TextEncoder, TokenSequence, Vocabulary,
};
pub use xpath::{build_tag_vocab, encode_units, TagVocabulary, XPathEmbedding};
