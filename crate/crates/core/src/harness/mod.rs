//! Dataset interchange, splitting, training, evaluation, metrics and model
//! persistence.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod split;
pub mod train;
