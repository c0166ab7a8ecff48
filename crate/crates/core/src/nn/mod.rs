//! Small differentiable-layer toolkit. Every layer exposes an explicit
//! forward that returns a cache and a backward that consumes it; there is no
//! tape. All arithmetic is `f64`.

mod gradcheck;
mod layers;
mod matrix;
mod optim;
mod params;

pub use gradcheck::{
    grad_check, grad_check_report, relative_error, GradCheckReport, REL_ERR_FLOOR,
};
pub use layers::{
    affine_backward, affine_forward, batch_norm_backward, batch_norm_forward, dropout_backward,
    dropout_forward, layer_norm_backward, layer_norm_forward, softmax, softmax_cross_entropy,
    Activation, AffineGrads, BatchNormCache, BatchNormOutput, LayerNormCache, Mode, NormGrads,
};
pub use matrix::Matrix;
pub use optim::{AdamState, AdamW};
pub use params::{Param, ParamId, ParamKind, ParameterStore};
