//! A minimal GCN: `X⁽ˡ⁺¹⁾ = ReLU(Â X⁽ˡ⁾ W⁽ˡ⁾)` followed by a linear head, with
//! hand-written reverse-mode gradients, losses, Adam and evaluation metrics.

mod adam;
mod loss;
mod metrics;
mod model;
mod operator;
mod params;

pub use adam::{adam_step, AdamState};
pub use loss::{cross_entropy, mae, LossKind, Target};
pub use metrics::{accuracy, column_std, normalized_mae};
pub use model::{
    graph_model_gc_forward, graph_model_gs_forward, graph_objective, inference_peak_bytes,
    node_model_forward, node_model_forward_tallied, node_objective, pooled_forward, pooled_forward_tallied, GraphInput,
    GraphSample, NodeBatch,
};
pub use operator::{make_operator, DegreeMode, PropagationOperator};
pub use params::{GcnParams, Grads};
