//! Layers, analytic gradients, and evaluation.

pub mod backward;
pub mod eval;
pub mod forward;
pub mod model;
pub mod params;

pub use backward::{loss_and_backward, softmax_cross_entropy};
pub use eval::evaluate;
pub use forward::{forward, ForwardCache, LayerCache};
pub use model::{ActShape, LayerSpec, ModelSpec};
pub use params::ParamSet;
