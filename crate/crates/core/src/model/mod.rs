//! The hybrid quantum-classical classifier and its classical ablation.

mod checkpoint;
mod config;
mod hqnn;
mod params;

pub use checkpoint::{Checkpoint, OptimizerState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use hqnn::{positional_encoding, Bound, ForwardOutput, Hqnn};
pub use params::{count_params, Component, ModelParams, ParamCount, ParamSpec};
