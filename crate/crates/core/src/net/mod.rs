//! Network configs, construction, cost accounting and checkpoints.

mod checkpoint;
mod config;
mod cost;
mod network;

pub use checkpoint::{MAGIC as CHECKPOINT_MAGIC, VERSION as CHECKPOINT_VERSION};
pub use config::{Extent, LayerKind, LayerSpec, NetworkConfig, PlannedLayer, BUILTIN_CONFIGS};
pub use cost::{
    conv_multiadds, conv_params, cost_report, count_multiadds, count_params, reduction_ratio,
    reduction_ratio_exact, separable_cost, standard_cost, CostReport, CostRow, SeparablePair,
};
pub use network::{Forward, Gradients, Network, TrainPass};
