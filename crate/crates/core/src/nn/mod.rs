//! Degree-0 neural sheaf diffusion on the induced simplicial set.
//!
//! A model projects raw node features to a `d x f` block per node, applies `T` diffusion layers
//! whose normalized Laplacian is rebuilt from a sheaf learned on the current features, and reads
//! class logits off the flattened final blocks. Gradients are computed by hand in
//! [`model::loss_and_grad`] and checked against central differences in tests.

mod data;
mod model;
mod params;
mod train;

use thiserror::Error;

pub use data::{parse_features, parse_labels, Dataset};
pub use model::{
    diffusion_step, forward, layer_laplacian, learn_pair_restrictions, learn_sheaf, loss_and_grad, masked_loss, Forward,
    PairStructure,
};
pub use params::{Activation, LayerParams, ModelConfig, ModelParams, NodeSummary, SheafForm};
pub use train::{
    gradient_check, metrics_csv, split_nodes, train, train_runs, EpochMetrics, RunSummary, Split, TensorCheck,
    TrainOutcome,
};

use crate::laplacian::LaplacianError;
use crate::sheaf::SheafError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape { what: &'static str, expected: String, found: String },
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("class {class} has no training node")]
    DegenerateSplit { class: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Laplacian(#[from] LaplacianError),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
}
