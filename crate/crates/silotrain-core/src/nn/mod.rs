//! From-scratch neural network: architectures, parameters, forward/backward
//! passes, metrics, and the early-stopping training loop. All math is f64.

pub mod arch;
pub mod metrics;
pub mod ops;
pub mod params;
pub mod train;

pub use arch::{Activation, LayerSpec, NetworkArchitecture, Shape};
pub use metrics::{accuracy, bce_loss, Metric};
pub use ops::{backward, forward};
pub use params::{init_random, sgd_step, LayerParams, ModelParameters};
pub use train::{train, EpochRecord, ImprovementSnapshot, TrainingConfig};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NnError {
    #[error("architecture error: {0}")]
    Architecture(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
}
