//! Model assembly, loss, optimizer, checkpoints and the training loop.

pub mod checkpoint;
pub mod config;
pub mod engine;
pub mod loss;
pub mod model;
pub mod sgd;
pub mod variant;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, HistoryRow, RngState};
pub use config::{LrSchedule, Optimizer, TrainConfig};
pub use engine::{train, TrainRun};
pub use loss::{cross_entropy, cross_entropy_loss};
pub use model::{build_model, Model, ParameterRegistry};
pub use sgd::{sgd_step, Sgd};
pub use variant::{HeadSettings, ModelVariant, VariantKind};
