//! Dataset ingestion, stratified splitting, augmentation and batching.

pub mod augment;
pub mod loader;
pub mod manifest;
pub mod split;
pub mod synthetic;
pub mod table;

pub use augment::{augment, eval_transform, AugmentConfig, Regime, ResizePolicy};
pub use loader::{batch_iterator, one_hot, Batch, BatchIterator, Transform};
pub use manifest::{build_manifest, DatasetManifest, Record, Split};
pub use split::{stratified_split, SplitMode, SplitPolicy, ValCounts};
