//! Region-pooled channel-attention classifiers over pretrained CNN backbones:
//! data pipeline, head math, SGD training, metrics and Grad-CAM.

pub mod ablation;
pub mod backbone;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcam;
pub mod head;
pub mod imaging;
pub mod metrics;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
