//! Fixed random-projection backbones used by tests and the synthetic
//! fixtures. They satisfy the same contract as the pretrained backbones at a
//! tiny fraction of the cost.

use candle_core::{Module, ModuleT, Result, Tensor};
use candle_nn::{Linear, VarBuilder};

use super::layers::{Conv, ConvSpec};

/// Spatial stride of the single convolution: 224 input gives a 7×7 map.
pub const TINY_CONV_KERNEL: usize = 32;
/// Input is average-pooled by this factor before the dense projection.
pub const PROJECTION_POOL: usize = 8;

/// One non-overlapping convolution followed by ReLU.
pub struct TinyConv {
    conv: Conv,
}

impl TinyConv {
    pub fn new(channels: usize, vb: VarBuilder) -> Result<Self> {
        let spec = ConvSpec::square(TINY_CONV_KERNEL, TINY_CONV_KERNEL, 0).with_bias();
        Ok(Self {
            conv: Conv::new(3, channels, spec, vb.pp("conv"))?,
        })
    }
}

impl ModuleT for TinyConv {
    fn forward_t(&self, xs: &Tensor, _train: bool) -> Result<Tensor> {
        self.conv.forward(xs)?.relu()
    }
}

/// Pool, flatten, dense projection and ReLU; emits a 1×1 map, so there is no
/// spatial feature map to explain.
pub struct RandomProjection {
    proj: Linear,
    channels: usize,
}

impl RandomProjection {
    pub fn new(input_side: usize, channels: usize, vb: VarBuilder) -> Result<Self> {
        let side = input_side / PROJECTION_POOL;
        let proj = candle_nn::linear(3 * side * side, channels, vb.pp("proj"))?;
        Ok(Self { proj, channels })
    }
}

impl ModuleT for RandomProjection {
    fn forward_t(&self, xs: &Tensor, _train: bool) -> Result<Tensor> {
        let b = xs.dim(0)?;
        let pooled = xs.avg_pool2d(PROJECTION_POOL)?.flatten_from(1)?;
        self.proj.forward(&pooled)?.relu()?.reshape((b, self.channels, 1, 1))
    }
}
