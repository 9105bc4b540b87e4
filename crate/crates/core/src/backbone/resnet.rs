//! ResNet-50 feature extractor (torchvision layout, stride on the 3×3 conv).

use candle_core::{ModuleT, Result, Tensor};
use candle_nn::VarBuilder;

use super::layers::{max_pool, Act, ConvBn, ConvSpec};

const BN_EPS: f64 = 1e-5;

struct Bottleneck {
    conv1: ConvBn,
    conv2: ConvBn,
    conv3: ConvBn,
    downsample: Option<ConvBn>,
}

impl Bottleneck {
    fn new(c_in: usize, width: usize, stride: usize, vb: VarBuilder) -> Result<Self> {
        let c_out = width * 4;
        let cb = |c_in, c_out, spec, act, i: usize| {
            ConvBn::new(c_in, c_out, spec, act, BN_EPS, vb.pp(format!("conv{i}")), vb.pp(format!("bn{i}")))
        };
        let downsample = if stride != 1 || c_in != c_out {
            Some(ConvBn::new(
                c_in,
                c_out,
                ConvSpec::square(1, stride, 0),
                Act::Identity,
                BN_EPS,
                vb.pp("downsample.0"),
                vb.pp("downsample.1"),
            )?)
        } else {
            None
        };
        Ok(Self {
            conv1: cb(c_in, width, ConvSpec::square(1, 1, 0), Act::Relu, 1)?,
            conv2: cb(width, width, ConvSpec::square(3, stride, 1), Act::Relu, 2)?,
            conv3: cb(width, c_out, ConvSpec::square(1, 1, 0), Act::Identity, 3)?,
            downsample,
        })
    }
}

impl ModuleT for Bottleneck {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let ys = self.conv1.forward_t(xs, train)?;
        let ys = self.conv2.forward_t(&ys, train)?;
        let ys = self.conv3.forward_t(&ys, train)?;
        let shortcut = match &self.downsample {
            Some(ds) => ds.forward_t(xs, train)?,
            None => xs.clone(),
        };
        (ys + shortcut)?.relu()
    }
}

pub struct ResNet50 {
    stem: ConvBn,
    blocks: Vec<Bottleneck>,
}

impl ResNet50 {
    pub const CHANNELS: usize = 2048;

    pub fn new(vb: VarBuilder) -> Result<Self> {
        let stem = ConvBn::new(3, 64, ConvSpec::square(7, 2, 3), Act::Relu, BN_EPS, vb.pp("conv1"), vb.pp("bn1"))?;
        let mut blocks = Vec::new();
        let mut c_in = 64;
        for (stage, (&n, &width)) in [3usize, 4, 6, 3].iter().zip(&[64usize, 128, 256, 512]).enumerate() {
            let vb = vb.pp(format!("layer{}", stage + 1));
            for i in 0..n {
                let stride = if i == 0 && stage > 0 { 2 } else { 1 };
                blocks.push(Bottleneck::new(c_in, width, stride, vb.pp(i))?);
                c_in = width * 4;
            }
        }
        Ok(Self { stem, blocks })
    }
}

impl ModuleT for ResNet50 {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let mut ys = self.stem.forward_t(xs, train)?;
        ys = max_pool(&ys, 3, 2, 1)?;
        for block in &self.blocks {
            ys = block.forward_t(&ys, train)?;
        }
        Ok(ys)
    }
}
