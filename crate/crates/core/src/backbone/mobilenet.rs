//! MobileNet-V2 (width 1.0) feature extractor, torchvision layout.

use candle_core::{ModuleT, Result, Tensor};
use candle_nn::VarBuilder;

use super::layers::{Act, ConvBn, ConvSpec};

const BN_EPS: f64 = 1e-5;

struct InvertedResidual {
    layers: Vec<ConvBn>,
    residual: bool,
}

impl InvertedResidual {
    fn new(c_in: usize, c_out: usize, stride: usize, expand: usize, vb: VarBuilder) -> Result<Self> {
        let hidden = c_in * expand;
        let vb = vb.pp("conv");
        let mut layers = Vec::new();
        let mut idx = 0;
        if expand != 1 {
            layers.push(ConvBn::new(
                c_in,
                hidden,
                ConvSpec::square(1, 1, 0),
                Act::Relu6,
                BN_EPS,
                vb.pp(format!("{idx}.0")),
                vb.pp(format!("{idx}.1")),
            )?);
            idx += 1;
        }
        layers.push(ConvBn::new(
            hidden,
            hidden,
            ConvSpec::square(3, stride, 1).depthwise(hidden),
            Act::Relu6,
            BN_EPS,
            vb.pp(format!("{idx}.0")),
            vb.pp(format!("{idx}.1")),
        )?);
        idx += 1;
        // Linear bottleneck: pointwise conv at `idx`, its norm at `idx + 1`.
        layers.push(ConvBn::new(
            hidden,
            c_out,
            ConvSpec::square(1, 1, 0),
            Act::Identity,
            BN_EPS,
            vb.pp(idx),
            vb.pp(idx + 1),
        )?);
        Ok(Self {
            layers,
            residual: stride == 1 && c_in == c_out,
        })
    }
}

impl ModuleT for InvertedResidual {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let mut ys = xs.clone();
        for layer in &self.layers {
            ys = layer.forward_t(&ys, train)?;
        }
        if self.residual {
            ys + xs
        } else {
            Ok(ys)
        }
    }
}

pub struct MobileNetV2 {
    stem: ConvBn,
    blocks: Vec<InvertedResidual>,
    head: ConvBn,
}

impl MobileNetV2 {
    pub const CHANNELS: usize = 1280;

    pub fn new(vb: VarBuilder) -> Result<Self> {
        let vb = vb.pp("features");
        let stem = ConvBn::new(3, 32, ConvSpec::square(3, 2, 1), Act::Relu6, BN_EPS, vb.pp("0.0"), vb.pp("0.1"))?;
        // (expansion, channels, repeats, first stride)
        let settings = [
            (1, 16, 1, 1),
            (6, 24, 2, 2),
            (6, 32, 3, 2),
            (6, 64, 4, 2),
            (6, 96, 3, 1),
            (6, 160, 3, 2),
            (6, 320, 1, 1),
        ];
        let mut blocks = Vec::new();
        let mut c_in = 32;
        let mut idx = 1;
        for (t, c, n, s) in settings {
            for i in 0..n {
                let stride = if i == 0 { s } else { 1 };
                blocks.push(InvertedResidual::new(c_in, c, stride, t, vb.pp(idx))?);
                c_in = c;
                idx += 1;
            }
        }
        let head = ConvBn::new(
            c_in,
            Self::CHANNELS,
            ConvSpec::square(1, 1, 0),
            Act::Relu6,
            BN_EPS,
            vb.pp(format!("{idx}.0")),
            vb.pp(format!("{idx}.1")),
        )?;
        Ok(Self { stem, blocks, head })
    }
}

impl ModuleT for MobileNetV2 {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let mut ys = self.stem.forward_t(xs, train)?;
        for block in &self.blocks {
            ys = block.forward_t(&ys, train)?;
        }
        self.head.forward_t(&ys, train)
    }
}
