//! Xception feature extractor (timm `legacy_xception` layout).

use candle_core::{Module, ModuleT, Result, Tensor};
use candle_nn::{BatchNorm, VarBuilder};

use super::layers::{batch_norm, max_pool, Act, Conv, ConvBn, ConvSpec};

const BN_EPS: f64 = 1e-5;

struct SeparableConv {
    depthwise: Conv,
    pointwise: Conv,
}

impl SeparableConv {
    fn new(c_in: usize, c_out: usize, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            depthwise: Conv::new(c_in, c_in, ConvSpec::square(3, 1, 1).depthwise(c_in), vb.pp("conv1"))?,
            pointwise: Conv::new(c_in, c_out, ConvSpec::square(1, 1, 0), vb.pp("pointwise"))?,
        })
    }
}

impl Module for SeparableConv {
    fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        self.pointwise.forward(&self.depthwise.forward(xs)?)
    }
}

struct Unit {
    pre_relu: bool,
    conv: SeparableConv,
    bn: BatchNorm,
}

struct Block {
    units: Vec<Unit>,
    pool: bool,
    skip: Option<ConvBn>,
}

impl Block {
    fn new(
        c_in: usize,
        c_out: usize,
        reps: usize,
        stride: usize,
        start_with_relu: bool,
        grow_first: bool,
        vb: VarBuilder,
    ) -> Result<Self> {
        let skip = if c_out != c_in || stride != 1 {
            Some(ConvBn::new(
                c_in,
                c_out,
                ConvSpec::square(1, stride, 0),
                Act::Identity,
                BN_EPS,
                vb.pp("skip"),
                vb.pp("skipbn"),
            )?)
        } else {
            None
        };
        let shift = usize::from(!start_with_relu);
        let mut units = Vec::with_capacity(reps);
        for i in 0..reps {
            let (inc, outc) = if grow_first {
                (if i == 0 { c_in } else { c_out }, c_out)
            } else {
                (c_in, if i + 1 < reps { c_in } else { c_out })
            };
            let conv_idx = 3 * i + 1 - shift;
            units.push(Unit {
                pre_relu: start_with_relu || i > 0,
                conv: SeparableConv::new(inc, outc, vb.pp(format!("rep.{conv_idx}")))?,
                bn: batch_norm(outc, BN_EPS, vb.pp(format!("rep.{}", conv_idx + 1)))?,
            });
        }
        Ok(Self {
            units,
            pool: stride != 1,
            skip,
        })
    }
}

impl ModuleT for Block {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let mut ys = xs.clone();
        for unit in &self.units {
            if unit.pre_relu {
                ys = ys.relu()?;
            }
            ys = unit.bn.forward_t(&unit.conv.forward(&ys)?, train)?;
        }
        if self.pool {
            ys = max_pool(&ys, 3, 2, 1)?;
        }
        let shortcut = match &self.skip {
            Some(skip) => skip.forward_t(xs, train)?,
            None => xs.clone(),
        };
        ys + shortcut
    }
}

pub struct Xception {
    conv1: ConvBn,
    conv2: ConvBn,
    blocks: Vec<Block>,
    conv3: SeparableConv,
    bn3: BatchNorm,
    conv4: SeparableConv,
    bn4: BatchNorm,
}

impl Xception {
    pub const CHANNELS: usize = 2048;

    pub fn new(vb: VarBuilder) -> Result<Self> {
        let conv1 = ConvBn::new(3, 32, ConvSpec::square(3, 2, 0), Act::Relu, BN_EPS, vb.pp("conv1"), vb.pp("bn1"))?;
        let conv2 = ConvBn::new(32, 64, ConvSpec::square(3, 1, 0), Act::Relu, BN_EPS, vb.pp("conv2"), vb.pp("bn2"))?;
        let mut blocks = vec![
            Block::new(64, 128, 2, 2, false, true, vb.pp("block1"))?,
            Block::new(128, 256, 2, 2, true, true, vb.pp("block2"))?,
            Block::new(256, 728, 2, 2, true, true, vb.pp("block3"))?,
        ];
        for i in 4..=11 {
            blocks.push(Block::new(728, 728, 3, 1, true, true, vb.pp(format!("block{i}")))?);
        }
        blocks.push(Block::new(728, 1024, 2, 2, true, false, vb.pp("block12"))?);
        Ok(Self {
            conv1,
            conv2,
            blocks,
            conv3: SeparableConv::new(1024, 1536, vb.pp("conv3"))?,
            bn3: batch_norm(1536, BN_EPS, vb.pp("bn3"))?,
            conv4: SeparableConv::new(1536, Self::CHANNELS, vb.pp("conv4"))?,
            bn4: batch_norm(Self::CHANNELS, BN_EPS, vb.pp("bn4"))?,
        })
    }
}

impl ModuleT for Xception {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let mut ys = self.conv1.forward_t(xs, train)?;
        ys = self.conv2.forward_t(&ys, train)?;
        for block in &self.blocks {
            ys = block.forward_t(&ys, train)?;
        }
        ys = self.bn3.forward_t(&self.conv3.forward(&ys)?, train)?.relu()?;
        self.bn4.forward_t(&self.conv4.forward(&ys)?, train)?.relu()
    }
}
