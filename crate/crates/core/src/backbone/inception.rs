//! Inception-V3 feature extractor (torchvision layout, auxiliary head omitted).

use candle_core::{ModuleT, Result, Tensor};
use candle_nn::VarBuilder;

use super::layers::{avg_pool, max_pool, Act, ConvBn, ConvSpec};

const BN_EPS: f64 = 1e-3;

fn basic(c_in: usize, c_out: usize, spec: ConvSpec, vb: VarBuilder) -> Result<ConvBn> {
    ConvBn::new(c_in, c_out, spec, Act::Relu, BN_EPS, vb.pp("conv"), vb.pp("bn"))
}

fn k1(c_in: usize, c_out: usize, vb: VarBuilder) -> Result<ConvBn> {
    basic(c_in, c_out, ConvSpec::square(1, 1, 0), vb)
}

fn chain(xs: &Tensor, layers: &[ConvBn], train: bool) -> Result<Tensor> {
    let mut ys = xs.clone();
    for layer in layers {
        ys = layer.forward_t(&ys, train)?;
    }
    Ok(ys)
}

struct InceptionA {
    b1: ConvBn,
    b5: [ConvBn; 2],
    b3: [ConvBn; 3],
    pool: ConvBn,
}

impl InceptionA {
    fn new(c_in: usize, pool_features: usize, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            b1: k1(c_in, 64, vb.pp("branch1x1"))?,
            b5: [
                k1(c_in, 48, vb.pp("branch5x5_1"))?,
                basic(48, 64, ConvSpec::square(5, 1, 2), vb.pp("branch5x5_2"))?,
            ],
            b3: [
                k1(c_in, 64, vb.pp("branch3x3dbl_1"))?,
                basic(64, 96, ConvSpec::square(3, 1, 1), vb.pp("branch3x3dbl_2"))?,
                basic(96, 96, ConvSpec::square(3, 1, 1), vb.pp("branch3x3dbl_3"))?,
            ],
            pool: k1(c_in, pool_features, vb.pp("branch_pool"))?,
        })
    }
}

impl ModuleT for InceptionA {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let pooled = avg_pool(xs, 3, 1, 1)?;
        Tensor::cat(
            &[
                self.b1.forward_t(xs, train)?,
                chain(xs, &self.b5, train)?,
                chain(xs, &self.b3, train)?,
                self.pool.forward_t(&pooled, train)?,
            ],
            1,
        )
    }
}

struct InceptionB {
    b3: ConvBn,
    b3dbl: [ConvBn; 3],
}

impl InceptionB {
    fn new(c_in: usize, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            b3: basic(c_in, 384, ConvSpec::square(3, 2, 0), vb.pp("branch3x3"))?,
            b3dbl: [
                k1(c_in, 64, vb.pp("branch3x3dbl_1"))?,
                basic(64, 96, ConvSpec::square(3, 1, 1), vb.pp("branch3x3dbl_2"))?,
                basic(96, 96, ConvSpec::square(3, 2, 0), vb.pp("branch3x3dbl_3"))?,
            ],
        })
    }
}

impl ModuleT for InceptionB {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        Tensor::cat(
            &[
                self.b3.forward_t(xs, train)?,
                chain(xs, &self.b3dbl, train)?,
                max_pool(xs, 3, 2, 0)?,
            ],
            1,
        )
    }
}

struct InceptionC {
    b1: ConvBn,
    b7: [ConvBn; 3],
    b7dbl: [ConvBn; 5],
    pool: ConvBn,
}

impl InceptionC {
    fn new(c_in: usize, c7: usize, vb: VarBuilder) -> Result<Self> {
        let row = ConvSpec::rect((1, 7), (0, 3));
        let col = ConvSpec::rect((7, 1), (3, 0));
        Ok(Self {
            b1: k1(c_in, 192, vb.pp("branch1x1"))?,
            b7: [
                k1(c_in, c7, vb.pp("branch7x7_1"))?,
                basic(c7, c7, row, vb.pp("branch7x7_2"))?,
                basic(c7, 192, col, vb.pp("branch7x7_3"))?,
            ],
            b7dbl: [
                k1(c_in, c7, vb.pp("branch7x7dbl_1"))?,
                basic(c7, c7, col, vb.pp("branch7x7dbl_2"))?,
                basic(c7, c7, row, vb.pp("branch7x7dbl_3"))?,
                basic(c7, c7, col, vb.pp("branch7x7dbl_4"))?,
                basic(c7, 192, row, vb.pp("branch7x7dbl_5"))?,
            ],
            pool: k1(c_in, 192, vb.pp("branch_pool"))?,
        })
    }
}

impl ModuleT for InceptionC {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let pooled = avg_pool(xs, 3, 1, 1)?;
        Tensor::cat(
            &[
                self.b1.forward_t(xs, train)?,
                chain(xs, &self.b7, train)?,
                chain(xs, &self.b7dbl, train)?,
                self.pool.forward_t(&pooled, train)?,
            ],
            1,
        )
    }
}

struct InceptionD {
    b3: [ConvBn; 2],
    b7x3: [ConvBn; 4],
}

impl InceptionD {
    fn new(c_in: usize, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            b3: [
                k1(c_in, 192, vb.pp("branch3x3_1"))?,
                basic(192, 320, ConvSpec::square(3, 2, 0), vb.pp("branch3x3_2"))?,
            ],
            b7x3: [
                k1(c_in, 192, vb.pp("branch7x7x3_1"))?,
                basic(192, 192, ConvSpec::rect((1, 7), (0, 3)), vb.pp("branch7x7x3_2"))?,
                basic(192, 192, ConvSpec::rect((7, 1), (3, 0)), vb.pp("branch7x7x3_3"))?,
                basic(192, 192, ConvSpec::square(3, 2, 0), vb.pp("branch7x7x3_4"))?,
            ],
        })
    }
}

impl ModuleT for InceptionD {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        Tensor::cat(
            &[chain(xs, &self.b3, train)?, chain(xs, &self.b7x3, train)?, max_pool(xs, 3, 2, 0)?],
            1,
        )
    }
}

struct InceptionE {
    b1: ConvBn,
    b3_1: ConvBn,
    b3_2a: ConvBn,
    b3_2b: ConvBn,
    b3dbl_1: ConvBn,
    b3dbl_2: ConvBn,
    b3dbl_3a: ConvBn,
    b3dbl_3b: ConvBn,
    pool: ConvBn,
}

impl InceptionE {
    fn new(c_in: usize, vb: VarBuilder) -> Result<Self> {
        let row = ConvSpec::rect((1, 3), (0, 1));
        let col = ConvSpec::rect((3, 1), (1, 0));
        Ok(Self {
            b1: k1(c_in, 320, vb.pp("branch1x1"))?,
            b3_1: k1(c_in, 384, vb.pp("branch3x3_1"))?,
            b3_2a: basic(384, 384, row, vb.pp("branch3x3_2a"))?,
            b3_2b: basic(384, 384, col, vb.pp("branch3x3_2b"))?,
            b3dbl_1: k1(c_in, 448, vb.pp("branch3x3dbl_1"))?,
            b3dbl_2: basic(448, 384, ConvSpec::square(3, 1, 1), vb.pp("branch3x3dbl_2"))?,
            b3dbl_3a: basic(384, 384, row, vb.pp("branch3x3dbl_3a"))?,
            b3dbl_3b: basic(384, 384, col, vb.pp("branch3x3dbl_3b"))?,
            pool: k1(c_in, 192, vb.pp("branch_pool"))?,
        })
    }
}

impl ModuleT for InceptionE {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let b3 = self.b3_1.forward_t(xs, train)?;
        let b3 = Tensor::cat(&[self.b3_2a.forward_t(&b3, train)?, self.b3_2b.forward_t(&b3, train)?], 1)?;
        let dbl = self.b3dbl_1.forward_t(xs, train)?;
        let dbl = self.b3dbl_2.forward_t(&dbl, train)?;
        let dbl = Tensor::cat(
            &[self.b3dbl_3a.forward_t(&dbl, train)?, self.b3dbl_3b.forward_t(&dbl, train)?],
            1,
        )?;
        let pooled = avg_pool(xs, 3, 1, 1)?;
        Tensor::cat(
            &[self.b1.forward_t(xs, train)?, b3, dbl, self.pool.forward_t(&pooled, train)?],
            1,
        )
    }
}

enum Stage {
    Conv(ConvBn),
    MaxPool,
    A(InceptionA),
    B(InceptionB),
    C(InceptionC),
    D(InceptionD),
    E(InceptionE),
}

pub struct InceptionV3 {
    stages: Vec<Stage>,
}

impl InceptionV3 {
    pub const CHANNELS: usize = 2048;

    pub fn new(vb: VarBuilder) -> Result<Self> {
        let stages = vec![
            Stage::Conv(basic(3, 32, ConvSpec::square(3, 2, 0), vb.pp("Conv2d_1a_3x3"))?),
            Stage::Conv(basic(32, 32, ConvSpec::square(3, 1, 0), vb.pp("Conv2d_2a_3x3"))?),
            Stage::Conv(basic(32, 64, ConvSpec::square(3, 1, 1), vb.pp("Conv2d_2b_3x3"))?),
            Stage::MaxPool,
            Stage::Conv(k1(64, 80, vb.pp("Conv2d_3b_1x1"))?),
            Stage::Conv(basic(80, 192, ConvSpec::square(3, 1, 0), vb.pp("Conv2d_4a_3x3"))?),
            Stage::MaxPool,
            Stage::A(InceptionA::new(192, 32, vb.pp("Mixed_5b"))?),
            Stage::A(InceptionA::new(256, 64, vb.pp("Mixed_5c"))?),
            Stage::A(InceptionA::new(288, 64, vb.pp("Mixed_5d"))?),
            Stage::B(InceptionB::new(288, vb.pp("Mixed_6a"))?),
            Stage::C(InceptionC::new(768, 128, vb.pp("Mixed_6b"))?),
            Stage::C(InceptionC::new(768, 160, vb.pp("Mixed_6c"))?),
            Stage::C(InceptionC::new(768, 160, vb.pp("Mixed_6d"))?),
            Stage::C(InceptionC::new(768, 192, vb.pp("Mixed_6e"))?),
            Stage::D(InceptionD::new(768, vb.pp("Mixed_7a"))?),
            Stage::E(InceptionE::new(1280, vb.pp("Mixed_7b"))?),
            Stage::E(InceptionE::new(2048, vb.pp("Mixed_7c"))?),
        ];
        Ok(Self { stages })
    }
}

impl ModuleT for InceptionV3 {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let mut ys = xs.clone();
        for stage in &self.stages {
            ys = match stage {
                Stage::Conv(m) => m.forward_t(&ys, train)?,
                Stage::MaxPool => max_pool(&ys, 3, 2, 0)?,
                Stage::A(m) => m.forward_t(&ys, train)?,
                Stage::B(m) => m.forward_t(&ys, train)?,
                Stage::C(m) => m.forward_t(&ys, train)?,
                Stage::D(m) => m.forward_t(&ys, train)?,
                Stage::E(m) => m.forward_t(&ys, train)?,
            };
        }
        Ok(ys)
    }
}
