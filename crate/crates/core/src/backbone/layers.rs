//! Small layer set shared by the backbone definitions.
//!
//! Tensor names follow the torchvision/timm layouts (`weight`, `bias`,
//! `running_mean`, `running_var`) so converted checkpoints load unchanged.

use candle_core::{Module, ModuleT, Result, Tensor, D};
use candle_nn::{BatchNorm, BatchNormConfig, Init, VarBuilder};

#[derive(Debug, Clone)]
pub struct Conv {
    weight: Tensor,
    bias: Option<Tensor>,
    stride: usize,
    pad: (usize, usize),
    groups: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvSpec {
    pub kernel: (usize, usize),
    pub stride: usize,
    pub pad: (usize, usize),
    pub groups: usize,
    pub bias: bool,
}

impl ConvSpec {
    pub fn square(kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            kernel: (kernel, kernel),
            stride,
            pad: (pad, pad),
            groups: 1,
            bias: false,
        }
    }

    pub fn rect(kernel: (usize, usize), pad: (usize, usize)) -> Self {
        Self {
            kernel,
            stride: 1,
            pad,
            groups: 1,
            bias: false,
        }
    }

    pub fn with_bias(mut self) -> Self {
        self.bias = true;
        self
    }

    pub fn depthwise(mut self, channels: usize) -> Self {
        self.groups = channels;
        self
    }
}

impl Conv {
    pub fn new(c_in: usize, c_out: usize, spec: ConvSpec, vb: VarBuilder) -> Result<Self> {
        let (kh, kw) = spec.kernel;
        let weight = vb.get_with_hints(
            (c_out, c_in / spec.groups, kh, kw),
            "weight",
            candle_nn::init::DEFAULT_KAIMING_NORMAL,
        )?;
        let bias = if spec.bias {
            Some(vb.get_with_hints(c_out, "bias", Init::Const(0.0))?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            stride: spec.stride,
            pad: spec.pad,
            groups: spec.groups,
        })
    }
}

impl Module for Conv {
    fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        let c_in = xs.dim(1)?;
        let ys = if self.groups > 1 && self.groups == c_in {
            depthwise_conv2d(xs, &self.weight, self.stride, self.pad)?
        } else if self.pad.0 == self.pad.1 {
            xs.conv2d(&self.weight, self.pad.0, self.stride, 1, self.groups)?
        } else {
            let xs = xs
                .pad_with_zeros(2, self.pad.0, self.pad.0)?
                .pad_with_zeros(3, self.pad.1, self.pad.1)?;
            xs.conv2d(&self.weight, 0, self.stride, 1, self.groups)?
        };
        match &self.bias {
            Some(b) => ys.broadcast_add(&b.reshape((1, (), 1, 1))?),
            None => Ok(ys),
        }
    }
}

/// Per-channel convolution built from shifted slices, one multiply-add per
/// kernel tap. Keeps the whole channel dimension vectorized, unlike a
/// grouped convolution that splits into one tiny convolution per channel.
pub fn depthwise_conv2d(
    xs: &Tensor,
    weight: &Tensor,
    stride: usize,
    pad: (usize, usize),
) -> Result<Tensor> {
    let (b, c, h, w) = xs.dims4()?;
    let (wc, one, kh, kw) = weight.dims4()?;
    if wc != c || one != 1 {
        candle_core::bail!("depthwise kernel {:?} does not match {c} channels", weight.dims());
    }
    let hp = h + 2 * pad.0;
    let wp = w + 2 * pad.1;
    if hp < kh || wp < kw {
        candle_core::bail!("depthwise kernel {kh}x{kw} larger than padded input {hp}x{wp}");
    }
    let ho = (hp - kh) / stride + 1;
    let wo = (wp - kw) / stride + 1;
    // Grow to a multiple of the stride so taps can be addressed as
    // (block, phase) pairs after a reshape.
    let hq = (hp.div_ceil(stride)).max((kh - 1) / stride + ho);
    let wq = (wp.div_ceil(stride)).max((kw - 1) / stride + wo);
    let xs = xs
        .pad_with_zeros(2, pad.0, hq * stride - h - pad.0)?
        .pad_with_zeros(3, pad.1, wq * stride - w - pad.1)?;
    let xs = xs.reshape((b, c, hq, stride, wq, stride))?;
    let mut acc: Option<Tensor> = None;
    for i in 0..kh {
        for j in 0..kw {
            let tap = xs
                .narrow(2, i / stride, ho)?
                .narrow(3, i % stride, 1)?
                .narrow(4, j / stride, wo)?
                .narrow(5, j % stride, 1)?
                .reshape((b, c, ho, wo))?;
            let k = weight.narrow(2, i, 1)?.narrow(3, j, 1)?.reshape((1, c, 1, 1))?;
            let term = tap.broadcast_mul(&k)?;
            acc = Some(match acc {
                Some(a) => (a + term)?,
                None => term,
            });
        }
    }
    acc.ok_or_else(|| candle_core::Error::Msg("empty depthwise kernel".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Identity,
    Relu,
    Relu6,
}

impl Act {
    pub fn apply(self, xs: &Tensor) -> Result<Tensor> {
        match self {
            Act::Identity => Ok(xs.clone()),
            Act::Relu => xs.relu(),
            Act::Relu6 => xs.clamp(0.0, 6.0),
        }
    }
}

pub fn batch_norm(c: usize, eps: f64, vb: VarBuilder) -> Result<BatchNorm> {
    candle_nn::batch_norm(
        c,
        BatchNormConfig {
            eps,
            ..Default::default()
        },
        vb,
    )
}

/// Convolution, batch norm and activation.
#[derive(Debug, Clone)]
pub struct ConvBn {
    conv: Conv,
    bn: BatchNorm,
    act: Act,
}

impl ConvBn {
    pub fn new(
        c_in: usize,
        c_out: usize,
        spec: ConvSpec,
        act: Act,
        eps: f64,
        vb_conv: VarBuilder,
        vb_bn: VarBuilder,
    ) -> Result<Self> {
        Ok(Self {
            conv: Conv::new(c_in, c_out, spec, vb_conv)?,
            bn: batch_norm(c_out, eps, vb_bn)?,
            act,
        })
    }
}

impl ModuleT for ConvBn {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Result<Tensor> {
        let ys = self.conv.forward(xs)?;
        let ys = self.bn.forward_t(&ys, train)?;
        self.act.apply(&ys)
    }
}

/// Max pooling with implicit `-inf` padding (edge replication gives the same
/// maximum).
pub fn max_pool(xs: &Tensor, kernel: usize, stride: usize, pad: usize) -> Result<Tensor> {
    let xs = if pad > 0 {
        xs.pad_with_same(2, pad, pad)?.pad_with_same(3, pad, pad)?
    } else {
        xs.clone()
    };
    xs.max_pool2d_with_stride(kernel, stride)
}

/// Average pooling that counts zero padding in the denominator.
pub fn avg_pool(xs: &Tensor, kernel: usize, stride: usize, pad: usize) -> Result<Tensor> {
    let xs = if pad > 0 {
        xs.pad_with_zeros(2, pad, pad)?.pad_with_zeros(3, pad, pad)?
    } else {
        xs.clone()
    };
    xs.avg_pool2d_with_stride(kernel, stride)
}

pub fn global_avg_pool(xs: &Tensor) -> Result<Tensor> {
    xs.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    fn grouped_reference(xs: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Tensor {
        let c = xs.dim(1).unwrap();
        xs.conv2d(w, pad, stride, 1, c).unwrap()
    }

    #[test]
    fn depthwise_matches_grouped_convolution() {
        let dev = Device::Cpu;
        for &(h, w, stride, pad, k) in &[(7, 7, 1, 1, 3), (8, 9, 2, 1, 3), (9, 8, 2, 0, 3), (6, 6, 1, 2, 5)] {
            let xs = Tensor::randn(0f64, 1.0, (2, 4, h, w), &dev).unwrap();
            let wt = Tensor::randn(0f64, 1.0, (4, 1, k, k), &dev).unwrap();
            let ours = depthwise_conv2d(&xs, &wt, stride, (pad, pad)).unwrap();
            let reference = grouped_reference(&xs, &wt, stride, pad);
            assert_eq!(ours.dims(), reference.dims());
            let diff = (ours - reference)
                .unwrap()
                .abs()
                .unwrap()
                .flatten_all()
                .unwrap()
                .max(0)
                .unwrap()
                .to_scalar::<f64>()
                .unwrap();
            assert!(diff < 1e-12, "max diff {diff}");
        }
    }

    #[test]
    fn padded_max_pool_ignores_padding() {
        let dev = Device::Cpu;
        let xs = Tensor::new(&[[[[-5f32, -4.], [-3., -2.]]]], &dev).unwrap();
        let ys = max_pool(&xs, 3, 2, 1).unwrap();
        assert_eq!(ys.flatten_all().unwrap().to_vec1::<f32>().unwrap(), vec![-2.0]);
    }

    #[test]
    fn asymmetric_padding_keeps_size() {
        let dev = Device::Cpu;
        let varmap = candle_nn::VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &dev);
        let conv = Conv::new(3, 5, ConvSpec::rect((1, 7), (0, 3)), vb).unwrap();
        let xs = Tensor::zeros((1, 3, 6, 10), DType::F32, &dev).unwrap();
        assert_eq!(conv.forward(&xs).unwrap().dims(), &[1, 5, 6, 10]);
    }
}
