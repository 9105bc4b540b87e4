//! Region-pooled channel-attention classification head.
//!
//! Pipeline over a backbone feature map `F` (N×c×h×w tensors):
//!
//! 1. resample `F` to a 32×32 grid,
//! 2. crop the grid into fixed rectangles and average each one (one
//!    c-dimensional descriptor per region),
//! 3. gate every descriptor entry with its own sigmoid, `x · σ(x)`,
//! 4. concatenate the region descriptors, apply dropout then layer norm,
//! 5. project to class logits and take the softmax.
//!
//! Everything here is written against candle tensors so the same code runs in
//! `f32` for training and in `f64` for gradient checks.

use candle_core::{Tensor, D};
use candle_nn::{Init, VarBuilder};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Side of the resampled grid the regions are defined on.
pub const GRID_SIDE: usize = 32;
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Half-open rectangle `[row0, row1) × [col0, col1)`; serialized as a
/// four-integer array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct Region {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

impl From<[usize; 4]> for Region {
    fn from([row0, row1, col0, col1]: [usize; 4]) -> Self {
        Self { row0, row1, col0, col1 }
    }
}

impl From<Region> for [usize; 4] {
    fn from(r: Region) -> Self {
        [r.row0, r.row1, r.col0, r.col1]
    }
}

impl Region {
    pub fn new(row0: usize, row1: usize, col0: usize, col1: usize) -> Self {
        Self { row0, row1, col0, col1 }
    }

    pub fn area(&self) -> usize {
        self.row1.saturating_sub(self.row0) * self.col1.saturating_sub(self.col0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionSpec {
    regions: Vec<Region>,
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self::halves(GRID_SIDE)
    }
}

impl RegionSpec {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::Parameter("region spec needs at least one region".into()));
        }
        if let Some(r) = regions.iter().find(|r| r.area() == 0) {
            return Err(Error::Parameter(format!("empty region {:?}", <[usize; 4]>::from(*r))));
        }
        Ok(Self { regions })
    }

    /// Top, bottom, left and right halves of a `side`×`side` grid.
    pub fn halves(side: usize) -> Self {
        let h = side / 2;
        Self {
            regions: vec![
                Region::new(0, h, 0, side),
                Region::new(h, side, 0, side),
                Region::new(0, side, 0, h),
                Region::new(0, side, h, side),
            ],
        }
    }

    pub fn full_frame(side: usize) -> Self {
        Self {
            regions: vec![Region::new(0, side, 0, side)],
        }
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Region order permuted: output region `i` is input region `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.regions.len() {
            return Err(Error::Parameter("permutation length mismatch".into()));
        }
        Self::new(perm.iter().map(|&i| self.regions[i]).collect())
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        for r in &self.regions {
            if r.area() == 0 {
                return Err(Error::Parameter(format!("empty region {:?}", <[usize; 4]>::from(*r))));
            }
            if r.row1 > height || r.col1 > width {
                return Err(Error::Parameter(format!(
                    "region {:?} outside {height}x{width} grid",
                    <[usize; 4]>::from(*r)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMode {
    /// Corner-aligned bilinear: output corners sample input corners exactly.
    #[default]
    Bilinear,
    Nearest,
}

/// `n_out × n_in` resampling matrix along one axis.
pub fn interpolation_matrix(n_in: usize, n_out: usize, mode: UpsampleMode) -> Vec<f64> {
    let mut m = vec![0.0; n_out * n_in];
    for i in 0..n_out {
        match mode {
            UpsampleMode::Bilinear => {
                let src = if n_out > 1 && n_in > 1 {
                    i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
                } else {
                    0.0
                };
                let i0 = (src.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                let w = src - i0 as f64;
                m[i * n_in + i0] += 1.0 - w;
                m[i * n_in + i1] += w;
            }
            UpsampleMode::Nearest => {
                let src = (i * n_in / n_out).min(n_in - 1);
                m[i * n_in + src] = 1.0;
            }
        }
    }
    m
}

/// Resamples every channel of an N×c×h×w map to `side`×`side`.
pub fn upsample(features: &Tensor, side: usize, mode: UpsampleMode) -> Result<Tensor> {
    resize_map(features, side, side, mode)
}

/// Resamples every channel of an N×c×h×w map to `height`×`width`.
///
/// Implemented as `R_rows · F · R_colsᵀ` so the operation is differentiable
/// and channels stay independent.
pub fn resize_map(features: &Tensor, height: usize, width: usize, mode: UpsampleMode) -> Result<Tensor> {
    if height == 0 || width == 0 {
        return Err(Error::Parameter("upsample target side must be positive".into()));
    }
    let (_, _, h, w) = features.dims4()?;
    if h == 0 || w == 0 {
        return Err(Error::Shape("empty feature map".into()));
    }
    let dtype = features.dtype();
    let dev = features.device();
    let rows = Tensor::from_vec(interpolation_matrix(h, height, mode), (height, h), dev)?.to_dtype(dtype)?;
    let cols_t = Tensor::from_vec(interpolation_matrix(w, width, mode), (width, w), dev)?
        .to_dtype(dtype)?
        .t()?
        .contiguous()?;
    let ys = features.broadcast_matmul(&cols_t)?;
    Ok(rows.broadcast_matmul(&ys)?)
}

pub fn upsample_bilinear(features: &Tensor, side: usize) -> Result<Tensor> {
    upsample(features, side, UpsampleMode::Bilinear)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pooled,
    Attended,
}

/// N×R×c matrix of per-region channel descriptors.
#[derive(Debug, Clone)]
pub struct PooledFeatures {
    data: Tensor,
    stage: Stage,
}

impl PooledFeatures {
    pub fn new(data: Tensor, stage: Stage) -> Result<Self> {
        data.dims3()?;
        Ok(Self { data, stage })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn num_regions(&self) -> usize {
        self.data.dims()[1]
    }

    pub fn channels(&self) -> usize {
        self.data.dims()[2]
    }
}

/// Mean of the map over each region: output row `n` holds the per-channel
/// average over rectangle `n`.
pub fn region_pool(features: &Tensor, spec: &RegionSpec) -> Result<PooledFeatures> {
    let (_, _, h, w) = features.dims4()?;
    spec.validate(h, w)?;
    let rows = spec
        .regions()
        .iter()
        .map(|r| {
            features
                .narrow(2, r.row0, r.row1 - r.row0)?
                .narrow(3, r.col0, r.col1 - r.col0)?
                .mean((2, 3))
        })
        .collect::<candle_core::Result<Vec<_>>>()?;
    PooledFeatures::new(Tensor::stack(&rows, 1)?, Stage::Pooled)
}

/// Global average pool as a single-region descriptor.
pub fn global_pool(features: &Tensor) -> Result<PooledFeatures> {
    let pooled = features.mean((2, 3))?.unsqueeze(1)?;
    PooledFeatures::new(pooled, Stage::Pooled)
}

/// Elementwise `x · σ(x)`; parameter free.
pub fn sigmoid_gate(xs: &Tensor) -> Result<Tensor> {
    Ok((xs * candle_nn::ops::sigmoid(xs)?)?)
}

pub fn channel_attention(pooled: &PooledFeatures) -> Result<PooledFeatures> {
    if pooled.stage != Stage::Pooled {
        return Err(Error::Parameter("channel attention expects pooled features".into()));
    }
    PooledFeatures::new(sigmoid_gate(&pooled.data)?, Stage::Attended)
}

/// Scalar form of the attention gate.
pub fn attention_gate(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// Inverted dropout with a mask drawn from `seed`.
pub fn dropout(xs: &Tensor, rate: f64, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(xs.clone());
    }
    let keep = 1.0 - rate;
    let mut rng = rng_for(seed, &["dropout"]);
    let mask: Vec<f64> = (0..xs.elem_count())
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    let mask = Tensor::from_vec(mask, xs.shape(), xs.device())?.to_dtype(xs.dtype())?;
    Ok((xs * mask)?)
}

/// Normalizes each row over its last dimension, then applies the per-element
/// gain and bias.
pub fn layer_norm(xs: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
    let mean = xs.mean_keepdim(D::Minus1)?;
    let centered = xs.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
    let normed = centered.broadcast_div(&(var + eps)?.sqrt()?)?;
    Ok(normed.broadcast_mul(gain)?.broadcast_add(bias)?)
}

/// Row-wise softmax.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    // Shift invariance: the max carries no gradient.
    let max = logits.max_keepdim(D::Minus1)?.detach();
    let num = logits.broadcast_sub(&max)?.exp()?;
    let den = num.sum_keepdim(D::Minus1)?;
    Ok(num.broadcast_div(&den)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub num_regions: usize,
    pub channels: usize,
    pub num_classes: usize,
    /// `None` disables dropout entirely.
    pub dropout: Option<f64>,
    pub layer_norm: bool,
    pub hidden: Option<usize>,
}

impl HeadConfig {
    pub fn input_len(&self) -> usize {
        self.num_regions * self.channels
    }

    pub fn param_count(&self) -> usize {
        let ln = if self.layer_norm { 2 * self.input_len() } else { 0 };
        ln + dense_param_count(self.input_len(), self.num_classes, self.hidden)
    }
}

fn dense_param_count(input: usize, classes: usize, hidden: Option<usize>) -> usize {
    match hidden {
        None => input * classes + classes,
        Some(h) => input * h + h + h * classes + classes,
    }
}

/// Parameter count of the full head: layer norm plus dense projection(s).
pub fn head_param_count(channels: usize, regions: usize, num_classes: usize, hidden: Option<usize>) -> usize {
    2 * regions * channels + dense_param_count(regions * channels, num_classes, hidden)
}

/// Learnable head parameters (registered as `layernorm.*`, `hidden.*`,
/// `dense.*` under the builder's prefix).
#[derive(Debug, Clone)]
pub struct HeadParameters {
    pub config: HeadConfig,
    pub layernorm_gain: Option<Tensor>,
    pub layernorm_bias: Option<Tensor>,
    pub hidden: Option<(Tensor, Tensor)>,
    /// `input × classes` (or `hidden × classes`).
    pub dense_weights: Tensor,
    pub dense_bias: Tensor,
}

impl HeadParameters {
    pub fn new(config: HeadConfig, vb: VarBuilder) -> Result<Self> {
        if let Some(rate) = config.dropout {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
            }
        }
        if config.num_classes == 0 || config.input_len() == 0 {
            return Err(Error::Config("head needs at least one class and one input".into()));
        }
        let n = config.input_len();
        let (layernorm_gain, layernorm_bias) = if config.layer_norm {
            (
                Some(vb.get_with_hints(n, "layernorm.gain", Init::Const(1.0))?),
                Some(vb.get_with_hints(n, "layernorm.bias", Init::Const(0.0))?),
            )
        } else {
            (None, None)
        };
        let glorot = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Init::Uniform { lo: -limit, up: limit }
        };
        let (hidden, dense_in) = match config.hidden {
            Some(h) => (
                Some((
                    vb.get_with_hints((n, h), "hidden.weight", glorot(n, h))?,
                    vb.get_with_hints(h, "hidden.bias", Init::Const(0.0))?,
                )),
                h,
            ),
            None => (None, n),
        };
        let k = config.num_classes;
        Ok(Self {
            dense_weights: vb.get_with_hints((dense_in, k), "dense.weight", glorot(dense_in, k))?,
            dense_bias: vb.get_with_hints(k, "dense.bias", Init::Const(0.0))?,
            config,
            layernorm_gain,
            layernorm_bias,
            hidden,
        })
    }

    /// Class logits for a batch of pooled descriptors.
    pub fn logits(&self, pooled: &PooledFeatures, training: bool, rng_seed: u64) -> Result<Tensor> {
        let (_, regions, channels) = pooled.tensor().dims3()?;
        if regions * channels != self.config.input_len() {
            return Err(Error::Shape(format!(
                "head expects {} inputs, got {regions}x{channels}",
                self.config.input_len()
            )));
        }
        if self.dense_bias.dim(0)? != self.config.num_classes {
            return Err(Error::Config(format!(
                "dense bias has {} entries for {} classes",
                self.dense_bias.dim(0)?,
                self.config.num_classes
            )));
        }
        let mut xs = pooled.tensor().flatten_from(1)?;
        if training {
            if let Some(rate) = self.config.dropout {
                xs = dropout(&xs, rate, rng_seed)?;
            }
        }
        if let (Some(gain), Some(bias)) = (&self.layernorm_gain, &self.layernorm_bias) {
            xs = layer_norm(&xs, gain, bias, LAYER_NORM_EPS)?;
        }
        if let Some((w, b)) = &self.hidden {
            xs = xs.matmul(w)?.broadcast_add(b)?.relu()?;
        }
        Ok(xs.matmul(&self.dense_weights)?.broadcast_add(&self.dense_bias)?)
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }
}

/// Class distribution for attended descriptors.
pub fn head_forward(
    attended: &PooledFeatures,
    params: &HeadParameters,
    training: bool,
    rng_seed: u64,
) -> Result<Tensor> {
    if attended.stage() != Stage::Attended {
        return Err(Error::Parameter("head_forward expects attended features".into()));
    }
    softmax(&params.logits(attended, training, rng_seed)?)
}
