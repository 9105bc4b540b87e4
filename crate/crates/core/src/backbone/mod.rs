//! Pretrained CNN backbones behind a uniform "image batch in, feature-map
//! batch out" contract.
//!
//! Architectures are defined here only so that pretrained ImageNet weights can
//! be loaded into them; weights come from `<weights dir>/<name>.safetensors`
//! with torchvision/timm tensor names. A backbone is never silently randomly
//! initialized: the caller picks [`BackboneInit::Pretrained`] or an explicit
//! seeded initialization.

mod fixture;
mod inception;
pub mod layers;
mod mobilenet;
mod resnet;
mod xception;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use candle_core::{DType, Device, ModuleT, Tensor};
use candle_nn::{VarBuilder, VarMap};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ColorOrder, ImageTensor};
use crate::seed::rng_for;

pub use fixture::{PROJECTION_POOL, TINY_CONV_KERNEL};

/// Environment variable naming the pretrained-weight cache root.
pub const WEIGHTS_DIR_ENV: &str = "RPCA_WEIGHTS_DIR";

/// ImageNet training-set channel means in BGR order, as shipped with the
/// caffe-style preprocessing of common pretrained-weight distributions.
pub const IMAGENET_BGR_MEAN: [f32; 3] = [103.939, 116.779, 123.68];

pub const INPUT_SIDE: usize = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackboneKind {
    Resnet50,
    Xception,
    Inceptionv3,
    Mobilenetv2,
    /// Single fixed random convolution; test fixture.
    TinyConv,
    /// Fixed random dense projection without a spatial map; test fixture.
    RandomProjection,
}

impl BackboneKind {
    pub const PRETRAINED: [BackboneKind; 4] = [
        BackboneKind::Resnet50,
        BackboneKind::Xception,
        BackboneKind::Inceptionv3,
        BackboneKind::Mobilenetv2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackboneKind::Resnet50 => "resnet50",
            BackboneKind::Xception => "xception",
            BackboneKind::Inceptionv3 => "inceptionv3",
            BackboneKind::Mobilenetv2 => "mobilenetv2",
            BackboneKind::TinyConv => "tiny-conv",
            BackboneKind::RandomProjection => "random-projection",
        }
    }

    /// Display name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            BackboneKind::Resnet50 => "ResNet-50",
            BackboneKind::Xception => "Xception",
            BackboneKind::Inceptionv3 => "Inception-V3",
            BackboneKind::Mobilenetv2 => "MobileNet-V2",
            BackboneKind::TinyConv => "TinyConv",
            BackboneKind::RandomProjection => "RandomProjection",
        }
    }

    /// Reported model size (millions) of the GAP + dense baseline over this
    /// backbone; the reference for parameter accounting.
    pub fn reference_params_millions(self) -> Option<f64> {
        match self {
            BackboneKind::Resnet50 => Some(23.7),
            BackboneKind::Xception => Some(21.0),
            BackboneKind::Inceptionv3 => Some(21.9),
            BackboneKind::Mobilenetv2 => Some(2.3),
            _ => None,
        }
    }

    pub fn default_channels(self) -> usize {
        match self {
            BackboneKind::Resnet50 => resnet::ResNet50::CHANNELS,
            BackboneKind::Xception => xception::Xception::CHANNELS,
            BackboneKind::Inceptionv3 => inception::InceptionV3::CHANNELS,
            BackboneKind::Mobilenetv2 => mobilenet::MobileNetV2::CHANNELS,
            BackboneKind::TinyConv => 32,
            BackboneKind::RandomProjection => 64,
        }
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.to_ascii_lowercase().replace(['_', ' '], "-");
        Ok(match normalized.as_str() {
            "resnet50" | "resnet-50" => BackboneKind::Resnet50,
            "xception" => BackboneKind::Xception,
            "inceptionv3" | "inception-v3" => BackboneKind::Inceptionv3,
            "mobilenetv2" | "mobilenet-v2" => BackboneKind::Mobilenetv2,
            "tiny-conv" => BackboneKind::TinyConv,
            "random-projection" => BackboneKind::RandomProjection,
            other => return Err(Error::Config(format!("unknown backbone `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessMode {
    /// RGB→BGR, subtract the ImageNet channel means, no scaling.
    BgrZeroCenter,
    /// `x / 127.5 - 1`, channel order kept.
    ScaleSignedUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub name: BackboneKind,
    pub input_side: usize,
    pub feature_channels: usize,
    /// Reference size in millions of parameters (see
    /// [`BackboneKind::reference_params_millions`]); computed for fixtures.
    pub base_param_count: f64,
    pub preprocessing: PreprocessMode,
}

impl BackboneSpec {
    pub fn new(kind: BackboneKind) -> Self {
        let feature_channels = kind.default_channels();
        let base_param_count = kind.reference_params_millions().unwrap_or_else(|| {
            let count = match kind {
                BackboneKind::TinyConv => 3 * TINY_CONV_KERNEL * TINY_CONV_KERNEL * feature_channels + feature_channels,
                _ => {
                    let side = INPUT_SIDE / PROJECTION_POOL;
                    3 * side * side * feature_channels + feature_channels
                }
            };
            count as f64 / 1e6
        });
        Self {
            name: kind,
            input_side: INPUT_SIDE,
            feature_channels,
            base_param_count,
            preprocessing: PreprocessMode::BgrZeroCenter,
        }
    }

    pub fn with_channels(mut self, channels: usize) -> Result<Self> {
        if BackboneKind::PRETRAINED.contains(&self.name) && channels != self.name.default_channels() {
            return Err(Error::Config(format!(
                "{} emits {} channels, not {channels}",
                self.name,
                self.name.default_channels()
            )));
        }
        self.feature_channels = channels;
        Ok(self)
    }
}

/// Applies the backbone input normalization to an RGB image in `[0, 255]`.
pub fn preprocess(image: &ImageTensor, mode: PreprocessMode) -> Result<ImageTensor> {
    if image.color_order != ColorOrder::Rgb || image.centered {
        return Err(Error::Domain("preprocess expects an uncentered RGB image".into()));
    }
    let (lo, hi) = image.value_range();
    if !(0.0..=255.0).contains(&lo) || !(0.0..=255.0).contains(&hi) {
        return Err(Error::Domain(format!("pixel values [{lo}, {hi}] outside [0, 255]")));
    }
    let mut out = image.clone();
    match mode {
        PreprocessMode::BgrZeroCenter => {
            for px in out.data_mut().chunks_exact_mut(3) {
                let (r, g, b) = (px[0], px[1], px[2]);
                px[0] = b - IMAGENET_BGR_MEAN[0];
                px[1] = g - IMAGENET_BGR_MEAN[1];
                px[2] = r - IMAGENET_BGR_MEAN[2];
            }
            out.color_order = ColorOrder::Bgr;
        }
        PreprocessMode::ScaleSignedUnit => {
            for v in out.data_mut() {
                *v = *v / 127.5 - 1.0;
            }
        }
    }
    out.centered = true;
    Ok(out)
}

/// Inverse of [`preprocess`].
pub fn deprocess(image: &ImageTensor, mode: PreprocessMode) -> Result<ImageTensor> {
    if !image.centered {
        return Err(Error::Domain("deprocess expects a preprocessed image".into()));
    }
    let mut out = image.clone();
    match mode {
        PreprocessMode::BgrZeroCenter => {
            if image.color_order != ColorOrder::Bgr {
                return Err(Error::Domain("expected BGR order".into()));
            }
            for px in out.data_mut().chunks_exact_mut(3) {
                let (b, g, r) = (px[0], px[1], px[2]);
                px[0] = r + IMAGENET_BGR_MEAN[2];
                px[1] = g + IMAGENET_BGR_MEAN[1];
                px[2] = b + IMAGENET_BGR_MEAN[0];
            }
            out.color_order = ColorOrder::Rgb;
        }
        PreprocessMode::ScaleSignedUnit => {
            for v in out.data_mut() {
                *v = (*v + 1.0) * 127.5;
            }
        }
    }
    out.centered = false;
    Ok(out)
}

/// Stacks preprocessed images into an N×3×H×W tensor.
pub fn images_to_tensor(images: &[ImageTensor], device: &Device, dtype: DType) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::Shape("empty image batch".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(images.len() * 3 * h * w);
    for img in images {
        if img.height() != h || img.width() != w {
            return Err(Error::Shape("images in a batch must share a size".into()));
        }
        data.extend(img.to_planar());
    }
    Ok(Tensor::from_vec(data, (images.len(), 3, h, w), device)?.to_dtype(dtype)?)
}

/// Where backbone weights come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneInit {
    /// `<dir>/<name>.safetensors`.
    Pretrained { dir: PathBuf },
    /// Explicit deterministic random initialization (fixtures and smoke tests).
    Seeded { seed: u64 },
    /// Left as built; the caller loads a checkpoint over it.
    Deferred,
}

impl BackboneInit {
    /// Pretrained weights from the directory named by `RPCA_WEIGHTS_DIR`.
    pub fn from_env() -> Result<Self> {
        let dir = std::env::var_os(WEIGHTS_DIR_ENV).ok_or_else(|| {
            Error::Initialization(format!(
                "{WEIGHTS_DIR_ENV} is not set; pretrained backbone weights are required"
            ))
        })?;
        Ok(BackboneInit::Pretrained { dir: dir.into() })
    }
}

pub fn weights_path(dir: &Path, kind: BackboneKind) -> PathBuf {
    dir.join(format!("{}.safetensors", kind.name()))
}

pub struct Backbone {
    spec: BackboneSpec,
    net: Box<dyn ModuleT + Send + Sync>,
}

impl Backbone {
    /// Builds the architecture; parameters are registered in the varmap
    /// behind `vb` and must then be initialized with [`initialize`].
    pub fn build(spec: &BackboneSpec, vb: VarBuilder) -> Result<Self> {
        let net: Box<dyn ModuleT + Send + Sync> = match spec.name {
            BackboneKind::Resnet50 => Box::new(resnet::ResNet50::new(vb)?),
            BackboneKind::Xception => Box::new(xception::Xception::new(vb)?),
            BackboneKind::Inceptionv3 => Box::new(inception::InceptionV3::new(vb)?),
            BackboneKind::Mobilenetv2 => Box::new(mobilenet::MobileNetV2::new(vb)?),
            BackboneKind::TinyConv => Box::new(fixture::TinyConv::new(spec.feature_channels, vb)?),
            BackboneKind::RandomProjection => Box::new(fixture::RandomProjection::new(
                spec.input_side,
                spec.feature_channels,
                vb,
            )?),
        };
        Ok(Self {
            spec: spec.clone(),
            net,
        })
    }

    /// Rebuilds the architecture over detached views of the weights stored
    /// under `prefix`. A forward pass through it records no autograd graph,
    /// so frozen feature extraction holds only the live activations.
    pub fn detached(spec: &BackboneSpec, varmap: &VarMap, prefix: &str, dtype: DType) -> Result<Self> {
        let lead = format!("{prefix}.");
        let tensors: HashMap<String, Tensor> = varmap
            .data()
            .lock()
            .expect("varmap lock")
            .iter()
            .filter(|(name, _)| name.starts_with(&lead))
            .map(|(name, var)| (name.clone(), var.as_tensor().detach()))
            .collect();
        Self::build(spec, VarBuilder::from_tensors(tensors, dtype, &Device::Cpu).pp(prefix))
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    /// True when the backbone emits a spatial convolutional map.
    pub fn has_spatial_map(&self) -> bool {
        self.spec.name != BackboneKind::RandomProjection
    }

    /// Raw forward pass on a preprocessed N×3×H×W batch.
    ///
    /// `train` selects batch statistics in normalization layers; `trainable`
    /// = false detaches the output so no gradient reaches the backbone.
    pub fn forward(&self, xs: &Tensor, train: bool, trainable: bool) -> Result<Tensor> {
        let (_, c, h, w) = xs.dims4()?;
        if c != 3 || h != self.spec.input_side || w != self.spec.input_side {
            return Err(Error::Shape(format!(
                "{} expects 3x{side}x{side} input, got {c}x{h}x{w}",
                self.spec.name,
                side = self.spec.input_side
            )));
        }
        if trainable {
            Ok(self.net.forward_t(xs, train)?)
        } else {
            Ok(self.net.forward_t(xs, false)?.detach())
        }
    }

    /// Feature maps (N×c×h×w) for a batch of preprocessed images.
    pub fn extract_features(&self, images: &[ImageTensor], trainable: bool, dtype: DType) -> Result<Tensor> {
        for img in images {
            let expected = match self.spec.preprocessing {
                PreprocessMode::BgrZeroCenter => ColorOrder::Bgr,
                PreprocessMode::ScaleSignedUnit => ColorOrder::Rgb,
            };
            if !img.centered || img.color_order != expected {
                return Err(Error::Domain(format!(
                    "image not preprocessed for {:?}",
                    self.spec.preprocessing
                )));
            }
            if img.height() != self.spec.input_side || img.width() != self.spec.input_side {
                return Err(Error::Shape(format!(
                    "expected {side}x{side} input, got {}x{}",
                    img.height(),
                    img.width(),
                    side = self.spec.input_side
                )));
            }
        }
        let xs = images_to_tensor(images, &Device::Cpu, dtype)?;
        let features = self.forward(&xs, trainable, trainable)?;
        let c = features.dim(1)?;
        if c != self.spec.feature_channels {
            return Err(Error::Shape(format!(
                "{} produced {c} channels, spec says {}",
                self.spec.name, self.spec.feature_channels
            )));
        }
        Ok(features)
    }
}

/// Initializes every variable under `prefix` according to `init`.
pub fn initialize(varmap: &VarMap, prefix: &str, kind: BackboneKind, init: &BackboneInit) -> Result<()> {
    match init {
        BackboneInit::Pretrained { dir } => load_pretrained(varmap, prefix, &weights_path(dir, kind)),
        BackboneInit::Seeded { seed } => seeded_init(varmap, prefix, *seed),
        BackboneInit::Deferred => Ok(()),
    }
}

/// Copies tensors from a safetensors file into the varmap entries under
/// `prefix`. Every registered variable must be present with a matching shape.
pub fn load_pretrained(varmap: &VarMap, prefix: &str, path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Initialization(format!(
            "missing pretrained weights {} (set {WEIGHTS_DIR_ENV} or import weights first)",
            path.display()
        )));
    }
    let tensors = candle_core::safetensors::load(path, &Device::Cpu)
        .map_err(|e| Error::Initialization(format!("{}: {e}", path.display())))?;
    let data = varmap.data().lock().expect("varmap lock");
    let lead = format!("{prefix}.");
    for (name, var) in data.iter() {
        let Some(key) = name.strip_prefix(&lead) else {
            continue;
        };
        let src = tensors
            .get(key)
            .ok_or_else(|| Error::Initialization(format!("{}: tensor `{key}` missing", path.display())))?;
        if src.dims() != var.dims() {
            return Err(Error::Initialization(format!(
                "{}: tensor `{key}` has shape {:?}, expected {:?}",
                path.display(),
                src.dims(),
                var.dims()
            )));
        }
        var.set(&src.to_dtype(var.dtype())?)?;
    }
    Ok(())
}

/// Deterministic He-normal (convolutions) / Glorot-uniform (dense)
/// initialization. Biases are zeroed; other vectors keep their constant
/// defaults (norm gain 1, running statistics 0/1). Each tensor draws from its
/// own stream keyed by name.
pub fn seeded_init(varmap: &VarMap, prefix: &str, seed: u64) -> Result<()> {
    let data = varmap.data().lock().expect("varmap lock");
    let lead = format!("{prefix}.");
    let mut names: Vec<&String> = data.keys().filter(|n| n.starts_with(&lead)).collect();
    names.sort();
    for name in names {
        let var = &data[name];
        let dims = var.dims().to_vec();
        let values: Vec<f64> = match dims.as_slice() {
            [_, c_in, kh, kw] => {
                let std = (2.0 / (c_in * kh * kw) as f64).sqrt();
                let mut rng = rng_for(seed, &["init", name]);
                (0..var.elem_count())
                    .map(|_| std * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect()
            }
            [out, inp] => {
                let limit = (6.0 / (out + inp) as f64).sqrt();
                let mut rng = rng_for(seed, &["init", name]);
                (0..var.elem_count()).map(|_| rng.random_range(-limit..limit)).collect()
            }
            [n] if name.ends_with(".bias") => vec![0.0; *n],
            _ => continue,
        };
        let t = Tensor::from_vec(values, dims.as_slice(), &Device::Cpu)?.to_dtype(var.dtype())?;
        var.set(&t)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    /// Learnable parameters.
    pub trainable: usize,
    /// Normalization running statistics.
    pub buffers: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.trainable + self.buffers
    }
}

pub fn is_buffer(name: &str) -> bool {
    name.ends_with("running_mean") || name.ends_with("running_var")
}

pub fn count_params(varmap: &VarMap, prefix: &str) -> ParamCount {
    let data = varmap.data().lock().expect("varmap lock");
    let lead = format!("{prefix}.");
    let mut count = ParamCount::default();
    for (name, var) in data.iter().filter(|(n, _)| n.starts_with(&lead)) {
        if is_buffer(name) {
            count.buffers += var.elem_count();
        } else {
            count.trainable += var.elem_count();
        }
    }
    count
}

/// Parameter count of an architecture, built in a scratch varmap.
pub fn architecture_params(spec: &BackboneSpec) -> Result<ParamCount> {
    let varmap = VarMap::new();
    let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
    Backbone::build(spec, vb.pp("backbone"))?;
    Ok(count_params(&varmap, "backbone"))
}

/// Checks that a weight file provides every tensor the architecture needs,
/// with matching shapes. Returns the number of tensors matched.
pub fn validate_weights_file(spec: &BackboneSpec, path: &Path) -> Result<usize> {
    let varmap = VarMap::new();
    let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
    Backbone::build(spec, vb.pp("backbone"))?;
    load_pretrained(&varmap, "backbone", path)?;
    let count = varmap.data().lock().expect("varmap lock").len();
    Ok(count)
}

/// Tensor names and shapes expected in a weight file for `spec`.
pub fn expected_tensors(spec: &BackboneSpec) -> Result<HashMap<String, Vec<usize>>> {
    let varmap = VarMap::new();
    let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
    Backbone::build(spec, vb.pp("backbone"))?;
    let data = varmap.data().lock().expect("varmap lock");
    Ok(data
        .iter()
        .map(|(k, v)| (k.trim_start_matches("backbone.").to_string(), v.dims().to_vec()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(h: usize, w: usize, rgb: [f32; 3]) -> ImageTensor {
        ImageTensor::filled(h, w, rgb)
    }

    #[test]
    fn zero_image_maps_to_negated_means() {
        let out = preprocess(&image(2, 2, [0.0; 3]), PreprocessMode::BgrZeroCenter).unwrap();
        assert_eq!(out.color_order, ColorOrder::Bgr);
        assert!(out.centered);
        for px in out.data().chunks_exact(3) {
            assert_eq!(px, [-103.939, -116.779, -123.68]);
        }
    }

    #[test]
    fn mean_image_is_fixed_point() {
        let mean_rgb = [IMAGENET_BGR_MEAN[2], IMAGENET_BGR_MEAN[1], IMAGENET_BGR_MEAN[0]];
        let out = preprocess(&image(3, 3, mean_rgb), PreprocessMode::BgrZeroCenter).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_arithmetic() {
        let out = preprocess(&image(1, 1, [10.0, 20.0, 30.0]), PreprocessMode::BgrZeroCenter).unwrap();
        assert_eq!(out.data(), [30.0 - 103.939, 20.0 - 116.779, 10.0 - 123.68]);
    }

    #[test]
    fn rejects_out_of_range_and_double_preprocessing() {
        let bad = image(1, 1, [256.0, 0.0, 0.0]);
        assert!(matches!(preprocess(&bad, PreprocessMode::BgrZeroCenter), Err(Error::Domain(_))));
        let once = preprocess(&image(1, 1, [1.0; 3]), PreprocessMode::BgrZeroCenter).unwrap();
        assert!(preprocess(&once, PreprocessMode::BgrZeroCenter).is_err());
    }

    #[test]
    fn signed_unit_mode() {
        let out = preprocess(&image(1, 1, [0.0, 127.5, 255.0]), PreprocessMode::ScaleSignedUnit).unwrap();
        assert_eq!(out.data(), [-1.0, 0.0, 1.0]);
        assert_eq!(out.color_order, ColorOrder::Rgb);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("ResNet-50".parse::<BackboneKind>().unwrap(), BackboneKind::Resnet50);
        assert_eq!("mobilenet_v2".parse::<BackboneKind>().unwrap(), BackboneKind::Mobilenetv2);
        assert!("vgg16".parse::<BackboneKind>().is_err());
    }

    #[test]
    fn missing_weights_is_an_initialization_error() {
        let dir = std::env::temp_dir().join("rpca-no-weights-here");
        let spec = BackboneSpec::new(BackboneKind::TinyConv);
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
        Backbone::build(&spec, vb.pp("backbone")).unwrap();
        let err = initialize(&varmap, "backbone", spec.name, &BackboneInit::Pretrained { dir }).unwrap_err();
        assert!(matches!(err, Error::Initialization(_)), "{err}");
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let spec = BackboneSpec::new(BackboneKind::TinyConv);
        let dump = |seed| {
            let varmap = VarMap::new();
            let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
            Backbone::build(&spec, vb.pp("backbone")).unwrap();
            seeded_init(&varmap, "backbone", seed).unwrap();
            let data = varmap.data().lock().unwrap();
            data["backbone.conv.weight"].flatten_all().unwrap().to_vec1::<f32>().unwrap()
        };
        assert_eq!(dump(3), dump(3));
        assert_ne!(dump(3), dump(4));
    }

    #[test]
    fn wrong_input_side_is_a_shape_error() {
        let spec = BackboneSpec::new(BackboneKind::TinyConv);
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
        let bb = Backbone::build(&spec, vb.pp("backbone")).unwrap();
        let img = preprocess(&image(200, 200, [1.0; 3]), spec.preprocessing).unwrap();
        assert!(matches!(bb.extract_features(&[img], false, DType::F32), Err(Error::Shape(_))));
    }
}
