//! Training-time augmentation and the deterministic evaluation transform.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Border, ImageTensor};
use crate::seed::rng_for;

pub const SOURCE_SIDE: usize = 256;
pub const CROP_SIDE: usize = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Rotation, zoom and crop.
    #[default]
    Basic,
    /// Basic plus random horizontal flip and Gaussian blur.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizePolicy {
    /// Stretch to `source_side`×`source_side`.
    #[default]
    Direct,
    /// Keep the aspect ratio and pad with mid-gray.
    Pad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurConfig {
    pub kernel_side: usize,
    pub sigma_range: (f32, f32),
    pub prob: f64,
}

impl Default for BlurConfig {
    fn default() -> Self {
        Self {
            kernel_side: 5,
            sigma_range: (0.1, 2.0),
            prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Rotation is uniform in `±rotation_deg`.
    pub rotation_deg: f32,
    /// Isotropic scale factor range.
    pub zoom_range: (f32, f32),
    pub crop_side: usize,
    pub source_side: usize,
    /// Forces the crop window to the center instead of a random offset.
    pub center_crop: bool,
    pub hflip_prob: f64,
    pub blur: BlurConfig,
    pub regime: Regime,
    pub resize: ResizePolicy,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation_deg: 25.0,
            zoom_range: (0.75, 1.25),
            crop_side: CROP_SIDE,
            source_side: SOURCE_SIDE,
            center_crop: false,
            hflip_prob: 0.5,
            blur: BlurConfig::default(),
            regime: Regime::Basic,
            resize: ResizePolicy::Direct,
        }
    }
}

impl AugmentConfig {
    pub fn for_regime(regime: Regime) -> Self {
        Self {
            regime,
            ..Self::default()
        }
    }

    /// No geometric or photometric change: a center crop only.
    pub fn identity() -> Self {
        Self {
            rotation_deg: 0.0,
            zoom_range: (1.0, 1.0),
            center_crop: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.crop_side == 0 || self.crop_side > self.source_side {
            return Err(Error::Config(format!(
                "crop side {} must be in 1..={}",
                self.crop_side, self.source_side
            )));
        }
        let (z0, z1) = self.zoom_range;
        if !(z0 > 0.0 && z0 <= z1) {
            return Err(Error::Config(format!("zoom range ({z0}, {z1}) must be positive and ordered")));
        }
        if !(self.rotation_deg >= 0.0) {
            return Err(Error::Config("rotation range must be non-negative".into()));
        }
        let (s0, s1) = self.blur.sigma_range;
        if self.blur.kernel_side % 2 == 0 || !(s0 > 0.0 && s0 <= s1) {
            return Err(Error::Config("blur needs an odd kernel and a positive sigma range".into()));
        }
        for p in [self.hflip_prob, self.blur.prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn flip_enabled(&self) -> bool {
        self.regime == Regime::Extended && self.hflip_prob > 0.0
    }

    pub fn blur_enabled(&self) -> bool {
        self.regime == Regime::Extended && self.blur.prob > 0.0
    }
}

/// Resizes a decoded image to the augmentation source size.
pub fn resize_to_source(image: &ImageTensor, side: usize, policy: ResizePolicy) -> Result<ImageTensor> {
    match policy {
        ResizePolicy::Direct => image.resize(side, side),
        ResizePolicy::Pad => image.resize_pad(side, 127.5),
    }
}

/// Random rotation, zoom and crop (plus flip and blur in the extended
/// regime), fully determined by `rng_seed`. Rotation and zoom are one
/// inverse-affine resampling about the image center with reflected borders.
pub fn augment(image: &ImageTensor, config: &AugmentConfig, rng_seed: u64) -> Result<ImageTensor> {
    config.validate()?;
    let side = config.source_side;
    if image.height() < side || image.width() < side {
        return Err(Error::Shape(format!(
            "augment expects at least {side}x{side}, got {}x{}",
            image.height(),
            image.width()
        )));
    }
    let source;
    let image = if image.height() != side || image.width() != side {
        source = resize_to_source(image, side, config.resize)?;
        &source
    } else {
        image
    };

    // Draw order is fixed so every seed maps to one parameter set whatever
    // the regime.
    let mut rng = rng_for(rng_seed, &["augment"]);
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let angle = uniform(-config.rotation_deg as f64, config.rotation_deg as f64).to_radians();
    let zoom = uniform(config.zoom_range.0 as f64, config.zoom_range.1 as f64);
    let slack = (side - config.crop_side) as f64;
    let (top, left) = if config.center_crop {
        ((side - config.crop_side) / 2, (side - config.crop_side) / 2)
    } else {
        let t = (uniform(0.0, slack + 1.0).floor() as usize).min(side - config.crop_side);
        let l = (uniform(0.0, slack + 1.0).floor() as usize).min(side - config.crop_side);
        (t, l)
    };
    let flip_draw = uniform(0.0, 1.0);
    let blur_draw = uniform(0.0, 1.0);
    let sigma = uniform(config.blur.sigma_range.0 as f64, config.blur.sigma_range.1 as f64);

    let crop = config.crop_side;
    let mut out = if angle == 0.0 && zoom == 1.0 {
        image.crop(top, left, crop, crop)?
    } else {
        let mut data = vec![0.0f32; crop * crop * 3];
        let center = side as f64 / 2.0;
        let (sin, cos) = angle.sin_cos();
        for y in 0..crop {
            let dy = (top + y) as f64 + 0.5 - center;
            for x in 0..crop {
                let dx = (left + x) as f64 + 0.5 - center;
                // Inverse map: rotate by -angle, then undo the zoom.
                let sx = (cos * dx + sin * dy) / zoom + center - 0.5;
                let sy = (-sin * dx + cos * dy) / zoom + center - 0.5;
                let px = image.sample(sy as f32, sx as f32, Border::Reflect);
                data[(y * crop + x) * 3..(y * crop + x) * 3 + 3].copy_from_slice(&px);
            }
        }
        ImageTensor::new(crop, crop, data)?
    };

    if config.flip_enabled() && flip_draw < config.hflip_prob {
        out = out.hflip();
    }
    if config.blur_enabled() && blur_draw < config.blur.prob {
        out = gaussian_blur(&out, config.blur.kernel_side, sigma as f32);
    }
    for v in out.data_mut() {
        *v = v.clamp(0.0, 255.0);
    }
    Ok(out)
}

/// Normalized separable Gaussian kernel.
pub fn gaussian_kernel(side: usize, sigma: f32) -> Vec<f32> {
    let r = (side / 2) as f32;
    let mut k: Vec<f32> = (0..side)
        .map(|i| {
            let d = i as f32 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with reflected borders.
pub fn gaussian_blur(image: &ImageTensor, side: usize, sigma: f32) -> ImageTensor {
    let k = gaussian_kernel(side, sigma);
    let r = (side / 2) as isize;
    let (h, w) = (image.height(), image.width());
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let m = i.rem_euclid(2 * n);
        (if m < n { m } else { 2 * n - 1 - m }) as usize
    };
    let mut tmp = image.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (t, kv) in k.iter().enumerate() {
                    acc += kv * image.get(y, reflect(x as isize + t as isize - r, w), c);
                }
                tmp.set(y, x, c, acc);
            }
        }
    }
    let mut out = tmp.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (t, kv) in k.iter().enumerate() {
                    acc += kv * tmp.get(reflect(y as isize + t as isize - r, h), x, c);
                }
                out.set(y, x, c, acc);
            }
        }
    }
    out
}

/// Direct resize to 256×256, then the central 224×224 window.
pub fn eval_transform(image: &ImageTensor) -> Result<ImageTensor> {
    eval_transform_with(image, SOURCE_SIDE, CROP_SIDE, ResizePolicy::Direct)
}

pub fn eval_transform_with(
    image: &ImageTensor,
    source_side: usize,
    crop_side: usize,
    policy: ResizePolicy,
) -> Result<ImageTensor> {
    if crop_side > source_side {
        return Err(Error::Config(format!("crop {crop_side} larger than source {source_side}")));
    }
    let resized = resize_to_source(image, source_side, policy)?;
    let off = (source_side - crop_side) / 2;
    resized.crop(off, off, crop_side, crop_side)
}
