//! Grad-CAM heatmaps over the backbone's last convolutional map.

use std::io::Cursor;

use candle_core::{DType, IndexOp, Var};
use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::{resize_map, UpsampleMode};
use crate::imaging::ImageTensor;
use crate::metrics::argmax;
use crate::train::Model;

pub const DEFAULT_ALPHA: f32 = 0.4;

/// H×W map in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
    pub target_class: usize,
    pub predicted_class: usize,
    /// Set when no location had a positive gradient-weighted activation.
    pub all_zero: bool,
}

impl Heatmap {
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let i = argmax(&self.data);
        (i / self.width, i % self.width)
    }
}

/// Grad-CAM for one transformed RGB image. `target_class` defaults to the
/// predicted class.
///
/// The channel weights are the spatial means of the target logit's gradient
/// with respect to the backbone map `A`; the raw map `ReLU(Σ_k α_k A_k)` is
/// resized bilinearly (corner-aligned) to the image and min-max normalized.
pub fn gradcam(model: &Model, image: &ImageTensor, target_class: Option<usize>) -> Result<Heatmap> {
    if !model.backbone().has_spatial_map() {
        return Err(Error::UnsupportedModel(format!(
            "backbone `{}` has no convolutional feature map",
            model.variant().backbone.name
        )));
    }
    let xs = model.input_tensor(std::slice::from_ref(image))?;
    let features = model.features(&xs, false, false)?;
    let a = Var::from_tensor(&features)?;
    let logits = model.head_logits(a.as_tensor(), false, 0)?;
    let row = logits.i(0)?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    let predicted_class = argmax(&row);
    let target = target_class.unwrap_or(predicted_class);
    if target >= row.len() {
        return Err(Error::Parameter(format!("class {target} outside {} classes", row.len())));
    }
    let grads = logits.i((0, target))?.backward()?;
    let grad = match grads.get(a.as_tensor()) {
        Some(g) => g.clone(),
        None => a.zeros_like()?,
    };
    let alpha = grad.mean_keepdim(3)?.mean_keepdim(2)?;
    let raw = a.as_tensor().broadcast_mul(&alpha)?.sum_keepdim(1)?.relu()?;
    let up = resize_map(&raw, image.height(), image.width(), UpsampleMode::Bilinear)?;
    let values = up.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    let (data, all_zero) = min_max_normalize(&values);
    Ok(Heatmap {
        height: image.height(),
        width: image.width(),
        data,
        target_class: target,
        predicted_class,
        all_zero,
    })
}

/// `(v - min) / (max - min)`; a map with no positive value stays all zero
/// and is flagged.
pub fn min_max_normalize(values: &[f64]) -> (Vec<f64>, bool) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) {
        return (vec![0.0; values.len()], true);
    }
    if max == min {
        return (vec![1.0; values.len()], false);
    }
    (values.iter().map(|v| (v - min) / (max - min)).collect(), false)
}

/// Jet colormap: blue at 0, through cyan, yellow, to red at 1.
pub fn jet(v: f64) -> [f32; 3] {
    let v = v.clamp(0.0, 1.0);
    let ch = |c: f64| ((1.5 - (4.0 * v - c).abs()).clamp(0.0, 1.0) * 255.0) as f32;
    [ch(3.0), ch(2.0), ch(1.0)]
}

/// The heatmap as a colormapped RGB image.
pub fn colorize(heatmap: &Heatmap) -> ImageTensor {
    let data = heatmap.data.iter().flat_map(|&v| jet(v)).collect();
    ImageTensor::new(heatmap.height, heatmap.width, data).expect("heatmap dimensions")
}

/// Alpha-blends the colormapped heatmap over an RGB image:
/// `(1 - alpha) * image + alpha * jet(heatmap)`.
pub fn overlay(heatmap: &Heatmap, image: &ImageTensor, alpha: f32) -> Result<RgbImage> {
    if heatmap.height != image.height() || heatmap.width != image.width() {
        return Err(Error::Shape(format!(
            "heatmap {}x{} does not match image {}x{}",
            heatmap.height,
            heatmap.width,
            image.height(),
            image.width()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha {alpha} outside [0, 1]")));
    }
    let colors = colorize(heatmap);
    let data = image
        .data()
        .iter()
        .zip(colors.data())
        .map(|(&p, &c)| (1.0 - alpha) * p + alpha * c)
        .collect();
    Ok(ImageTensor::new(image.height(), image.width(), data)?.to_rgb8())
}

pub fn png_bytes(image: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    image.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Figure panel: one row per example, image on the left and overlay on the
/// right.
pub fn panel(rows: &[(ImageTensor, RgbImage)]) -> Result<RgbImage> {
    let (first, _) = rows.first().ok_or_else(|| Error::Shape("empty panel".into()))?;
    let (h, w) = (first.height() as u32, first.width() as u32);
    let mut out = RgbImage::new(2 * w, h * rows.len() as u32);
    for (i, (img, over)) in rows.iter().enumerate() {
        if img.height() as u32 != h || img.width() as u32 != w || over.dimensions() != (w, h) {
            return Err(Error::Shape("panel images must share one size".into()));
        }
        let y0 = i as u32 * h;
        image::imageops::replace(&mut out, &img.to_rgb8(), 0, y0 as i64);
        image::imageops::replace(&mut out, over, w as i64, y0 as i64);
    }
    Ok(out)
}
