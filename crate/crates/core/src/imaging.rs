//! Decoded images as real-valued H×W×3 arrays.

use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorOrder {
    Rgb,
    Bgr,
}

/// Interleaved H×W×3 image with real-valued samples.
///
/// Before preprocessing the samples are RGB in `[0, 255]`; after
/// preprocessing they are reordered and centered (see `backbone::preprocess`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
    pub color_order: ColorOrder,
    pub centered: bool,
}

/// How samples outside the image are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    /// `d c b a | a b c d | d c b a`
    Reflect,
    Clamp,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width * 3 {
            return Err(Error::Shape(format!(
                "expected {} samples for a {height}x{width}x3 image, got {}",
                height * width * 3,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
            color_order: ColorOrder::Rgb,
            centered: false,
        })
    }

    /// Builds an image from a channel count and samples, rejecting anything
    /// that is not three-channel.
    pub fn from_channels(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 3 {
            return Err(Error::Shape(format!("expected 3 channels, got {channels}")));
        }
        Self::new(height, width, data)
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Self {
            height,
            width,
            data,
            color_order: ColorOrder::Rgb,
            centered: false,
        }
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| f32::from(v)).collect();
        Self {
            height: h as usize,
            width: w as usize,
            data,
            color_order: ColorOrder::Rgb,
            centered: false,
        }
    }

    /// Decodes a JPEG/PNG file into an RGB image.
    pub fn open(path: &Path) -> Result<Self> {
        let img = image::ImageReader::open(path)
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?
            .with_guessed_format()
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?
            .decode()
            .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    /// Rounds and clamps to 8-bit RGB. Only meaningful for uncentered images.
    pub fn to_rgb8(&self) -> RgbImage {
        let raw = self
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer size matches")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * 3 + c] = v;
    }

    pub fn value_range(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "crop {height}x{width}+{top}+{left} outside {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width * 3);
        for y in top..top + height {
            let start = (y * self.width + left) * 3;
            data.extend_from_slice(&self.data[start..start + width * 3]);
        }
        Ok(Self {
            height,
            width,
            data,
            ..self.clone_meta()
        })
    }

    pub fn hflip(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                let start = (y * self.width + x) * 3;
                data.extend_from_slice(&self.data[start..start + 3]);
            }
        }
        Self {
            data,
            ..self.clone_meta()
        }
    }

    /// Direct (non-aspect-preserving) bilinear resize with half-pixel
    /// centers; edges clamp.
    pub fn resize(&self, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Parameter(format!("resize target {height}x{width}")));
        }
        if height == self.height && width == self.width {
            return Ok(self.clone());
        }
        let sy = self.height as f32 / height as f32;
        let sx = self.width as f32 / width as f32;
        let mut out = vec![0.0f32; height * width * 3];
        for y in 0..height {
            let fy = (y as f32 + 0.5) * sy - 0.5;
            for x in 0..width {
                let fx = (x as f32 + 0.5) * sx - 0.5;
                let px = self.sample(fy, fx, Border::Clamp);
                out[(y * width + x) * 3..(y * width + x) * 3 + 3].copy_from_slice(&px);
            }
        }
        Ok(Self {
            height,
            width,
            data: out,
            ..self.clone_meta()
        })
    }

    /// Resizes to fit inside `side`×`side` keeping the aspect ratio, then
    /// pads the remainder symmetrically with `fill`.
    pub fn resize_pad(&self, side: usize, fill: f32) -> Result<Self> {
        let scale = side as f32 / self.height.max(self.width) as f32;
        let h = ((self.height as f32 * scale).round() as usize).clamp(1, side);
        let w = ((self.width as f32 * scale).round() as usize).clamp(1, side);
        let inner = self.resize(h, w)?;
        let mut out = Self::filled(side, side, [fill; 3]);
        out.color_order = self.color_order;
        out.centered = self.centered;
        let top = (side - h) / 2;
        let left = (side - w) / 2;
        for y in 0..h {
            let dst = ((top + y) * side + left) * 3;
            let src = y * w * 3;
            out.data[dst..dst + w * 3].copy_from_slice(&inner.data[src..src + w * 3]);
        }
        Ok(out)
    }

    /// Bilinear sample at fractional (row, col).
    #[inline]
    pub fn sample(&self, fy: f32, fx: f32, border: Border) -> [f32; 3] {
        let y0 = fy.floor();
        let x0 = fx.floor();
        let wy = fy - y0;
        let wx = fx - x0;
        let (y0, x0) = (y0 as isize, x0 as isize);
        let ya = resolve(y0, self.height, border);
        let yb = resolve(y0 + 1, self.height, border);
        let xa = resolve(x0, self.width, border);
        let xb = resolve(x0 + 1, self.width, border);
        let mut px = [0.0f32; 3];
        for (c, out) in px.iter_mut().enumerate() {
            let top = self.get(ya, xa, c) * (1.0 - wx) + self.get(ya, xb, c) * wx;
            let bottom = self.get(yb, xa, c) * (1.0 - wx) + self.get(yb, xb, c) * wx;
            *out = top * (1.0 - wy) + bottom * wy;
        }
        px
    }

    /// Channel-planar copy (3×H×W) for tensor construction.
    pub fn to_planar(&self) -> Vec<f32> {
        let plane = self.height * self.width;
        let mut out = vec![0.0f32; plane * 3];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            out[i] = px[0];
            out[plane + i] = px[1];
            out[2 * plane + i] = px[2];
        }
        out
    }

    fn clone_meta(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: Vec::new(),
            color_order: self.color_order,
            centered: self.centered,
        }
    }
}

#[inline]
fn resolve(i: isize, n: usize, border: Border) -> usize {
    let n = n as isize;
    match border {
        Border::Clamp => i.clamp(0, n - 1) as usize,
        Border::Reflect => {
            let period = 2 * n;
            let m = i.rem_euclid(period);
            (if m < n { m } else { period - 1 - m }) as usize
        }
    }
}
