//! Procedurally generated image datasets for tests and smoke runs.
//!
//! Each image shows one filled shape on a noisy background; the class is the
//! shape's position (top, bottom, left, right or center). Colors and sizes
//! are random, so position is the only cue.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{build_manifest, DatasetManifest};
use super::split::{stratified_split, SplitPolicy};
use crate::error::{Error, IoContext, Result};
use crate::imaging::ImageTensor;
use crate::seed::rng_for;

/// Class names in sorted order (matches manifest class indices).
pub const POSITION_CLASSES: [&str; 5] = ["bottom", "center", "left", "right", "top"];

fn anchor(class: &str) -> (f32, f32) {
    match class {
        "bottom" => (0.78, 0.5),
        "center" => (0.5, 0.5),
        "left" => (0.5, 0.22),
        "right" => (0.5, 0.78),
        _ => (0.22, 0.5),
    }
}

/// One `side`×`side` image of class `class` drawn from `rng`.
pub fn render_position_image(class: &str, side: usize, rng: &mut ChaCha8Rng) -> ImageTensor {
    let bg: [f32; 3] = [rng.random_range(0.0..110.0), rng.random_range(0.0..110.0), rng.random_range(0.0..110.0)];
    let fg: [f32; 3] = [
        rng.random_range(150.0..255.0),
        rng.random_range(150.0..255.0),
        rng.random_range(150.0..255.0),
    ];
    let (ay, ax) = anchor(class);
    let s = side as f32;
    let cy = (ay + rng.random_range(-0.06..0.06)) * s;
    let cx = (ax + rng.random_range(-0.06..0.06)) * s;
    let radius = rng.random_range(0.12..0.18) * s;
    let disc = rng.random_bool(0.5);
    let mut img = ImageTensor::filled(side, side, bg);
    for y in 0..side {
        for x in 0..side {
            let dy = y as f32 + 0.5 - cy;
            let dx = x as f32 + 0.5 - cx;
            let inside = if disc {
                dy * dy + dx * dx <= radius * radius
            } else {
                dy.abs() <= radius && dx.abs() <= radius
            };
            for c in 0..3 {
                let base = if inside { fg[c] } else { bg[c] };
                let v = base + rng.random_range(-20.0..20.0);
                img.set(y, x, c, v.clamp(0.0, 255.0).round());
            }
        }
    }
    img
}

/// Writes `per_class` PNGs for each of the first `classes` position classes
/// under `<root>/<class>/NNNN.png`. Returns the number of images written.
pub fn write_position_fixture(root: &Path, classes: usize, per_class: usize, side: usize, seed: u64) -> Result<usize> {
    if classes == 0 || classes > POSITION_CLASSES.len() {
        return Err(Error::Parameter(format!(
            "position fixture supports 1..={} classes",
            POSITION_CLASSES.len()
        )));
    }
    let mut written = 0;
    for class in &POSITION_CLASSES[..classes] {
        let dir = root.join(class);
        fs::create_dir_all(&dir).at(&dir)?;
        let mut rng = rng_for(seed, &["fixture", class]);
        for i in 0..per_class {
            let img = render_position_image(class, side, &mut rng);
            let path = dir.join(format!("{i:04}.png"));
            img.to_rgb8().save(&path)?;
            written += 1;
        }
    }
    Ok(written)
}

/// Writes the position fixture and splits it per class into `train` and
/// `test` images (no validation split).
pub fn position_fixture_manifest(
    root: &Path,
    classes: usize,
    train: usize,
    test: usize,
    side: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    write_position_fixture(root, classes, train + test, side, seed)?;
    let manifest = build_manifest(root)?;
    let counts = manifest.classes.iter().map(|c| (c.clone(), train)).collect();
    stratified_split(&manifest, &SplitPolicy::count_table(counts, seed))
}
