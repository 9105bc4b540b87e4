//! Epoch-wise batching over one split of a manifest.

use candle_core::{DType, Device, Tensor};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::augment::{augment, eval_transform_with, resize_to_source, AugmentConfig, ResizePolicy, CROP_SIDE, SOURCE_SIDE};
use super::manifest::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::seed::{derive_seed, rng_for};

/// Per-image transform applied after decoding.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Augment(AugmentConfig),
    Eval {
        source_side: usize,
        crop_side: usize,
        resize: ResizePolicy,
    },
}

impl Transform {
    pub fn eval() -> Self {
        Transform::Eval {
            source_side: SOURCE_SIDE,
            crop_side: CROP_SIDE,
            resize: ResizePolicy::Direct,
        }
    }

    /// Eval geometry matching an augmentation config.
    pub fn eval_for(config: &AugmentConfig) -> Self {
        Transform::Eval {
            source_side: config.source_side,
            crop_side: config.crop_side,
            resize: config.resize,
        }
    }

    pub fn apply(&self, image: &ImageTensor, seed: u64) -> Result<ImageTensor> {
        match self {
            Transform::Augment(cfg) => {
                let src = resize_to_source(image, cfg.source_side, cfg.resize)?;
                augment(&src, cfg, seed)
            }
            Transform::Eval {
                source_side,
                crop_side,
                resize,
            } => eval_transform_with(image, *source_side, *crop_side, *resize),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    /// Indices into the manifest's records.
    pub record_ids: Vec<usize>,
    /// Transformed RGB images in `[0, 255]`.
    pub images: Vec<ImageTensor>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn one_hot(&self, num_classes: usize, dtype: DType) -> Result<Tensor> {
        one_hot(&self.labels, num_classes, dtype)
    }
}

/// B×K indicator matrix.
pub fn one_hot(labels: &[usize], num_classes: usize, dtype: DType) -> Result<Tensor> {
    let mut data = vec![0.0f64; labels.len() * num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::Input(format!("label {l} outside {num_classes} classes")));
        }
        data[i * num_classes + l] = 1.0;
    }
    Ok(Tensor::from_vec(data, (labels.len(), num_classes), &Device::Cpu)?.to_dtype(dtype)?)
}

/// Visits every record of a split once per epoch. Training order is
/// shuffled by the epoch seed; other splits keep manifest order. Each
/// record's augmentation stream depends only on (epoch seed, record index),
/// so results do not depend on the worker count.
pub struct BatchIterator<'a> {
    manifest: &'a DatasetManifest,
    order: Vec<usize>,
    batch_size: usize,
    epoch_seed: u64,
    transform: Transform,
    pool: Option<rayon::ThreadPool>,
    pos: usize,
}

impl<'a> BatchIterator<'a> {
    pub fn new(
        manifest: &'a DatasetManifest,
        split: Split,
        batch_size: usize,
        epoch_seed: u64,
        transform: Transform,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let mut order = manifest.split_indices(split);
        if order.is_empty() {
            return Err(Error::Iteration(format!("split `{split}` is empty")));
        }
        if split == Split::Train {
            order.shuffle(&mut rng_for(epoch_seed, &["order"]));
        }
        Ok(Self {
            manifest,
            order,
            batch_size,
            epoch_seed,
            transform,
            pool: None,
            pos: 0,
        })
    }

    /// Decodes and transforms each batch on `workers` threads.
    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            self.pool = Some(pool);
        }
        Ok(self)
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    fn load(&self, id: usize) -> Result<ImageTensor> {
        let record = &self.manifest.records[id];
        let image = ImageTensor::open(&self.manifest.path_of(record))?;
        let seed = derive_seed(self.epoch_seed, &["record", &id.to_string()]);
        self.transform.apply(&image, seed)
    }
}

impl Iterator for BatchIterator<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let ids = self.order[self.pos..end].to_vec();
        self.pos = end;
        let images: Result<Vec<ImageTensor>> = match &self.pool {
            Some(pool) => pool.install(|| ids.par_iter().map(|&id| self.load(id)).collect()),
            None => ids.iter().map(|&id| self.load(id)).collect(),
        };
        Some(images.map(|images| Batch {
            labels: ids.iter().map(|&id| self.manifest.records[id].class_index).collect(),
            record_ids: ids,
            images,
        }))
    }
}

pub fn batch_iterator(
    manifest: &DatasetManifest,
    split: Split,
    batch_size: usize,
    epoch_seed: u64,
    transform: Transform,
) -> Result<BatchIterator<'_>> {
    BatchIterator::new(manifest, split, batch_size, epoch_seed, transform)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_rows() {
        let t = one_hot(&[2, 0], 3, DType::F64).unwrap().to_vec2::<f64>().unwrap();
        assert_eq!(t, vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]);
        assert!(one_hot(&[3], 3, DType::F64).is_err());
    }
}
