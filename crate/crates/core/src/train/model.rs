//! Backbone plus variant-specific head, with a named parameter registry.

use std::collections::BTreeMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var};
use candle_nn::{VarBuilder, VarMap};
use serde::{Deserialize, Serialize};

use super::variant::{ModelVariant, VariantKind};
use crate::backbone::{self, count_params, is_buffer, Backbone, BackboneInit, ParamCount};
use crate::error::{Error, Result};
use crate::head::{
    channel_attention, global_pool, region_pool, sigmoid_gate, softmax, upsample, HeadParameters, PooledFeatures,
};
use crate::imaging::ImageTensor;
use crate::seed::derive_seed;

pub const BACKBONE_PREFIX: &str = "backbone";
pub const HEAD_PREFIX: &str = "head";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCount {
    pub name: String,
    pub params: usize,
}

/// Parameter counts by component. Normalization running statistics are
/// counted with the backbone, matching the usual published totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterRegistry {
    pub backbone: ParamCount,
    pub head: Vec<ComponentCount>,
}

impl ParameterRegistry {
    pub fn head_total(&self) -> usize {
        self.head.iter().map(|c| c.params).sum()
    }

    pub fn total(&self) -> usize {
        self.backbone.total() + self.head_total()
    }

    pub fn millions(&self) -> f64 {
        self.total() as f64 / 1e6
    }

    pub fn component(&self, name: &str) -> Option<usize> {
        self.head.iter().find(|c| c.name == name).map(|c| c.params)
    }
}

pub struct Model {
    variant: ModelVariant,
    classes: Vec<String>,
    dtype: DType,
    varmap: VarMap,
    backbone: Backbone,
    head: HeadParameters,
}

impl Model {
    /// Builds the variant for `classes`. The backbone is initialized from
    /// `init`; head matrices get a deterministic Glorot draw from
    /// `head_seed` and layer norm starts at gain 1, bias 0.
    pub fn build(
        variant: &ModelVariant,
        classes: Vec<String>,
        init: &BackboneInit,
        head_seed: u64,
        dtype: DType,
    ) -> Result<Self> {
        variant.validate()?;
        if classes.is_empty() {
            return Err(Error::Config("model needs at least one class".into()));
        }
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, dtype, &Device::Cpu);
        let backbone = Backbone::build(&variant.backbone, vb.pp(BACKBONE_PREFIX))?;
        let head = HeadParameters::new(variant.head_config(classes.len()), vb.pp(HEAD_PREFIX))?;
        backbone::initialize(&varmap, BACKBONE_PREFIX, variant.backbone.name, init)?;
        backbone::seeded_init(&varmap, HEAD_PREFIX, head_seed)?;
        Ok(Self {
            variant: variant.clone(),
            classes,
            dtype,
            varmap,
            backbone,
            head,
        })
    }

    pub fn variant(&self) -> &ModelVariant {
        &self.variant
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn varmap(&self) -> &VarMap {
        &self.varmap
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    pub fn head(&self) -> &HeadParameters {
        &self.head
    }

    /// Preprocesses RGB images and stacks them into an N×3×H×W tensor.
    pub fn input_tensor(&self, images: &[ImageTensor]) -> Result<Tensor> {
        let mode = self.variant.backbone.preprocessing;
        let pre = images
            .iter()
            .map(|img| backbone::preprocess(img, mode))
            .collect::<Result<Vec<_>>>()?;
        backbone::images_to_tensor(&pre, &Device::Cpu, self.dtype)
    }

    /// Backbone feature map (N×c×h×w).
    pub fn features(&self, xs: &Tensor, train: bool, trainable_backbone: bool) -> Result<Tensor> {
        if trainable_backbone {
            return self.backbone.forward(xs, train, true);
        }
        Backbone::detached(self.backbone.spec(), &self.varmap, BACKBONE_PREFIX, self.dtype)?.forward(xs, false, false)
    }

    /// Head descriptors for a feature map, composed per variant.
    pub fn descriptors(&self, features: &Tensor) -> Result<PooledFeatures> {
        let grid = self.variant.head.grid_side;
        let mode = self.variant.head.upsample;
        match self.variant.kind {
            VariantKind::Baseline | VariantKind::BaselineReg => global_pool(features),
            VariantKind::AttentionOnly => global_pool(&sigmoid_gate(features)?),
            VariantKind::RegionsOnly => {
                let spec = self.variant.effective_regions().expect("region variant");
                region_pool(&upsample(features, grid, mode)?, &spec)
            }
            VariantKind::Full => {
                let spec = self.variant.effective_regions().expect("region variant");
                channel_attention(&region_pool(&upsample(features, grid, mode)?, &spec)?)
            }
        }
    }

    /// Class logits from a feature map.
    pub fn head_logits(&self, features: &Tensor, train: bool, dropout_seed: u64) -> Result<Tensor> {
        self.head.logits(&self.descriptors(features)?, train, dropout_seed)
    }

    pub fn logits(&self, xs: &Tensor, train: bool, trainable_backbone: bool, dropout_seed: u64) -> Result<Tensor> {
        let features = self.features(xs, train, trainable_backbone)?;
        self.head_logits(&features, train, dropout_seed)
    }

    pub fn probs(&self, xs: &Tensor, train: bool, trainable_backbone: bool, dropout_seed: u64) -> Result<Tensor> {
        softmax(&self.logits(xs, train, trainable_backbone, dropout_seed)?)
    }

    /// Eval-mode class probabilities for transformed RGB images.
    pub fn predict(&self, images: &[ImageTensor]) -> Result<Tensor> {
        let xs = self.input_tensor(images)?;
        self.probs(&xs, false, false, 0)
    }

    pub fn registry(&self) -> ParameterRegistry {
        let cfg = &self.head.config;
        let n = cfg.input_len();
        let k = cfg.num_classes;
        let mut head = vec![
            ComponentCount {
                name: "regions".into(),
                params: 0,
            },
            ComponentCount {
                name: "attention".into(),
                params: 0,
            },
            ComponentCount {
                name: "layernorm".into(),
                params: if cfg.layer_norm { 2 * n } else { 0 },
            },
        ];
        let (hidden, dense) = match cfg.hidden {
            Some(h) => (n * h + h, h * k + k),
            None => (0, n * k + k),
        };
        head.push(ComponentCount {
            name: "hidden".into(),
            params: hidden,
        });
        head.push(ComponentCount {
            name: "dense".into(),
            params: dense,
        });
        ParameterRegistry {
            backbone: count_params(&self.varmap, BACKBONE_PREFIX),
            head,
        }
    }

    /// Parameter count by variable, read from the variable store.
    pub fn stored_counts(&self) -> BTreeMap<String, usize> {
        let data = self.varmap.data().lock().expect("varmap lock");
        data.iter().map(|(k, v)| (k.clone(), v.elem_count())).collect()
    }

    /// Learnable variables sorted by name; backbone ones only if requested.
    pub fn trainable_vars(&self, include_backbone: bool) -> Vec<(String, Var)> {
        let data = self.varmap.data().lock().expect("varmap lock");
        let mut vars: Vec<(String, Var)> = data
            .iter()
            .filter(|(name, _)| !is_buffer(name))
            .filter(|(name, _)| include_backbone || name.starts_with(&format!("{HEAD_PREFIX}.")))
            .map(|(n, v)| (n.clone(), v.clone()))
            .collect();
        vars.sort_by(|a, b| a.0.cmp(&b.0));
        vars
    }

    /// Overwrites one stored variable; the shape must match.
    pub fn set_parameter(&self, name: &str, value: &Tensor) -> Result<()> {
        let data = self.varmap.data().lock().expect("varmap lock");
        let var = data
            .get(name)
            .ok_or_else(|| Error::Parameter(format!("no variable `{name}`")))?;
        if var.dims() != value.dims() {
            return Err(Error::Shape(format!(
                "`{name}` has shape {:?}, got {:?}",
                var.dims(),
                value.dims()
            )));
        }
        var.set(&value.to_dtype(var.dtype())?)?;
        Ok(())
    }

    pub fn save_weights(&self, path: &Path) -> Result<()> {
        Ok(self.varmap.save(path)?)
    }

    pub fn load_weights(&mut self, path: &Path) -> Result<()> {
        Ok(self.varmap.load(path)?)
    }
}

/// Builds the model for `variant` with a head seeded from `seed`.
pub fn build_model(
    variant: &ModelVariant,
    classes: Vec<String>,
    init: &BackboneInit,
    seed: u64,
    dtype: DType,
) -> Result<Model> {
    Model::build(variant, classes, init, derive_seed(seed, &["head"]), dtype)
}
