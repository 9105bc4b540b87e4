//! The five model variants compared in the ablation grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backbone::BackboneSpec;
use crate::data::Regime;
use crate::error::{Error, Result};
use crate::head::{HeadConfig, RegionSpec, UpsampleMode, GRID_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    /// Backbone, GAP, dense, softmax; no regularization.
    Baseline,
    /// Baseline plus dropout, layer norm and extended augmentation.
    BaselineReg,
    /// Upsample, region pooling, dropout, layer norm, dense; no attention.
    RegionsOnly,
    /// Sigmoid gate on the backbone map, then GAP, dropout, layer norm, dense.
    AttentionOnly,
    /// Upsample, region pooling, channel attention, dropout, layer norm, dense.
    Full,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [
        VariantKind::Baseline,
        VariantKind::BaselineReg,
        VariantKind::RegionsOnly,
        VariantKind::AttentionOnly,
        VariantKind::Full,
    ];

    /// Order in which result tables are rendered.
    pub const TABLE_ORDER: [VariantKind; 5] = [
        VariantKind::Baseline,
        VariantKind::BaselineReg,
        VariantKind::Full,
        VariantKind::RegionsOnly,
        VariantKind::AttentionOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Baseline => "baseline",
            VariantKind::BaselineReg => "baseline_reg",
            VariantKind::RegionsOnly => "regions_only",
            VariantKind::AttentionOnly => "attention_only",
            VariantKind::Full => "full",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            VariantKind::Baseline => "Baseline",
            VariantKind::BaselineReg => "Baseline with augmentation and regularization",
            VariantKind::RegionsOnly => "Region pooling without attention",
            VariantKind::AttentionOnly => "Channel attention without region pooling",
            VariantKind::Full => "Region pooling with channel attention",
        }
    }

    pub fn uses_regions(self) -> bool {
        matches!(self, VariantKind::RegionsOnly | VariantKind::Full)
    }

    pub fn uses_regularization(self) -> bool {
        self != VariantKind::Baseline
    }

    pub fn default_regime(self) -> Regime {
        match self {
            VariantKind::Baseline => Regime::Basic,
            _ => Regime::Extended,
        }
    }

    pub fn table_rank(self) -> usize {
        Self::TABLE_ORDER.iter().position(|&k| k == self).expect("listed")
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadSettings {
    pub dropout: f64,
    pub hidden: Option<usize>,
    pub upsample: UpsampleMode,
    pub grid_side: usize,
}

impl Default for HeadSettings {
    fn default() -> Self {
        Self {
            dropout: 0.5,
            hidden: None,
            upsample: UpsampleMode::Bilinear,
            grid_side: GRID_SIDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVariant {
    pub kind: VariantKind,
    pub backbone: BackboneSpec,
    /// Only meaningful for region-pooling variants; defaults to the four
    /// halves of the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionSpec>,
    #[serde(default)]
    pub head: HeadSettings,
}

impl ModelVariant {
    pub fn new(kind: VariantKind, backbone: BackboneSpec) -> Self {
        Self {
            kind,
            backbone,
            regions: None,
            head: HeadSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_some() && !self.kind.uses_regions() {
            return Err(Error::Config(format!("variant `{}` does not take regions", self.kind)));
        }
        if !(0.0..1.0).contains(&self.head.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.head.dropout)));
        }
        if self.head.grid_side == 0 {
            return Err(Error::Config("grid side must be positive".into()));
        }
        if let Some(spec) = self.effective_regions() {
            spec.validate(self.head.grid_side, self.head.grid_side)?;
        }
        Ok(())
    }

    pub fn effective_regions(&self) -> Option<RegionSpec> {
        self.kind
            .uses_regions()
            .then(|| self.regions.clone().unwrap_or_else(|| RegionSpec::halves(self.head.grid_side)))
    }

    pub fn head_config(&self, num_classes: usize) -> HeadConfig {
        let reg = self.kind.uses_regularization();
        HeadConfig {
            num_regions: self.effective_regions().map_or(1, |r| r.len()),
            channels: self.backbone.feature_channels,
            num_classes,
            dropout: (reg && self.head.dropout > 0.0).then_some(self.head.dropout),
            layer_norm: reg,
            hidden: self.head.hidden,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::BackboneKind;

    #[test]
    fn regions_rejected_where_unused() {
        for kind in [VariantKind::Baseline, VariantKind::BaselineReg, VariantKind::AttentionOnly] {
            let mut v = ModelVariant::new(kind, BackboneSpec::new(BackboneKind::Resnet50));
            v.regions = Some(RegionSpec::default());
            assert!(matches!(v.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn names_parse() {
        for k in VariantKind::ALL {
            assert_eq!(k.name().parse::<VariantKind>().unwrap(), k);
        }
        assert_eq!("baseline-reg".parse::<VariantKind>().unwrap(), VariantKind::BaselineReg);
    }
}
