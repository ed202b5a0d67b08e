use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_metrics::{cosine_similarity, embedding_rmse};
use crate::image_metrics::{mae, mean_ssim, rmse, SsimParams};
use crate::io::ImageBundle;
use crate::segmentation::{asd_binary, asd_multiclass, dice_binary, dice_multiclass};
use crate::volume::{zscore_normalize, EmbeddingVector, SegmentationMask, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Mae,
    Rmse,
    Ssim,
    EmbRmse,
    EmbCosine,
    DiceBinary,
    DiceMulticlass,
    AsdBinary,
    AsdMulticlass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Image,
    Feature,
    Segmentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Distance,
    Similarity,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 9] = [
        MeasureKind::Mae,
        MeasureKind::Rmse,
        MeasureKind::Ssim,
        MeasureKind::EmbRmse,
        MeasureKind::EmbCosine,
        MeasureKind::DiceBinary,
        MeasureKind::DiceMulticlass,
        MeasureKind::AsdBinary,
        MeasureKind::AsdMulticlass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Mae => "mae",
            MeasureKind::Rmse => "rmse",
            MeasureKind::Ssim => "ssim",
            MeasureKind::EmbRmse => "emb_rmse",
            MeasureKind::EmbCosine => "emb_cosine",
            MeasureKind::DiceBinary => "dice_binary",
            MeasureKind::DiceMulticlass => "dice_multiclass",
            MeasureKind::AsdBinary => "asd_binary",
            MeasureKind::AsdMulticlass => "asd_multiclass",
        }
    }

    pub fn level(self) -> Level {
        match self {
            MeasureKind::Mae | MeasureKind::Rmse | MeasureKind::Ssim => Level::Image,
            MeasureKind::EmbRmse | MeasureKind::EmbCosine => Level::Feature,
            _ => Level::Segmentation,
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            MeasureKind::Ssim
            | MeasureKind::EmbCosine
            | MeasureKind::DiceBinary
            | MeasureKind::DiceMulticlass => Polarity::Similarity,
            _ => Polarity::Distance,
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown measure '{s}'")))
    }
}

fn default_label() -> u32 {
    1
}

/// Measure-specific settings; fields irrelevant to a measure are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    #[serde(flatten)]
    pub ssim: SsimParams,
    /// Label compared by the binary segmentation measures.
    #[serde(default = "default_label")]
    pub label: u32,
    /// Z-score both volumes before image-level comparison.
    #[serde(default)]
    pub normalize: bool,
}

impl Default for MeasureParams {
    fn default() -> Self {
        Self {
            ssim: SsimParams::default(),
            label: 1,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub name: MeasureKind,
    #[serde(default)]
    pub params: MeasureParams,
}

impl MeasureSpec {
    pub fn new(name: MeasureKind) -> Self {
        Self {
            name,
            params: MeasureParams::default(),
        }
    }

    pub fn level(&self) -> Level {
        self.name.level()
    }

    pub fn polarity(&self) -> Polarity {
        self.name.polarity()
    }

    /// Whether the image-level inputs should be z-scored first.
    pub fn normalizes(&self) -> bool {
        self.level() == Level::Image && self.params.normalize
    }

    /// Raw measure value between a synthetic and a training image.
    pub fn evaluate(&self, synthetic: &ImageBundle, training: &ImageBundle) -> Result<f64> {
        match self.level() {
            Level::Image => {
                let a = volume_of(synthetic)?;
                let b = volume_of(training)?;
                if self.params.normalize {
                    let (a, _) = zscore_normalize(a)?;
                    let (b, _) = zscore_normalize(b)?;
                    self.evaluate_volumes(&a, &b)
                } else {
                    self.evaluate_volumes(a, b)
                }
            }
            Level::Feature => {
                let a = embedding_of(synthetic)?;
                let b = embedding_of(training)?;
                match self.name {
                    MeasureKind::EmbRmse => embedding_rmse(a, b),
                    _ => cosine_similarity(a, b),
                }
            }
            Level::Segmentation => {
                let a = mask_of(synthetic)?;
                let b = mask_of(training)?;
                match self.name {
                    MeasureKind::DiceBinary => dice_binary(a, b, self.params.label),
                    MeasureKind::DiceMulticlass => dice_multiclass(a, b),
                    MeasureKind::AsdBinary => asd_binary(a, b, self.params.label),
                    _ => asd_multiclass(a, b),
                }
            }
        }
    }

    /// Image-level measure on volumes already prepared by the caller
    /// (normalization is not applied here).
    pub fn evaluate_volumes(&self, a: &Volume3D, b: &Volume3D) -> Result<f64> {
        match self.name {
            MeasureKind::Mae => mae(a, b),
            MeasureKind::Rmse => rmse(a, b),
            MeasureKind::Ssim => mean_ssim(a, b, &self.params.ssim),
            other => Err(Error::Data(format!("{other} is not an image-level measure"))),
        }
    }

    pub fn to_distance(&self, raw: f64) -> Result<f64> {
        to_distance(raw, self.name)
    }
}

fn volume_of(b: &ImageBundle) -> Result<&Volume3D> {
    b.volume.as_ref().ok_or_else(|| Error::Input {
        id: b.id.clone(),
        reason: "image-level measure needs a volume".into(),
    })
}

fn embedding_of(b: &ImageBundle) -> Result<&EmbeddingVector> {
    b.embedding.as_ref().ok_or_else(|| Error::Input {
        id: b.id.clone(),
        reason: "feature-level measure needs an embedding or feature map".into(),
    })
}

fn mask_of(b: &ImageBundle) -> Result<&SegmentationMask> {
    b.mask.as_ref().ok_or_else(|| Error::Input {
        id: b.id.clone(),
        reason: "segmentation-level measure needs a mask".into(),
    })
}

/// Map a raw measure value onto a distance in `[0, ∞)`.
///
/// Distances pass through. Dice becomes `1 - dice`; SSIM and cosine
/// similarity live on `[-1, 1]` and are first rescaled to `[0, 1]`, giving
/// `(1 - raw) / 2`.
pub fn to_distance(raw: f64, kind: MeasureKind) -> Result<f64> {
    let out_of_range = || Error::Range {
        measure: kind.name().to_string(),
        value: raw,
    };
    if !raw.is_finite() {
        return Err(out_of_range());
    }
    match kind {
        MeasureKind::DiceBinary | MeasureKind::DiceMulticlass => {
            if !(0.0..=1.0).contains(&raw) {
                return Err(out_of_range());
            }
            Ok(1.0 - raw)
        }
        MeasureKind::Ssim | MeasureKind::EmbCosine => {
            if !(-1.0..=1.0).contains(&raw) {
                return Err(out_of_range());
            }
            Ok((1.0 - raw) / 2.0)
        }
        _ => {
            if raw < 0.0 {
                return Err(out_of_range());
            }
            Ok(raw)
        }
    }
}
