//! In-memory image types.
//!
//! All grids store voxels with x fastest: the flat index of `(x, y, z)` is
//! `x + nx * (y + ny * z)`, which is also the on-disk order of NIfTI-1.
//! Feature maps are channel-major with the last spatial axis fastest.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat offset of `(x, y, z)` in a grid of `dims`.
#[inline]
pub fn flat_index(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

fn check_grid(id: &str, dims: [usize; 3], spacing: [f64; 3], len: usize) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::Dimension(format!("{id}: dims {dims:?} must be positive")));
    }
    let expected = dims[0] * dims[1] * dims[2];
    if expected != len {
        return Err(Error::Dimension(format!(
            "{id}: dims {dims:?} need {expected} voxels, got {len}"
        )));
    }
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Data(format!("{id}: spacing {spacing:?} must be positive")));
    }
    Ok(())
}

/// A scalar 3D image.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    id: String,
    dims: [usize; 3],
    spacing: [f64; 3],
    voxels: Vec<f64>,
}

impl Volume3D {
    pub fn new(
        id: impl Into<String>,
        dims: [usize; 3],
        spacing: [f64; 3],
        voxels: Vec<f64>,
    ) -> Result<Self> {
        let id = id.into();
        check_grid(&id, dims, spacing, voxels.len())?;
        if let Some(pos) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{id}: non-finite voxel at offset {pos}")));
        }
        Ok(Self {
            id,
            dims,
            spacing,
            voxels,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn voxels(&self) -> &[f64] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[flat_index(self.dims, x, y, z)]
    }

    /// `(min, max)` of the voxel values.
    pub fn intensity_range(&self) -> (f64, f64) {
        self.voxels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Same geometry, new voxel values.
    pub fn with_voxels(&self, voxels: Vec<f64>) -> Result<Self> {
        Self::new(self.id.clone(), self.dims, self.spacing, voxels)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn into_voxels(self) -> Vec<f64> {
        self.voxels
    }
}

/// Emitted when z-score normalization meets a constant volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationWarning {
    pub id: String,
    pub message: String,
}

/// Subtract the mean and divide by the population standard deviation.
///
/// A constant volume has no spread to divide by; it maps to all zeros and a
/// warning is returned alongside so degenerate images still flow through
/// the pipeline.
pub fn zscore_normalize(v: &Volume3D) -> Result<(Volume3D, Option<NormalizationWarning>)> {
    if v.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "{}: z-score needs at least 2 voxels",
            v.id()
        )));
    }
    let n = v.len() as f64;
    let mean = v.voxels().iter().sum::<f64>() / n;
    let var = v.voxels().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        let warning = NormalizationWarning {
            id: v.id().to_string(),
            message: "constant volume, z-score output set to zeros".to_string(),
        };
        log::warn!("{}: {}", warning.id, warning.message);
        return Ok((v.with_voxels(vec![0.0; v.len()])?, Some(warning)));
    }
    let out = v.voxels().iter().map(|x| (x - mean) / std).collect();
    Ok((v.with_voxels(out)?, None))
}

/// An integer label grid aligned to a volume. Label 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    id: String,
    dims: [usize; 3],
    spacing: [f64; 3],
    labels: Vec<u32>,
    label_set: Vec<u32>,
}

impl SegmentationMask {
    pub fn new(
        id: impl Into<String>,
        dims: [usize; 3],
        spacing: [f64; 3],
        labels: Vec<u32>,
    ) -> Result<Self> {
        let id = id.into();
        check_grid(&id, dims, spacing, labels.len())?;
        let label_set: BTreeSet<u32> = labels.iter().copied().filter(|&l| l != 0).collect();
        Ok(Self {
            id,
            dims,
            spacing,
            labels,
            label_set: label_set.into_iter().collect(),
        })
    }

    /// Build from real-valued voxels, which must be non-negative integers.
    pub fn from_volume(v: &Volume3D) -> Result<Self> {
        let labels = v
            .voxels()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
                    Err(Error::Data(format!(
                        "{}: voxel {i} holds {x}, not a non-negative integer label",
                        v.id()
                    )))
                } else {
                    Ok(x as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(v.id(), v.dims(), v.spacing(), labels)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Sorted distinct nonzero labels.
    pub fn label_set(&self) -> &[u32] {
        &self.label_set
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.labels[flat_index(self.dims, x, y, z)]
    }

    pub fn with_spacing(&self, spacing: [f64; 3]) -> Result<Self> {
        Self::new(self.id.clone(), self.dims, spacing, self.labels.clone())
    }
}

/// A flattened feature representation of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    id: String,
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::Dimension(format!("{id}: embedding must be non-empty")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{id}: non-finite embedding value at {pos}")));
        }
        Ok(Self { id, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Encoder output `(C, d, h, w)`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap4D {
    id: String,
    channels: usize,
    dims: [usize; 3],
    values: Vec<f64>,
}

impl FeatureMap4D {
    pub fn new(
        id: impl Into<String>,
        channels: usize,
        dims: [usize; 3],
        values: Vec<f64>,
    ) -> Result<Self> {
        let id = id.into();
        if channels == 0 || dims.contains(&0) {
            return Err(Error::Dimension(format!(
                "{id}: feature map shape ({channels}, {dims:?}) must be positive"
            )));
        }
        let expected = channels * dims[0] * dims[1] * dims[2];
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "{id}: shape ({channels}, {dims:?}) needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{id}: non-finite feature value at {pos}")));
        }
        Ok(Self {
            id,
            channels,
            dims,
            values,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, c: usize, i: usize, j: usize, k: usize) -> usize {
        ((c * self.dims[0] + i) * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn get(&self, c: usize, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(c, i, j, k)]
    }
}
