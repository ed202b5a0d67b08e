//! Replica detection for synthetic 3D medical images.
//!
//! Each synthetic image is compared against every training image with
//! image-level ([`image_metrics`]), feature-level ([`feature_metrics`]) or
//! segmentation-level ([`segmentation`]) measures. The [`engine`] ranks the
//! training images, scores how unusually close the nearest one is, and
//! applies per-measure thresholds; [`evaluation`] calibrates those
//! thresholds against two-rater reference labels.

pub mod engine;
pub mod error;
pub mod evaluation;
pub mod feature_metrics;
pub mod image_metrics;
pub mod io;
pub mod segmentation;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{
    flat_index, zscore_normalize, EmbeddingVector, FeatureMap4D, NormalizationWarning,
    SegmentationMask, Volume3D,
};
