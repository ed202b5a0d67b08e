//! Segmentation-level comparison: Dice overlap and average surface
//! distance, per label and macro-averaged over labels.

mod dice;
pub mod edt;
mod surface;

use std::collections::BTreeSet;

pub use dice::{confusion, confusion_all, dice_binary, dice_multiclass, ConfusionCounts};
pub use surface::{
    asd_binary, asd_multiclass, directed_sum_brute, directed_sum_edt, extract_surface,
    whole_image_fallback, SurfacePointSet, BRUTE_FORCE_LIMIT,
};

use crate::error::{Error, Result};
use crate::volume::SegmentationMask;

fn check_dims(a: &SegmentationMask, b: &SegmentationMask) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension(format!(
            "mask '{}' has dims {:?}, '{}' has {:?}",
            a.id(),
            a.dims(),
            b.id(),
            b.dims()
        )));
    }
    Ok(())
}

/// Sorted union of the nonzero labels of both masks.
pub fn union_labels(a: &SegmentationMask, b: &SegmentationMask) -> Vec<u32> {
    let set: BTreeSet<u32> = a.label_set().iter().chain(b.label_set()).copied().collect();
    set.into_iter().collect()
}
