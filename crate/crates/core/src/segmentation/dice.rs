use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dims, union_labels};
use crate::error::{Error, Result};
use crate::volume::SegmentationMask;

/// Voxel counts for one label, `a` taken as prediction and `b` as reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    /// `2TP / (2TP + FP + FN)`; 1.0 when the label is absent from both.
    pub fn dice(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

pub fn confusion(a: &SegmentationMask, b: &SegmentationMask, label: u32) -> Result<ConfusionCounts> {
    check_dims(a, b)?;
    let mut c = ConfusionCounts::default();
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        match (x == label, y == label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Counts for every nonzero label in one pass.
pub fn confusion_all(
    a: &SegmentationMask,
    b: &SegmentationMask,
) -> Result<BTreeMap<u32, ConfusionCounts>> {
    check_dims(a, b)?;
    let mut counts: BTreeMap<u32, ConfusionCounts> = BTreeMap::new();
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        if x == y {
            if x != 0 {
                counts.entry(x).or_default().tp += 1;
            }
            continue;
        }
        if x != 0 {
            counts.entry(x).or_default().fp += 1;
        }
        if y != 0 {
            counts.entry(y).or_default().fn_ += 1;
        }
    }
    Ok(counts)
}

pub fn dice_binary(a: &SegmentationMask, b: &SegmentationMask, label: u32) -> Result<f64> {
    Ok(confusion(a, b, label)?.dice())
}

/// Unweighted mean of per-label Dice over the union of both label sets.
pub fn dice_multiclass(a: &SegmentationMask, b: &SegmentationMask) -> Result<f64> {
    let labels = union_labels(a, b);
    if labels.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "masks '{}' and '{}' are entirely background",
            a.id(),
            b.id()
        )));
    }
    let counts = confusion_all(a, b)?;
    let per_label: Vec<f64> = labels
        .par_iter()
        .map(|l| counts.get(l).copied().unwrap_or_default().dice())
        .collect();
    Ok(per_label.iter().sum::<f64>() / per_label.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(labels: &[u32]) -> SegmentationMask {
        SegmentationMask::new("m", [labels.len(), 1, 1], [1.0; 3], labels.to_vec()).unwrap()
    }

    #[test]
    fn binary_cases() {
        let a = mask(&[1, 1, 0, 0]);
        assert_eq!(dice_binary(&a, &a, 1).unwrap(), 1.0);
        assert_eq!(dice_binary(&a, &mask(&[0, 0, 1, 1]), 1).unwrap(), 0.0);
        // tp=2 fp=1 fn=1
        let a = mask(&[1, 1, 1, 0, 0]);
        let b = mask(&[1, 1, 0, 1, 0]);
        let c = confusion(&a, &b, 1).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, fp: 1, fn_: 1 });
        assert!((dice_binary(&a, &b, 1).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(dice_binary(&a, &b, 9).unwrap(), 1.0);
    }

    #[test]
    fn multiclass_cases() {
        let a = mask(&[1, 2, 2, 0]);
        assert_eq!(dice_multiclass(&a, &a).unwrap(), 1.0);
        let b = mask(&[1, 0, 0, 2]);
        assert_eq!(dice_multiclass(&a, &b).unwrap(), 0.5);
        assert!(matches!(
            dice_multiclass(&mask(&[0, 0]), &mask(&[0, 0])),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn one_pass_counts_match_per_label() {
        let a = mask(&[1, 2, 3, 0, 2, 1, 3, 3]);
        let b = mask(&[1, 3, 3, 2, 0, 2, 3, 1]);
        let all = confusion_all(&a, &b).unwrap();
        for l in [1, 2, 3] {
            assert_eq!(all[&l], confusion(&a, &b, l).unwrap());
        }
    }

    #[test]
    fn dims_checked() {
        assert!(matches!(
            dice_binary(&mask(&[1]), &mask(&[1, 1]), 1),
            Err(Error::Dimension(_))
        ));
    }
}
