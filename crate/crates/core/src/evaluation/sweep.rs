//! Threshold calibration against reference labels.
//!
//! Thresholds step by 0.01 across the observed value range; a pair is
//! predicted replica when its value is strictly below the threshold, and
//! replicas are the positive class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ratings::{split_pair_id, Label, ReferenceLabel};
use crate::engine::{MeasureKind, RankingRecord};
use crate::error::{Error, Result};

pub const STEP: f64 = 0.01;
const GRID_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub balanced_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub value: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub measure: String,
    pub points: Vec<SweepPoint>,
    pub optimal_threshold: f64,
    pub optimal_balanced_accuracy: f64,
    pub positives: usize,
    pub negatives: usize,
    pub excluded_unresolved: usize,
    /// The labeled values the sweep ran over.
    pub samples: Vec<Sample>,
}

impl SweepResult {
    pub fn thresholds(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.threshold).collect()
    }
}

/// Grid index `k` (threshold `k * 0.01`) at or below `x`.
fn grid_floor(x: f64) -> i64 {
    let scaled = x / STEP;
    let r = scaled.round();
    if (scaled - r).abs() < GRID_SNAP {
        r as i64
    } else {
        scaled.floor() as i64
    }
}

fn grid_ceil(x: f64) -> i64 {
    let scaled = x / STEP;
    let r = scaled.round();
    if (scaled - r).abs() < GRID_SNAP {
        r as i64
    } else {
        scaled.ceil() as i64
    }
}

/// Sensitivity and specificity of the rule `value < threshold`.
pub fn rates_at(threshold: f64, positives: &[f64], negatives: &[f64]) -> (f64, f64) {
    // both slices sorted ascending
    let tp = positives.partition_point(|&v| v < threshold);
    let fp = negatives.partition_point(|&v| v < threshold);
    let sens = tp as f64 / positives.len() as f64;
    let spec = (negatives.len() - fp) as f64 / negatives.len() as f64;
    (sens, spec)
}

pub fn sweep_thresholds(measure: impl Into<String>, samples: &[Sample]) -> Result<SweepResult> {
    let measure = measure.into();
    let excluded = samples.iter().filter(|s| s.label == Label::Unresolved).count();
    let used: Vec<Sample> = samples
        .iter()
        .filter(|s| s.label != Label::Unresolved)
        .cloned()
        .collect();
    if let Some(bad) = used.iter().find(|s| !s.value.is_finite()) {
        return Err(Error::Data(format!("{measure}: non-finite value {}", bad.value)));
    }
    let mut pos: Vec<f64> = used
        .iter()
        .filter(|s| s.label == Label::Replica)
        .map(|s| s.value)
        .collect();
    let mut neg: Vec<f64> = used
        .iter()
        .filter(|s| s.label == Label::NotReplica)
        .map(|s| s.value)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateLabels(format!(
            "{measure}: {} replica and {} non-replica labels, both classes are needed",
            pos.len(),
            neg.len()
        )));
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let lo = pos[0].min(neg[0]);
    let hi = pos[pos.len() - 1].max(neg[neg.len() - 1]);
    let (k_lo, k_hi) = (grid_floor(lo), grid_ceil(hi) + 1);

    let mut points = Vec::with_capacity((k_hi - k_lo + 1) as usize);
    let mut best: Option<SweepPoint> = None;
    for k in k_lo..=k_hi {
        let threshold = k as f64 / 100.0;
        let (sensitivity, specificity) = rates_at(threshold, &pos, &neg);
        let p = SweepPoint {
            threshold,
            sensitivity,
            specificity,
            balanced_accuracy: (sensitivity + specificity) / 2.0,
        };
        if best.is_none_or(|b| p.balanced_accuracy > b.balanced_accuracy) {
            best = Some(p);
        }
        points.push(p);
    }
    let best = best.expect("grid is never empty");
    Ok(SweepResult {
        measure,
        points,
        optimal_threshold: best.threshold,
        optimal_balanced_accuracy: best.balanced_accuracy,
        positives: pos.len(),
        negatives: neg.len(),
        excluded_unresolved: excluded,
        samples: used,
    })
}

/// Pair each record of `measure` with the label of its synthetic image.
/// Records without a label are skipped.
pub fn labeled_samples(
    records: &[RankingRecord],
    measure: MeasureKind,
    labels: &[ReferenceLabel],
) -> Vec<Sample> {
    let by_synthetic: BTreeMap<&str, Label> = labels
        .iter()
        .map(|l| {
            let syn = split_pair_id(&l.pair_id).map_or(l.pair_id.as_str(), |(s, _)| s);
            (syn, l.label)
        })
        .collect();
    let mut samples: Vec<(&str, Sample)> = records
        .iter()
        .filter(|r| r.measure == measure)
        .filter_map(|r| {
            by_synthetic.get(r.synthetic_id.as_str()).map(|&label| {
                (
                    r.synthetic_id.as_str(),
                    Sample {
                        value: r.score(),
                        label,
                    },
                )
            })
        })
        .collect();
    samples.sort_by(|a, b| a.0.cmp(b.0));
    samples.into_iter().map(|(_, s)| s).collect()
}
