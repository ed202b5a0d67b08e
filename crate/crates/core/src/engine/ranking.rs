use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::measure::{Level, MeasureKind, MeasureSpec};
use crate::error::{Error, Result};
use crate::io::ImageBundle;
use crate::volume::zscore_normalize;

pub const DEFAULT_N: usize = 50;
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub training_id: String,
    pub raw_value: f64,
    pub distance_value: f64,
}

/// The `n` closest training images to one synthetic image, ascending by
/// distance, ties by training id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub synthetic_id: String,
    pub measure: MeasureKind,
    pub n: usize,
    pub neighbors: Vec<Neighbor>,
}

fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance_value
        .total_cmp(&b.distance_value)
        .then_with(|| a.training_id.cmp(&b.training_id))
}

pub(crate) fn check_corpus_size(len: usize, n: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::Corpus(format!(
            "training corpus has {len} image(s), at least 2 are needed"
        )));
    }
    if n < 2 {
        return Err(Error::Corpus(format!("n = {n}, must be at least 2")));
    }
    if n > len {
        return Err(Error::Corpus(format!(
            "n = {n} exceeds the training corpus size {len}"
        )));
    }
    Ok(())
}

impl CandidateSet {
    /// Sort `(training_id, raw)` values into the `n` nearest neighbors.
    pub fn from_raw_values(
        synthetic_id: impl Into<String>,
        spec: &MeasureSpec,
        n: usize,
        raw: impl IntoIterator<Item = (String, f64)>,
    ) -> Result<Self> {
        let mut neighbors = raw
            .into_iter()
            .map(|(training_id, raw_value)| {
                Ok(Neighbor {
                    distance_value: spec.to_distance(raw_value)?,
                    training_id,
                    raw_value,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        check_corpus_size(neighbors.len(), n)?;
        neighbors.sort_by(neighbor_order);
        neighbors.truncate(n);
        Ok(Self {
            synthetic_id: synthetic_id.into(),
            measure: spec.name,
            n,
            neighbors,
        })
    }

    pub fn closest(&self) -> Option<&Neighbor> {
        self.neighbors.first()
    }

    /// Mean distance of the `n` closest neighbors.
    pub fn mean_of_n_closest(&self) -> Result<f64> {
        if self.neighbors.len() < self.n {
            return Err(Error::Input {
                id: self.synthetic_id.clone(),
                reason: format!(
                    "{} neighbors available, distance ratio needs n = {}",
                    self.neighbors.len(),
                    self.n
                ),
            });
        }
        // closest + mean excess, so equal distances give their value exactly
        let closest = self.neighbors[0].distance_value;
        let excess: f64 = self.neighbors[..self.n]
            .iter()
            .map(|nb| nb.distance_value - closest)
            .sum();
        Ok(closest + excess / self.n as f64)
    }
}

/// Rank every training image by its distance to `synthetic`.
pub fn rank_training(
    synthetic: &ImageBundle,
    training: &[ImageBundle],
    spec: &MeasureSpec,
    n: usize,
) -> Result<CandidateSet> {
    check_corpus_size(training.len(), n)?;
    let pair_err = |t: &ImageBundle, e: Error| Error::Pair {
        synthetic_id: synthetic.id.clone(),
        training_id: t.id.clone(),
        measure: spec.name.to_string(),
        source: Box::new(e),
    };
    let raw = if spec.normalizes() {
        let normalized = |b: &ImageBundle| -> Result<ImageBundle> {
            let mut out = b.clone();
            if let Some(v) = &b.volume {
                out.volume = Some(zscore_normalize(v)?.0);
            }
            Ok(out)
        };
        let plain = MeasureSpec {
            params: super::measure::MeasureParams {
                normalize: false,
                ..spec.params
            },
            ..*spec
        };
        let s = normalized(synthetic)?;
        training
            .iter()
            .map(|t| {
                let tn = normalized(t).map_err(|e| pair_err(t, e))?;
                plain
                    .evaluate(&s, &tn)
                    .map(|v| (t.id.clone(), v))
                    .map_err(|e| pair_err(t, e))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        training
            .iter()
            .map(|t| {
                spec.evaluate(synthetic, t)
                    .map(|v| (t.id.clone(), v))
                    .map_err(|e| pair_err(t, e))
            })
            .collect::<Result<Vec<_>>>()?
    };
    CandidateSet::from_raw_values(&synthetic.id, spec, n, raw)
}

/// Closest distance over the mean of the `n` closest. A zero mean means
/// the `n` nearest are all exact copies and the ratio is 0.
pub fn distance_ratio(c: &CandidateSet) -> Result<f64> {
    let mean = c.mean_of_n_closest()?;
    if mean == 0.0 {
        return Ok(0.0);
    }
    let closest = c.neighbors[0].distance_value;
    // the minimum of n values never exceeds their mean; clamp rounding
    Ok((closest / mean).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Replica,
    NotReplica,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Ratio,
    Absolute,
}

impl ThresholdMode {
    pub fn for_measure(kind: MeasureKind) -> Self {
        if kind.level() == Level::Segmentation {
            ThresholdMode::Absolute
        } else {
            ThresholdMode::Ratio
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub threshold: f64,
    pub mode: ThresholdMode,
}

/// Per-measure replica thresholds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdConfig {
    pub measures: BTreeMap<MeasureKind, Threshold>,
}

impl ThresholdConfig {
    pub fn insert(&mut self, kind: MeasureKind, threshold: f64) -> Result<()> {
        if !threshold.is_finite() {
            return Err(Error::Data(format!("threshold for {kind} must be finite")));
        }
        self.measures.insert(
            kind,
            Threshold {
                threshold,
                mode: ThresholdMode::for_measure(kind),
            },
        );
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (kind, t) in &self.measures {
            if !t.threshold.is_finite() {
                return Err(Error::Data(format!("threshold for {kind} must be finite")));
            }
            if t.mode != ThresholdMode::for_measure(*kind) {
                return Err(Error::Data(format!(
                    "{kind} takes {:?} thresholds, got {:?}",
                    ThresholdMode::for_measure(*kind),
                    t.mode
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, kind: MeasureKind) -> Option<f64> {
        self.measures.get(&kind).map(|t| t.threshold)
    }
}

/// Replica iff `value < T`. Without a threshold for the measure the result
/// is undecided.
pub fn decide(value: f64, thresholds: &ThresholdConfig, spec: &MeasureSpec) -> Decision {
    match thresholds.get(spec.name) {
        None => Decision::Undecided,
        Some(t) if value < t => Decision::Replica,
        Some(_) => Decision::NotReplica,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub schema_version: u32,
    pub synthetic_id: String,
    pub measure: MeasureKind,
    pub closest_training_id: String,
    pub closest_distance: f64,
    pub mean_of_n_closest: f64,
    /// Set for image- and feature-level measures.
    pub distance_ratio: Option<f64>,
    /// Set for segmentation-level measures: the converted distance of the
    /// closest training image.
    pub absolute_value: Option<f64>,
    pub decision: Decision,
}

impl RankingRecord {
    pub fn from_candidates(
        c: &CandidateSet,
        spec: &MeasureSpec,
        thresholds: Option<&ThresholdConfig>,
    ) -> Result<Self> {
        let mean = c.mean_of_n_closest()?;
        let closest = &c.neighbors[0];
        let (distance_ratio, absolute_value) = if spec.level() == Level::Segmentation {
            (None, Some(closest.distance_value))
        } else {
            (Some(distance_ratio(c)?), None)
        };
        let score = distance_ratio.or(absolute_value).expect("one score is set");
        let decision = thresholds.map_or(Decision::Undecided, |t| decide(score, t, spec));
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            synthetic_id: c.synthetic_id.clone(),
            measure: spec.name,
            closest_training_id: closest.training_id.clone(),
            closest_distance: closest.distance_value,
            mean_of_n_closest: mean,
            distance_ratio,
            absolute_value,
            decision,
        })
    }

    /// The value compared against the threshold.
    pub fn score(&self) -> f64 {
        self.distance_ratio
            .or(self.absolute_value)
            .unwrap_or(self.closest_distance)
    }
}
