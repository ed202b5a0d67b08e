//! Human reference ratings on the 4-point replica scale and their
//! aggregation into reference labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Captions of the rating scale, index `score - 1`.
pub const LIKERT_CAPTIONS: [&str; 4] = [
    "Certainly not a Replica",
    "Probably not a replica",
    "Probably a Replica",
    "Certainly Replica",
];

/// Scores at or above this count as a replica vote.
pub const REPLICA_SCORE: u8 = 3;

/// `"<synthetic_id>:<training_id>"`.
pub fn pair_id(synthetic_id: &str, training_id: &str) -> String {
    format!("{synthetic_id}:{training_id}")
}

/// Split a pair id at its first `:`.
pub fn split_pair_id(pair_id: &str) -> Option<(&str, &str)> {
    pair_id.split_once(':')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub pair_id: String,
    pub rater_id: String,
    pub score: u8,
    pub round: u32,
    #[serde(default)]
    pub timestamp: String,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.score) {
            return Err(Error::Data(format!(
                "score {} for {} is outside 1..=4",
                self.score, self.pair_id
            )));
        }
        if self.round == 0 {
            return Err(Error::Data(format!("round must be positive for {}", self.pair_id)));
        }
        if self.rater_id.is_empty() || self.pair_id.is_empty() {
            return Err(Error::Data("rating needs pair_id and rater_id".into()));
        }
        Ok(())
    }

    pub fn is_replica_vote(&self) -> bool {
        self.score >= REPLICA_SCORE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Replica,
    NotReplica,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ConsensusRound1,
    ConsensusRound2,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceLabel {
    pub pair_id: String,
    pub label: Label,
    pub provenance: Provenance,
}

/// `pair -> round -> rater -> score`, rejecting duplicates.
type RatingTable = BTreeMap<String, BTreeMap<u32, BTreeMap<String, u8>>>;

fn tabulate(ratings: &[RatingRecord]) -> Result<(BTreeSet<String>, RatingTable)> {
    let mut raters = BTreeSet::new();
    let mut table = RatingTable::new();
    for r in ratings {
        r.validate()?;
        raters.insert(r.rater_id.clone());
        let slot = table
            .entry(r.pair_id.clone())
            .or_default()
            .entry(r.round)
            .or_default();
        if slot.insert(r.rater_id.clone(), r.score).is_some() {
            return Err(Error::Data(format!(
                "duplicate rating by {} for {} in round {}",
                r.rater_id, r.pair_id, r.round
            )));
        }
    }
    if raters.len() != 2 {
        return Err(Error::IncompleteRatings(format!(
            "exactly two raters are required, found {}",
            raters.len()
        )));
    }
    Ok((raters, table))
}

/// Both raters' replica votes for one round, if both rated.
fn votes(
    rounds: &BTreeMap<u32, BTreeMap<String, u8>>,
    round: u32,
    raters: &BTreeSet<String>,
) -> Option<Vec<bool>> {
    let scores = rounds.get(&round)?;
    raters
        .iter()
        .map(|r| scores.get(r).map(|&s| s >= REPLICA_SCORE))
        .collect()
}

fn agreed(votes: &[bool]) -> Option<Label> {
    if votes.iter().all(|&v| v) {
        Some(Label::Replica)
    } else if votes.iter().all(|&v| !v) {
        Some(Label::NotReplica)
    } else {
        None
    }
}

/// Reference label per pair, sorted by pair id.
///
/// Round-1 agreement settles a pair. A disagreement needs round-2 scores
/// from both raters; if they still disagree the pair is unresolved.
pub fn aggregate_ratings(ratings: &[RatingRecord]) -> Result<Vec<ReferenceLabel>> {
    let (raters, table) = tabulate(ratings)?;
    table
        .iter()
        .map(|(pair, rounds)| {
            let first = votes(rounds, 1, &raters).ok_or_else(|| {
                Error::IncompleteRatings(format!("{pair} lacks round-1 scores from both raters"))
            })?;
            if let Some(label) = agreed(&first) {
                return Ok(ReferenceLabel {
                    pair_id: pair.clone(),
                    label,
                    provenance: Provenance::ConsensusRound1,
                });
            }
            let second = votes(rounds, 2, &raters).ok_or_else(|| {
                Error::IncompleteRatings(format!(
                    "{pair}: raters disagreed in round 1 and round-2 scores are missing"
                ))
            })?;
            Ok(match agreed(&second) {
                Some(label) => ReferenceLabel {
                    pair_id: pair.clone(),
                    label,
                    provenance: Provenance::ConsensusRound2,
                },
                None => ReferenceLabel {
                    pair_id: pair.clone(),
                    label: Label::Unresolved,
                    provenance: Provenance::Unresolved,
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    /// Percentage (0–100) of pairs with matching round-1 decisions.
    pub percent_agreement: f64,
    pub pairs: usize,
    pub agreeing_pairs: usize,
    /// Median round-1 score per rater.
    pub median_score: BTreeMap<String, f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn agreement_stats(ratings: &[RatingRecord]) -> Result<AgreementStats> {
    let (raters, table) = tabulate(ratings)?;
    let mut agreeing = 0;
    let mut per_rater: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (pair, rounds) in &table {
        let first = votes(rounds, 1, &raters).ok_or_else(|| {
            Error::IncompleteRatings(format!("{pair} lacks round-1 scores from both raters"))
        })?;
        if agreed(&first).is_some() {
            agreeing += 1;
        }
        for (rater, &score) in &rounds[&1] {
            per_rater.entry(rater.clone()).or_default().push(score as f64);
        }
    }
    let pairs = table.len();
    Ok(AgreementStats {
        percent_agreement: if pairs == 0 {
            0.0
        } else {
            100.0 * agreeing as f64 / pairs as f64
        },
        pairs,
        agreeing_pairs: agreeing,
        median_score: per_rater.into_iter().map(|(r, s)| (r, median(s))).collect(),
    })
}

/// Read a JSON Lines ratings log. Blank lines are skipped.
pub fn read_ratings_log(path: impl AsRef<Path>) -> Result<Vec<RatingRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RatingRecord = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", i + 1),
        })?;
        out.push(r);
    }
    Ok(out)
}

/// Append one rating and sync it to disk before returning.
pub fn append_rating(path: impl AsRef<Path>, r: &RatingRecord) -> Result<()> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = serde_json::to_string(r).expect("ratings serialize");
    line.push('\n');
    file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    file.sync_data().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LabelEntry {
    label: Label,
    provenance: Provenance,
}

/// Reference labels as a JSON object keyed by pair id.
pub fn write_labels_json(labels: &[ReferenceLabel], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let map: BTreeMap<&str, LabelEntry> = labels
        .iter()
        .map(|l| {
            (
                l.pair_id.as_str(),
                LabelEntry {
                    label: l.label,
                    provenance: l.provenance,
                },
            )
        })
        .collect();
    let text = serde_json::to_string_pretty(&map).expect("labels serialize");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_labels_json(path: impl AsRef<Path>) -> Result<Vec<ReferenceLabel>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map: BTreeMap<String, LabelEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    Ok(map
        .into_iter()
        .map(|(pair_id, e)| ReferenceLabel {
            pair_id,
            label: e.label,
            provenance: e.provenance,
        })
        .collect())
}
