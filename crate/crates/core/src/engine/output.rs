//! Results files: ranking records as JSON Lines, neighbor dumps as CSV.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::ranking::{CandidateSet, RankingRecord};
use crate::error::{Error, Result};

pub fn write_records_jsonl(records: &[RankingRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records_jsonl(path: impl AsRef<Path>) -> Result<Vec<RankingRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct NeighborRow<'a> {
    synthetic_id: &'a str,
    rank: usize,
    training_id: &'a str,
    raw_value: f64,
    distance_value: f64,
}

/// One row per neighbor, rank starting at 1.
pub fn write_neighbors_csv<'a>(
    sets: impl IntoIterator<Item = &'a CandidateSet>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for set in sets {
        for (i, nb) in set.neighbors.iter().enumerate() {
            w.serialize(NeighborRow {
                synthetic_id: &set.synthetic_id,
                rank: i + 1,
                training_id: &nb.training_id,
                raw_value: nb.raw_value,
                distance_value: nb.distance_value,
            })
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

pub fn ensure_dir(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
