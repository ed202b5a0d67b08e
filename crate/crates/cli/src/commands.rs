//! The batch subcommands: `rank`, `sweep` and `report`.

use std::fs;
use std::path::{Path, PathBuf};

use relict_core::engine::output::ensure_dir;
use relict_core::engine::{
    read_records_jsonl, run_pipeline, write_neighbors_csv, write_records_jsonl, MeasureKind,
    MeasureTiming, RankingRecord, ThresholdConfig,
};
use relict_core::evaluation::{
    aggregate_ratings, agreement_stats, emit_report, labeled_samples, read_ratings_log,
    sweep_thresholds, write_labels_json, write_sweep_csv, AgreementStats, SweepResult,
};
use relict_core::io::Corpus;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const RUNTIMES_FILE: &str = "runtimes.json";
pub const SWEEP_FILE: &str = "sweep.json";
pub const AGREEMENT_FILE: &str = "agreement.json";
pub const LABELS_FILE: &str = "labels.json";
pub const THRESHOLDS_FILE: &str = "thresholds.json";

pub fn neighbors_file(kind: MeasureKind) -> String {
    format!("neighbors_{kind}.csv")
}

fn write_json(value: &impl Serialize, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub records: PathBuf,
    pub timings: Vec<MeasureTiming>,
}

/// Rank every synthetic image and write records, neighbor dumps and
/// per-measure runtimes into the configured output directory.
pub fn cmd_rank(cfg: &RunConfig, workers_env: Option<&str>) -> CliResult<RankSummary> {
    let opts = cfg.pipeline_options(workers_env)?;
    let training = Corpus::from_manifest(&cfg.training_manifest)?;
    let synthetic = Corpus::from_manifest(&cfg.synthetic_manifest)?;
    let specs = cfg.specs();
    let out = run_pipeline(&training, &synthetic, &specs, &opts)?;

    ensure_dir(&cfg.output_dir)?;
    let records = cfg.output_dir.join(RECORDS_FILE);
    write_records_jsonl(&out.records, &records)?;
    for spec in &specs {
        let sets = out.candidates.iter().filter(|c| c.measure == spec.name);
        write_neighbors_csv(sets, cfg.output_dir.join(neighbors_file(spec.name)))?;
    }
    write_json(&out.timings, &cfg.output_dir.join(RUNTIMES_FILE))?;
    Ok(RankSummary {
        records,
        timings: out.timings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub sweeps: Vec<SweepResult>,
    pub thresholds: ThresholdConfig,
    pub agreement: AgreementStats,
}

/// Measures present in `records`, in first-seen order.
fn measures_of(records: &[RankingRecord]) -> Vec<MeasureKind> {
    let mut seen = Vec::new();
    for r in records {
        if !seen.contains(&r.measure) {
            seen.push(r.measure);
        }
    }
    seen
}

/// Turn two-rater ratings into reference labels and calibrate one
/// threshold per measure found in the records.
pub fn cmd_sweep(ratings: &Path, records: &Path, out: &Path) -> CliResult<SweepSummary> {
    let log = read_ratings_log(ratings)?;
    let records = read_records_jsonl(records)?;
    let labels = aggregate_ratings(&log)?;
    let agreement = agreement_stats(&log)?;

    let mut sweeps = Vec::new();
    let mut thresholds = ThresholdConfig::default();
    for kind in measures_of(&records) {
        let samples = labeled_samples(&records, kind, &labels);
        let sweep = sweep_thresholds(kind.name(), &samples)?;
        thresholds.insert(kind, sweep.optimal_threshold)?;
        sweeps.push(sweep);
    }
    if sweeps.is_empty() {
        return Err(CliError {
            exit_code: CliError::INPUT,
            kind: "input".into(),
            message: format!("{} holds no records", records.len()),
        });
    }

    ensure_dir(out)?;
    write_labels_json(&labels, out.join(LABELS_FILE))?;
    write_json(&agreement, &out.join(AGREEMENT_FILE))?;
    write_json(&sweeps, &out.join(SWEEP_FILE))?;
    write_json(&thresholds, &out.join(THRESHOLDS_FILE))?;
    for s in &sweeps {
        write_sweep_csv(s, out.join(format!("sweep_{}.csv", s.measure)))?;
    }
    Ok(SweepSummary {
        sweeps,
        thresholds,
        agreement,
    })
}

/// Collect whatever `rank` and `sweep` left in `input` into a report.
pub fn cmd_report(input: &Path, out: &Path) -> CliResult<PathBuf> {
    let optional = |name: &str| Some(input.join(name)).filter(|p| p.is_file());
    let records = match optional(RECORDS_FILE) {
        Some(p) => read_records_jsonl(p)?,
        None => Vec::new(),
    };
    let sweeps: Vec<SweepResult> = match optional(SWEEP_FILE) {
        Some(p) => read_json(&p)?,
        None => Vec::new(),
    };
    let agreement: Option<AgreementStats> = optional(AGREEMENT_FILE).map(|p| read_json(&p)).transpose()?;
    let timings: Vec<MeasureTiming> = match optional(RUNTIMES_FILE) {
        Some(p) => read_json(&p)?,
        None => Vec::new(),
    };
    if records.is_empty() && sweeps.is_empty() && timings.is_empty() {
        return Err(CliError::config(format!(
            "{} contains no {RECORDS_FILE}, {SWEEP_FILE} or {RUNTIMES_FILE}",
            input.display()
        )));
    }
    let files = emit_report(&records, &sweeps, agreement.as_ref(), &timings, out)?;
    Ok(files.summary)
}
