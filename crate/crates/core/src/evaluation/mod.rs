//! Calibration of replica thresholds against human ratings.

pub mod preselect;
pub mod ratings;
pub mod report;
pub mod sweep;

pub use preselect::{preselect_in_memory, preselect_pairs};
pub use ratings::{
    aggregate_ratings, agreement_stats, append_rating, pair_id, read_labels_json,
    read_ratings_log, split_pair_id, write_labels_json, AgreementStats, Label, Provenance,
    RatingRecord, ReferenceLabel, LIKERT_CAPTIONS, REPLICA_SCORE,
};
pub use report::{emit_report, format_minutes, scatter_svg, write_sweep_csv, ReportFiles};
pub use sweep::{labeled_samples, rates_at, sweep_thresholds, Sample, SweepPoint, SweepResult, STEP};
