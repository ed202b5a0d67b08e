//! Nearest-training-image ranking, distance ratios and replica decisions.

pub mod measure;
pub mod output;
pub mod pipeline;
pub mod ranking;

pub use measure::{to_distance, Level, MeasureKind, MeasureParams, MeasureSpec, Polarity};
pub use output::{read_records_jsonl, write_neighbors_csv, write_records_jsonl};
pub use pipeline::{
    block_len, for_each_training_block, run_in_memory, run_pipeline, MeasureTiming,
    PipelineOptions, PipelineOutput,
};
pub use ranking::{
    decide, distance_ratio, rank_training, CandidateSet, Decision, Neighbor, RankingRecord,
    Threshold, ThresholdConfig, ThresholdMode, DEFAULT_N, SCHEMA_VERSION,
};
