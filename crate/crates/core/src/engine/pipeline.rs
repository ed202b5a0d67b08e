//! All-pairs measure computation over two corpora.
//!
//! Synthetic images are loaded once; training images are streamed in
//! blocks sized to a memory budget. Inside a block every
//! `(synthetic, training)` pair is evaluated on a worker pool and results
//! are gathered by index, so output does not depend on the worker count.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::{Level, MeasureKind, MeasureParams, MeasureSpec};
use super::ranking::{check_corpus_size, CandidateSet, RankingRecord, ThresholdConfig, DEFAULT_N};
use crate::error::{Error, Result};
use crate::io::{load_entries, load_entry, Corpus, ImageBundle, LoadRequest};
use crate::volume::zscore_normalize;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub n: usize,
    pub thresholds: Option<ThresholdConfig>,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub memory_budget_mb: usize,
    /// Pooling target for embeddings built from raw feature maps.
    pub pool_size: [usize; 3],
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            thresholds: None,
            workers: 0,
            memory_budget_mb: 1024,
            pool_size: [4, 4, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureTiming {
    pub measure: MeasureKind,
    pub seconds: f64,
}

impl MeasureTiming {
    pub fn minutes(&self) -> f64 {
        self.seconds / 60.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Grouped by measure in the order given, each group ascending by score.
    pub records: Vec<RankingRecord>,
    /// Grouped by measure, synthetic images in corpus order.
    pub candidates: Vec<CandidateSet>,
    pub timings: Vec<MeasureTiming>,
}

fn load_request(specs: &[MeasureSpec], pool_size: [usize; 3]) -> LoadRequest {
    LoadRequest {
        volume: specs.iter().any(|s| s.level() == Level::Image),
        mask: specs.iter().any(|s| s.level() == Level::Segmentation),
        embedding: specs.iter().any(|s| s.level() == Level::Feature),
        pool_size,
    }
}

fn validate(specs: &[MeasureSpec], opts: &PipelineOptions, training_len: usize) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Data("no measures requested".into()));
    }
    let mut seen = HashSet::new();
    for s in specs {
        if !seen.insert(s.name) {
            return Err(Error::Data(format!("measure {} requested twice", s.name)));
        }
        if s.name == MeasureKind::Ssim {
            s.params.ssim.validate()?;
        }
    }
    if let Some(t) = &opts.thresholds {
        t.validate()?;
    }
    check_corpus_size(training_len, opts.n)
}

fn normalized(bundles: &[ImageBundle]) -> Result<Vec<ImageBundle>> {
    bundles
        .par_iter()
        .map(|b| {
            let mut out = b.clone();
            if let Some(v) = &b.volume {
                out.volume = Some(zscore_normalize(v)?.0);
            }
            Ok(out)
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect()
}

/// Raw values per `[spec][synthetic]`, appended block by block.
struct Accumulator<'a> {
    specs: &'a [MeasureSpec],
    synthetic: &'a [ImageBundle],
    synthetic_normalized: Option<Vec<ImageBundle>>,
    raw: Vec<Vec<Vec<(String, f64)>>>,
    seconds: Vec<f64>,
}

impl<'a> Accumulator<'a> {
    fn new(specs: &'a [MeasureSpec], synthetic: &'a [ImageBundle]) -> Result<Self> {
        let synthetic_normalized = if specs.iter().any(MeasureSpec::normalizes) {
            Some(normalized(synthetic)?)
        } else {
            None
        };
        Ok(Self {
            specs,
            synthetic,
            synthetic_normalized,
            raw: vec![vec![Vec::new(); synthetic.len()]; specs.len()],
            seconds: vec![0.0; specs.len()],
        })
    }

    fn add_block(&mut self, block: &[ImageBundle]) -> Result<()> {
        let block_normalized = if self.synthetic_normalized.is_some() {
            Some(normalized(block)?)
        } else {
            None
        };
        let width = block.len();
        for (si, spec) in self.specs.iter().enumerate() {
            let started = Instant::now();
            let (syn, train, spec) = if spec.normalizes() {
                let plain = MeasureSpec {
                    params: MeasureParams {
                        normalize: false,
                        ..spec.params
                    },
                    ..*spec
                };
                (
                    self.synthetic_normalized.as_deref().expect("prepared"),
                    block_normalized.as_deref().expect("prepared"),
                    plain,
                )
            } else {
                (self.synthetic, block, *spec)
            };
            let values: Vec<Result<f64>> = (0..syn.len() * width)
                .into_par_iter()
                .map(|k| {
                    let (s, t) = (&syn[k / width], &train[k % width]);
                    spec.evaluate(s, t).map_err(|e| Error::Pair {
                        synthetic_id: s.id.clone(),
                        training_id: t.id.clone(),
                        measure: spec.name.to_string(),
                        source: Box::new(e),
                    })
                })
                .collect();
            for (k, v) in values.into_iter().enumerate() {
                self.raw[si][k / width].push((block[k % width].id.clone(), v?));
            }
            self.seconds[si] += started.elapsed().as_secs_f64();
        }
        Ok(())
    }

    fn finish(self, opts: &PipelineOptions) -> Result<PipelineOutput> {
        let mut records = Vec::new();
        let mut candidates = Vec::new();
        for (si, spec) in self.specs.iter().enumerate() {
            let mut group = Vec::with_capacity(self.synthetic.len());
            for (syn, raw) in self.synthetic.iter().zip(&self.raw[si]) {
                let c = CandidateSet::from_raw_values(&syn.id, spec, opts.n, raw.iter().cloned())
                    .map_err(|e| Error::Input {
                        id: syn.id.clone(),
                        reason: format!("{}: {e}", spec.name),
                    })?;
                group.push(RankingRecord::from_candidates(&c, spec, opts.thresholds.as_ref())?);
                candidates.push(c);
            }
            group.sort_by(|a, b| {
                a.score()
                    .total_cmp(&b.score())
                    .then_with(|| a.synthetic_id.cmp(&b.synthetic_id))
            });
            records.extend(group);
        }
        let timings = self
            .specs
            .iter()
            .zip(&self.seconds)
            .map(|(s, &seconds)| MeasureTiming {
                measure: s.name,
                seconds,
            })
            .collect();
        Ok(PipelineOutput {
            records,
            candidates,
            timings,
        })
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Data(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

/// Run every measure over already loaded images.
pub fn run_in_memory(
    training: &[ImageBundle],
    synthetic: &[ImageBundle],
    specs: &[MeasureSpec],
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    validate(specs, opts, training.len())?;
    with_pool(opts.workers, || {
        let mut acc = Accumulator::new(specs, synthetic)?;
        acc.add_block(training)?;
        acc.finish(opts)
    })
}

/// Number of training entries loaded at a time for a per-entry footprint.
pub fn block_len(footprint_bytes: usize, memory_budget_mb: usize) -> usize {
    let budget = memory_budget_mb.saturating_mul(1024 * 1024);
    (budget / footprint_bytes.max(1)).max(1)
}

/// Visit the training corpus block by block.
pub fn for_each_training_block(
    training: &Corpus,
    req: &LoadRequest,
    memory_budget_mb: usize,
    mut visit: impl FnMut(&[ImageBundle]) -> Result<()>,
) -> Result<()> {
    let Some(first) = training.entries.first() else {
        return Ok(());
    };
    let probe = load_entry(first, req)?;
    let step = block_len(probe.footprint(), memory_budget_mb);
    log::debug!("training blocks of {step} entries");
    for chunk in training.entries.chunks(step) {
        let block = load_entries(chunk, req)?;
        visit(&block)?;
    }
    Ok(())
}

/// Load corpora from their manifests and rank every synthetic image.
pub fn run_pipeline(
    training: &Corpus,
    synthetic: &Corpus,
    specs: &[MeasureSpec],
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    validate(specs, opts, training.len())?;
    let req = load_request(specs, opts.pool_size);
    with_pool(opts.workers, || {
        let synthetic = load_entries(&synthetic.entries, &req)?;
        let mut acc = Accumulator::new(specs, &synthetic)?;
        for_each_training_block(training, &req, opts.memory_budget_mb, |block| {
            acc.add_block(block)
        })?;
        acc.finish(opts)
    })
}
