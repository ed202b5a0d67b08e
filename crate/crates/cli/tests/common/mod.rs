//! Synthetic corpora written to disk: smoothed-noise volumes with bright
//! tube-shaped "vessels", their masks, and single-channel feature maps.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use relict_cli::config::{MeasureEntry, RunConfig};
use relict_core::engine::{MeasureKind, RankingRecord};
use relict_core::evaluation::{pair_id, RatingRecord};
use relict_core::io::{write_feature_map, write_mask, write_volume, Corpus, CorpusEntry, CorpusRole};
use relict_core::{FeatureMap4D, SegmentationMask, Volume3D};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn idx(d: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + d[0] * (y + d[1] * z)
}

/// Gaussian smoothing with clamped borders, one axis at a time.
pub fn smooth(data: &[f64], d: [usize; 3], sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = taps.iter().sum();
    let mut cur = data.to_vec();
    for axis in 0..3 {
        let mut next = vec![0.0; cur.len()];
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    let p = [x as isize, y as isize, z as isize];
                    let mut acc = 0.0;
                    for (t, w) in taps.iter().enumerate() {
                        let mut q = p;
                        q[axis] = (p[axis] + t as isize - r).clamp(0, d[axis] as isize - 1);
                        acc += w * cur[idx(d, q[0] as usize, q[1] as usize, q[2] as usize)];
                    }
                    next[idx(d, x, y, z)] = acc / norm;
                }
            }
        }
        cur = next;
    }
    cur
}

/// Smoothed white noise rescaled to roughly `[0, 400]`.
pub fn background(rng: &mut ChaCha8Rng, d: [usize; 3]) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let noise: Vec<f64> = (0..d.iter().product()).map(|_| normal.sample(rng)).collect();
    let s = smooth(&noise, d, 2.0);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
    s.iter().map(|v| 200.0 + 60.0 * (v - mean) / sd).collect()
}

/// A few straight tubes of radius 1.3 between random interior points.
pub fn vessels(rng: &mut ChaCha8Rng, d: [usize; 3]) -> Vec<u32> {
    let mut labels = vec![0u32; d.iter().product()];
    let radius2 = 1.3f64 * 1.3;
    for _ in 0..3 {
        let pt = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            std::array::from_fn(|a| rng.random_range(2.0..(d[a] as f64 - 2.0)))
        };
        let (p, q) = (pt(rng), pt(rng));
        let dir: [f64; 3] = std::array::from_fn(|a| q[a] - p[a]);
        let len2: f64 = dir.iter().map(|v| v * v).sum();
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    let v = [x as f64, y as f64, z as f64];
                    let t = ((0..3).map(|a| (v[a] - p[a]) * dir[a]).sum::<f64>() / len2).clamp(0.0, 1.0);
                    let dist2: f64 = (0..3).map(|a| (v[a] - p[a] - t * dir[a]).powi(2)).sum();
                    if dist2 <= radius2 {
                        labels[idx(d, x, y, z)] = 1;
                    }
                }
            }
        }
    }
    labels
}

pub fn with_vessels(bg: &[f64], mask: &[u32]) -> Vec<f64> {
    bg.iter().zip(mask).map(|(v, &m)| v + 300.0 * m as f64).collect()
}

pub fn range_of(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Additive Gaussian noise with sd `frac` of the intensity range.
pub fn add_noise(rng: &mut ChaCha8Rng, v: &[f64], frac: f64) -> Vec<f64> {
    let (lo, hi) = range_of(v);
    let normal = Normal::new(0.0, frac * (hi - lo)).unwrap();
    v.iter().map(|x| x + normal.sample(rng)).collect()
}

/// Monotone intensity remap `lo + (hi - lo) * u^gamma`.
pub fn gamma_remap(v: &[f64], gamma: f64) -> Vec<f64> {
    let (lo, hi) = range_of(v);
    v.iter().map(|x| lo + (hi - lo) * ((x - lo) / (hi - lo)).powf(gamma)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distortion {
    /// 1% Gaussian noise.
    Noise,
    /// Gamma remap (alternating strong brightening and darkening) plus noise.
    Gamma,
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub dims: [usize; 3],
    pub training: usize,
    pub copies: usize,
    pub fresh: usize,
    pub distortion: Distortion,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub dir: PathBuf,
    pub training_manifest: PathBuf,
    pub synthetic_manifest: PathBuf,
    /// `(synthetic_id, source training_id)`.
    pub copies: Vec<(String, String)>,
    pub fresh: Vec<String>,
}

impl Fixture {
    pub fn is_copy(&self, synthetic_id: &str) -> bool {
        self.copies.iter().any(|(s, _)| s == synthetic_id)
    }
}

struct Image {
    id: String,
    voxels: Vec<f64>,
    mask: Vec<u32>,
}

fn write_image(dir: &Path, d: [usize; 3], img: &Image) -> CorpusEntry {
    let spacing = [0.5, 0.5, 0.8];
    let volume = dir.join(format!("{}.nii", img.id));
    write_volume(&Volume3D::new(&img.id, d, spacing, img.voxels.clone()).unwrap(), &volume).unwrap();
    let mask = dir.join(format!("{}_seg.nii", img.id));
    write_mask(&SegmentationMask::new(&img.id, d, spacing, img.mask.clone()).unwrap(), &mask).unwrap();
    // the encoder stand-in is the volume itself, pooled by the pipeline
    let feature_map = dir.join(format!("{}.rmap", img.id));
    write_feature_map(&FeatureMap4D::new(&img.id, 1, d, img.voxels.clone()).unwrap(), &feature_map).unwrap();
    CorpusEntry {
        id: img.id.clone(),
        volume,
        mask: Some(mask),
        embedding: None,
        feature_map: Some(feature_map),
    }
}

pub fn build(dir: &Path, spec: &FixtureSpec) -> Fixture {
    let d = spec.dims;
    let mut rng = rng(spec.seed);
    let images_dir = dir.join("images");
    fs::create_dir_all(&images_dir).unwrap();

    let mut training = Vec::new();
    for i in 0..spec.training {
        let mask = vessels(&mut rng, d);
        let voxels = with_vessels(&background(&mut rng, d), &mask);
        training.push(Image {
            id: format!("train_{i:03}"),
            voxels,
            mask,
        });
    }
    // (voxels, mask, source training id for copies)
    let mut made: Vec<(Vec<f64>, Vec<u32>, Option<String>)> = Vec::new();
    for k in 0..spec.copies {
        let src = &training[(k * 7 + 3) % spec.training];
        let base = match spec.distortion {
            Distortion::Noise => src.voxels.clone(),
            Distortion::Gamma => gamma_remap(&src.voxels, if k % 2 == 0 { 0.3 } else { 3.0 }),
        };
        made.push((add_noise(&mut rng, &base, 0.01), src.mask.clone(), Some(src.id.clone())));
    }
    for _ in 0..spec.fresh {
        let mask = vessels(&mut rng, d);
        made.push((with_vessels(&background(&mut rng, d), &mask), mask, None));
    }
    // shuffle so ids carry no hint of which images are copies
    for i in (1..made.len()).rev() {
        made.swap(i, rng.random_range(0..=i));
    }
    let mut synthetic = Vec::new();
    let mut copies = Vec::new();
    let mut fresh = Vec::new();
    for (i, (voxels, mask, source)) in made.into_iter().enumerate() {
        let id = format!("syn_{i:03}");
        match source {
            Some(t) => copies.push((id.clone(), t)),
            None => fresh.push(id.clone()),
        }
        synthetic.push(Image { id, voxels, mask });
    }

    let t_entries = training.iter().map(|img| write_image(&images_dir, d, img)).collect();
    let s_entries = synthetic.iter().map(|img| write_image(&images_dir, d, img)).collect();
    let training_manifest = dir.join("training.json");
    let synthetic_manifest = dir.join("synthetic.json");
    Corpus::new(CorpusRole::Training, t_entries).unwrap().write_manifest(&training_manifest).unwrap();
    Corpus::new(CorpusRole::Synthetic, s_entries).unwrap().write_manifest(&synthetic_manifest).unwrap();
    Fixture {
        dir: dir.to_path_buf(),
        training_manifest,
        synthetic_manifest,
        copies,
        fresh,
    }
}

pub fn run_config(f: &Fixture, measures: &[MeasureKind], n: usize, out: &str) -> RunConfig {
    RunConfig {
        training_manifest: f.training_manifest.clone(),
        synthetic_manifest: f.synthetic_manifest.clone(),
        measures: measures.iter().map(|&k| MeasureEntry::Name(k)).collect(),
        n,
        thresholds: None,
        output_dir: f.dir.join(out),
        worker_count: 0,
        memory_budget_mb: 64,
        pool_size: [8, 8, 8],
    }
}

pub fn write_config(cfg: &RunConfig, path: &Path) {
    fs::write(path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
}

/// Two raters who agree in round 1: copies are replicas (score 4), the
/// rest are not (score 1). Pairs follow the RMSE preselection.
pub fn agreeing_ratings(f: &Fixture, records: &[RankingRecord]) -> Vec<RatingRecord> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.measure == MeasureKind::Rmse) {
        let score = if f.is_copy(&r.synthetic_id) { 4 } else { 1 };
        for rater in ["rater_a", "rater_b"] {
            out.push(RatingRecord {
                pair_id: pair_id(&r.synthetic_id, &r.closest_training_id),
                rater_id: rater.into(),
                score,
                round: 1,
                timestamp: "2026-01-01T00:00:00Z".into(),
            });
        }
    }
    out
}

pub fn write_ratings(ratings: &[RatingRecord], path: &Path) {
    let text: String = ratings
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    fs::write(path, text).unwrap();
}
