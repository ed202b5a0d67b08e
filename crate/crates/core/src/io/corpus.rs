//! Corpus manifests and bundle loading.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_metrics::{adaptive_avg_pool, flatten};
use crate::io::{binary, nifti};
use crate::volume::{EmbeddingVector, SegmentationMask, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusRole {
    Training,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub volume: PathBuf,
    #[serde(default)]
    pub mask: Option<PathBuf>,
    #[serde(default)]
    pub embedding: Option<PathBuf>,
    #[serde(default)]
    pub feature_map: Option<PathBuf>,
}

/// A validated list of images. Paths are absolute or relative to the
/// working directory once loaded through [`Corpus::from_manifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub role: CorpusRole,
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    /// Checks id uniqueness and that every referenced file exists.
    pub fn new(role: CorpusRole, entries: Vec<CorpusEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Corpus(format!("duplicate image id '{}'", e.id)));
            }
            let paths = std::iter::once(&e.volume)
                .chain(e.mask.iter())
                .chain(e.embedding.iter())
                .chain(e.feature_map.iter());
            for p in paths {
                if !p.exists() {
                    return Err(Error::Corpus(format!(
                        "image '{}': {} does not exist",
                        e.id,
                        p.display()
                    )));
                }
            }
        }
        Ok(Self { role, entries })
    }

    /// Read a JSON manifest; relative paths resolve against its directory.
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Corpus = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let entries = raw
            .entries
            .into_iter()
            .map(|e| CorpusEntry {
                id: e.id,
                volume: resolve(e.volume),
                mask: e.mask.map(resolve),
                embedding: e.embedding.map(resolve),
                feature_map: e.feature_map.map(resolve),
            })
            .collect();
        Self::new(raw.role, entries)
    }

    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("corpus serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }
}

/// Which modalities to read for each entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadRequest {
    pub volume: bool,
    pub mask: bool,
    pub embedding: bool,
    /// Target `(d, h, w)` when an embedding comes from a raw feature map.
    pub pool_size: [usize; 3],
}

impl Default for LoadRequest {
    fn default() -> Self {
        Self {
            volume: true,
            mask: false,
            embedding: false,
            pool_size: [4, 4, 4],
        }
    }
}

/// Everything loaded for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBundle {
    pub id: String,
    pub volume: Option<Volume3D>,
    pub mask: Option<SegmentationMask>,
    pub embedding: Option<EmbeddingVector>,
}

impl ImageBundle {
    pub fn from_volume(volume: Volume3D) -> Self {
        Self {
            id: volume.id().to_string(),
            volume: Some(volume),
            mask: None,
            embedding: None,
        }
    }

    pub fn with_mask(mut self, mask: SegmentationMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_embedding(mut self, embedding: EmbeddingVector) -> Self {
        self.embedding = Some(embedding);
        self
    }

    /// Rough in-memory footprint in bytes.
    pub fn footprint(&self) -> usize {
        self.volume.as_ref().map_or(0, |v| v.len() * 8)
            + self.mask.as_ref().map_or(0, |m| m.labels().len() * 4)
            + self.embedding.as_ref().map_or(0, |e| e.dim() * 8)
    }
}

fn missing(id: &str, what: &str) -> Error {
    Error::Input {
        id: id.to_string(),
        reason: format!("no {what} listed in the manifest"),
    }
}

pub fn load_entry(entry: &CorpusEntry, req: &LoadRequest) -> Result<ImageBundle> {
    let volume = if req.volume {
        Some(nifti::load_volume(&entry.volume)?.with_id(&entry.id))
    } else {
        None
    };
    let mask = if req.mask {
        let path = entry.mask.as_ref().ok_or_else(|| missing(&entry.id, "mask"))?;
        let volume = nifti::load_volume(path)?.with_id(&entry.id);
        Some(SegmentationMask::from_volume(&volume)?)
    } else {
        None
    };
    if let (Some(v), Some(m)) = (&volume, &mask) {
        if v.dims() != m.dims() {
            return Err(Error::Dimension(format!(
                "image '{}': volume dims {:?} differ from mask dims {:?}",
                entry.id,
                v.dims(),
                m.dims()
            )));
        }
    }
    let embedding = if req.embedding {
        if let Some(path) = &entry.embedding {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            Some(binary::decode_embedding(&entry.id, path, &bytes)?)
        } else if let Some(path) = &entry.feature_map {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let map = binary::decode_feature_map(&entry.id, path, &bytes)?;
            Some(flatten(&adaptive_avg_pool(&map, req.pool_size)?))
        } else {
            return Err(missing(&entry.id, "embedding or feature map"));
        }
    } else {
        None
    };
    Ok(ImageBundle {
        id: entry.id.clone(),
        volume,
        mask,
        embedding,
    })
}

/// Load entries in parallel. Fails as a whole: the first failing entry in
/// manifest order is reported and nothing is returned.
pub fn load_entries(entries: &[CorpusEntry], req: &LoadRequest) -> Result<Vec<ImageBundle>> {
    let results: Vec<Result<ImageBundle>> =
        entries.par_iter().map(|e| load_entry(e, req)).collect();
    let bundles = results.into_iter().collect::<Result<Vec<_>>>()?;
    if req.embedding {
        if let Some(first) = bundles.first().and_then(|b| b.embedding.as_ref()) {
            let dim = first.dim();
            if let Some(b) = bundles
                .iter()
                .find(|b| b.embedding.as_ref().is_some_and(|e| e.dim() != dim))
            {
                return Err(Error::Dimension(format!(
                    "image '{}': embedding dim {} differs from corpus dim {dim}",
                    b.id,
                    b.embedding.as_ref().map_or(0, |e| e.dim())
                )));
            }
        }
    }
    Ok(bundles)
}

pub fn load_corpus(corpus: &Corpus, req: &LoadRequest) -> Result<Vec<ImageBundle>> {
    load_entries(&corpus.entries, req)
}
