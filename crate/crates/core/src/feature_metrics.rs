//! Feature-level comparison: pooling externally produced encoder maps down
//! to a fixed size and comparing the resulting embeddings.

use crate::error::{Error, Result};
use crate::volume::{EmbeddingVector, FeatureMap4D};

/// Output cell `i` of an axis of length `len` pooled to `out` cells covers
/// input `[floor(i*len/out), ceil((i+1)*len/out))`.
fn pool_bounds(i: usize, len: usize, out: usize) -> (usize, usize) {
    let start = i * len / out;
    let end = ((i + 1) * len).div_ceil(out);
    (start, end)
}

/// Adaptive average pooling of every channel to `out = (od, oh, ow)`.
pub fn adaptive_avg_pool(f: &FeatureMap4D, out: [usize; 3]) -> Result<FeatureMap4D> {
    let dims = f.dims();
    if out.contains(&0) || out.iter().zip(dims).any(|(&o, d)| o > d) {
        return Err(Error::Dimension(format!(
            "'{}': cannot pool {dims:?} to {out:?}",
            f.id()
        )));
    }
    let channels = f.channels();
    let mut values = Vec::with_capacity(channels * out[0] * out[1] * out[2]);
    for c in 0..channels {
        for i in 0..out[0] {
            let (i0, i1) = pool_bounds(i, dims[0], out[0]);
            for j in 0..out[1] {
                let (j0, j1) = pool_bounds(j, dims[1], out[1]);
                for k in 0..out[2] {
                    let (k0, k1) = pool_bounds(k, dims[2], out[2]);
                    let mut sum = 0.0;
                    for ii in i0..i1 {
                        for jj in j0..j1 {
                            let row = f.index(c, ii, jj, k0);
                            sum += f.values()[row..row + (k1 - k0)].iter().sum::<f64>();
                        }
                    }
                    let count = (i1 - i0) * (j1 - j0) * (k1 - k0);
                    values.push(sum / count as f64);
                }
            }
        }
    }
    FeatureMap4D::new(f.id(), channels, out, values)
}

/// Channel-major flattening; length `C*d*h*w`.
pub fn flatten(f: &FeatureMap4D) -> EmbeddingVector {
    EmbeddingVector::new(f.id(), f.values().to_vec()).expect("feature maps are non-empty and finite")
}

fn check_dims(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension(format!(
            "embedding '{}' has dim {}, '{}' has {}",
            u.id(),
            u.dim(),
            v.id(),
            v.dim()
        )));
    }
    Ok(())
}

pub fn embedding_rmse(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    check_dims(u, v)?;
    let sum: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / u.dim() as f64).sqrt())
}

/// Cosine of the angle between two embeddings. A zero vector means the
/// encoder produced nothing usable and is rejected.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    check_dims(u, v)?;
    let norm = |e: &EmbeddingVector| e.values().iter().map(|x| x * x).sum::<f64>().sqrt();
    let (nu, nv) = (norm(u), norm(v));
    for (e, n) in [(u, nu), (v, nv)] {
        if n == 0.0 {
            return Err(Error::DegenerateInput(format!("embedding '{}' has zero norm", e.id())));
        }
    }
    let dot: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}
