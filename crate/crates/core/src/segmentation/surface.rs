use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::edt::squared_edt;
use super::{check_dims, union_labels};
use crate::error::{Error, Result};
use crate::volume::{flat_index, SegmentationMask};

/// Above this many surface points in total, directed distances come from a
/// distance transform instead of pairwise search.
pub const BRUTE_FORCE_LIMIT: usize = 10_000;

/// Border voxels of one label: labeled voxels with at least one of their six
/// face neighbors unlabeled or outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePointSet {
    pub label: u32,
    /// Voxel-center coordinates in millimeters.
    pub points: Vec<[f64; 3]>,
    /// Grid coordinates of the same voxels.
    pub voxels: Vec<[usize; 3]>,
}

impl SurfacePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn extract_surface(m: &SegmentationMask, label: u32) -> SurfacePointSet {
    let dims = m.dims();
    let spacing = m.spacing();
    let inside = |x: isize, y: isize, z: isize| -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < dims[0]
            && (y as usize) < dims[1]
            && (z as usize) < dims[2]
            && m.get(x as usize, y as usize, z as usize) == label
    };
    const FACES: [[isize; 3]; 6] = [
        [1, 0, 0],
        [-1, 0, 0],
        [0, 1, 0],
        [0, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
    ];
    let mut points = Vec::new();
    let mut voxels = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if m.labels()[flat_index(dims, x, y, z)] != label {
                    continue;
                }
                let (xi, yi, zi) = (x as isize, y as isize, z as isize);
                let border = FACES
                    .iter()
                    .any(|d| !inside(xi + d[0], yi + d[1], zi + d[2]));
                if border {
                    voxels.push([x, y, z]);
                    points.push([
                        x as f64 * spacing[0],
                        y as f64 * spacing[1],
                        z as f64 * spacing[2],
                    ]);
                }
            }
        }
    }
    SurfacePointSet {
        label,
        points,
        voxels,
    }
}

fn dist(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// `Σ_{s ∈ from} min_{t ∈ to} |s - t|` by pairwise search.
pub fn directed_sum_brute(from: &SurfacePointSet, to: &SurfacePointSet) -> f64 {
    from.points
        .iter()
        .map(|p| to.points.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Same as [`directed_sum_brute`] via a distance transform of `to`.
pub fn directed_sum_edt(
    from: &SurfacePointSet,
    to: &SurfacePointSet,
    dims: [usize; 3],
    spacing: [f64; 3],
) -> f64 {
    let mut features = vec![false; dims[0] * dims[1] * dims[2]];
    for v in &to.voxels {
        features[flat_index(dims, v[0], v[1], v[2])] = true;
    }
    let field = squared_edt(&features, dims, spacing);
    from.voxels
        .iter()
        .map(|v| field[flat_index(dims, v[0], v[1], v[2])].sqrt())
        .sum()
}

/// Stand-in used when exactly one mask lacks a label: 95% of the physical
/// diagonal of the image, `0.95 * sqrt(Σ (n_i * s_i)^2)` millimeters.
pub fn whole_image_fallback(dims: [usize; 3], spacing: [f64; 3]) -> f64 {
    let diag2: f64 = (0..3).map(|i| (dims[i] as f64 * spacing[i]).powi(2)).sum();
    0.95 * diag2.sqrt()
}

fn asd_from_surfaces(
    s1: &SurfacePointSet,
    s2: &SurfacePointSet,
    dims: [usize; 3],
    spacing: [f64; 3],
) -> f64 {
    match (s1.is_empty(), s2.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => whole_image_fallback(dims, spacing),
        (false, false) => {
            let total = if s1.len() + s2.len() < BRUTE_FORCE_LIMIT {
                directed_sum_brute(s1, s2) + directed_sum_brute(s2, s1)
            } else {
                directed_sum_edt(s1, s2, dims, spacing) + directed_sum_edt(s2, s1, dims, spacing)
            };
            total / (s1.len() + s2.len()) as f64
        }
    }
}

/// Symmetric average surface distance in millimeters for one label.
///
/// If the label is missing from both masks the result is 0; if it is
/// missing from exactly one, [`whole_image_fallback`] is returned.
pub fn asd_binary(a: &SegmentationMask, b: &SegmentationMask, label: u32) -> Result<f64> {
    check_dims(a, b)?;
    let s1 = extract_surface(a, label);
    let s2 = extract_surface(b, label);
    Ok(asd_from_surfaces(&s1, &s2, a.dims(), a.spacing()))
}

/// Unweighted mean of per-label ASD over the union of both label sets.
pub fn asd_multiclass(a: &SegmentationMask, b: &SegmentationMask) -> Result<f64> {
    check_dims(a, b)?;
    let labels = union_labels(a, b);
    if labels.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "masks '{}' and '{}' are entirely background",
            a.id(),
            b.id()
        )));
    }
    let per_label: Vec<f64> = labels
        .par_iter()
        .map(|&l| {
            let s1 = extract_surface(a, l);
            let s2 = extract_surface(b, l);
            asd_from_surfaces(&s1, &s2, a.dims(), a.spacing())
        })
        .collect();
    Ok(per_label.iter().sum::<f64>() / per_label.len() as f64)
}
