//! Exact squared Euclidean distance transform on an anisotropic grid,
//! computed separably with the lower-envelope-of-parabolas method of
//! Felzenszwalb and Huttenlocher.

use crate::volume::flat_index;

/// 1D pass: `out[q] = min_p (spacing * (q - p))^2 + f[p]`. Infinite
/// entries contribute nothing.
fn transform_line(f: &[f64], spacing: f64, out: &mut [f64], sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    sites.clear();
    bounds.clear();
    let s2 = spacing * spacing;
    // intersection abscissa (in index units) of the parabolas rooted at p < r
    let meet = |p: usize, r: usize| -> f64 {
        let (pf, rf) = (p as f64, r as f64);
        ((f[r] + s2 * rf * rf) - (f[p] + s2 * pf * pf)) / (2.0 * s2 * (rf - pf))
    };
    for (q, fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        while let Some(&top) = sites.last() {
            let x = meet(top, q);
            if bounds.last().is_some_and(|&b| x <= b) {
                sites.pop();
                bounds.pop();
            } else {
                bounds.push(x);
                break;
            }
        }
        sites.push(q);
    }
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    // bounds[i] separates sites[i] and sites[i + 1]
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while k < bounds.len() && bounds[k] < q as f64 {
            k += 1;
        }
        let p = sites[k];
        let d = spacing * (q as f64 - p as f64);
        *slot = d * d + f[p];
    }
}

/// Squared distance in millimeters from every voxel center to the nearest
/// voxel flagged in `features`; `INFINITY` everywhere if none is flagged.
pub fn squared_edt(features: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let mut grid: Vec<f64> = features
        .iter()
        .map(|&on| if on { 0.0 } else { f64::INFINITY })
        .collect();
    let longest = dims.iter().copied().max().unwrap_or(0);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut sites = Vec::with_capacity(longest);
    let mut bounds = Vec::with_capacity(longest);

    for axis in 0..3 {
        let n = dims[axis];
        let (a1, a2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for u in 0..dims[a1] {
            for v in 0..dims[a2] {
                let at = |t: usize| {
                    let mut c = [0usize; 3];
                    c[axis] = t;
                    c[a1] = u;
                    c[a2] = v;
                    flat_index(dims, c[0], c[1], c[2])
                };
                for t in 0..n {
                    line[t] = grid[at(t)];
                }
                transform_line(&line[..n], spacing[axis], &mut out[..n], &mut sites, &mut bounds);
                for t in 0..n {
                    grid[at(t)] = out[t];
                }
            }
        }
    }
    grid
}
