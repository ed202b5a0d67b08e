//! Voxel-level comparison of two equally shaped volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume3D;

fn check_dims(a: &Volume3D, b: &Volume3D) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension(format!(
            "'{}' has dims {:?}, '{}' has {:?}",
            a.id(),
            a.dims(),
            b.id(),
            b.dims()
        )));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(a: &Volume3D, b: &Volume3D) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .voxels()
        .iter()
        .zip(b.voxels())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / a.len() as f64)
}

/// Root mean squared error.
pub fn rmse(a: &Volume3D, b: &Volume3D) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .voxels()
        .iter()
        .zip(b.voxels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// SSIM settings. `data_range: None` uses the joint intensity range of the
/// pair being compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub sigma: f64,
    pub data_range: Option<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            sigma: 1.5,
            data_range: None,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(self.k1) && positive(self.k2) && positive(self.sigma)) {
            return Err(Error::Data(format!("SSIM parameters must be positive: {self:?}")));
        }
        if let Some(l) = self.data_range {
            if !positive(l) {
                return Err(Error::Data(format!("SSIM data range must be positive, got {l}")));
            }
        }
        Ok(())
    }

    /// Gaussian truncation radius, `round(3.5 * sigma)` half-up.
    pub fn radius(&self) -> usize {
        (3.5 * self.sigma + 0.5).floor() as usize
    }

    pub fn window_size(&self) -> usize {
        2 * self.radius() + 1
    }

    /// Normalized 1D Gaussian taps of length `window_size()`.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.radius() as isize;
        let two_var = 2.0 * self.sigma * self.sigma;
        let taps: Vec<f64> = (-r..=r)
            .map(|i| (-((i * i) as f64) / two_var).exp())
            .collect();
        let total: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / total).collect()
    }
}

/// Valid-mode correlation of a grid with `kernel` along one axis.
fn filter_axis(data: &[f64], dims: [usize; 3], axis: usize, kernel: &[f64]) -> (Vec<f64>, [usize; 3]) {
    let taps = kernel.len();
    let mut out_dims = dims;
    out_dims[axis] = dims[axis] + 1 - taps;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut out = Vec::with_capacity(out_dims[0] * out_dims[1] * out_dims[2]);
    for z in 0..out_dims[2] {
        for y in 0..out_dims[1] {
            for x in 0..out_dims[0] {
                let base = x + dims[0] * (y + dims[1] * z);
                let acc: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(t, w)| w * data[base + t * stride])
                    .sum();
                out.push(acc);
            }
        }
    }
    (out, out_dims)
}

fn gaussian_valid(data: &[f64], dims: [usize; 3], kernel: &[f64]) -> Vec<f64> {
    let (d, dims) = filter_axis(data, dims, 0, kernel);
    let (d, dims) = filter_axis(&d, dims, 1, kernel);
    filter_axis(&d, dims, 2, kernel).0
}

/// Mean of the local SSIM map over every voxel whose full Gaussian window
/// lies inside the volume.
pub fn mean_ssim(a: &Volume3D, b: &Volume3D, p: &SsimParams) -> Result<f64> {
    check_dims(a, b)?;
    p.validate()?;
    let win = p.window_size();
    let dims = a.dims();
    if dims.iter().any(|&d| d < win) {
        return Err(Error::Window {
            required: win,
            dims,
        });
    }
    let range = match p.data_range {
        Some(l) => l,
        None => {
            let (lo_a, hi_a) = a.intensity_range();
            let (lo_b, hi_b) = b.intensity_range();
            hi_a.max(hi_b) - lo_a.min(lo_b)
        }
    };
    if range == 0.0 {
        // both volumes are the same constant
        return Ok(1.0);
    }
    let c1 = (p.k1 * range).powi(2);
    let c2 = (p.k2 * range).powi(2);

    let kernel = p.kernel();
    let x = a.voxels();
    let y = b.voxels();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(u, v)| u * v).collect();

    let mu_x = gaussian_valid(x, dims, &kernel);
    let mu_y = gaussian_valid(y, dims, &kernel);
    let e_xx = gaussian_valid(&xx, dims, &kernel);
    let e_yy = gaussian_valid(&yy, dims, &kernel);
    let e_xy = gaussian_valid(&xy, dims, &kernel);

    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64]) -> Volume3D {
        Volume3D::new("l", [v.len(), 1, 1], [1.0; 3], v.to_vec()).unwrap()
    }

    fn pattern(seed: u64, n: usize) -> Volume3D {
        let vox = (0..n * n * n)
            .map(|i| (((i as u64 + 1) * (seed * 2 + 7919)) % 1009) as f64 / 10.0)
            .collect();
        Volume3D::new(format!("p{seed}"), [n, n, n], [1.0; 3], vox).unwrap()
    }

    #[test]
    fn mae_rmse_hand_oracles() {
        let a = line(&[1.0, 2.0, 3.0]);
        let b = line(&[2.0, 2.0, 5.0]);
        assert_eq!(mae(&a, &b).unwrap(), 1.0);
        assert!((rmse(&a, &b).unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = line(&[1.0, 2.0, 3.0]);
        let b = line(&[1.0, 2.0]);
        assert!(matches!(mae(&a, &b), Err(Error::Dimension(_))));
        assert!(matches!(rmse(&a, &b), Err(Error::Dimension(_))));
        assert!(matches!(
            mean_ssim(&a, &b, &SsimParams::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn default_window_is_eleven() {
        let p = SsimParams::default();
        assert_eq!(p.radius(), 5);
        assert_eq!(p.window_size(), 11);
        let k = p.kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[10]);
    }

    #[test]
    fn small_volume_is_window_error() {
        let a = pattern(1, 10);
        assert!(matches!(
            mean_ssim(&a, &a, &SsimParams::default()),
            Err(Error::Window { required: 11, .. })
        ));
    }

    #[test]
    fn ssim_identity_and_constants() {
        let a = pattern(3, 12);
        assert!((mean_ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-9);

        let z = Volume3D::new("z", [11, 11, 11], [1.0; 3], vec![0.0; 1331]).unwrap();
        let unit = SsimParams {
            data_range: Some(1.0),
            ..SsimParams::default()
        };
        assert_eq!(mean_ssim(&z, &z, &unit).unwrap(), 1.0);
        assert_eq!(mean_ssim(&z, &z, &SsimParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let a = pattern(1, 13);
        let b = pattern(2, 13);
        let p = SsimParams::default();
        let ab = mean_ssim(&a, &b, &p).unwrap();
        let ba = mean_ssim(&b, &a, &p).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
        assert!(ab < 0.99);
    }

    #[test]
    fn invalid_params_rejected() {
        let a = pattern(1, 11);
        let p = SsimParams {
            sigma: 0.0,
            ..SsimParams::default()
        };
        assert!(mean_ssim(&a, &a, &p).is_err());
    }
}
