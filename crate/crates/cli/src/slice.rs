//! 2D slices of a volume, windowed to 8-bit gray and encoded as PNG.
//!
//! Axial slices fix z and run x along columns, y along rows; coronal fix y
//! (x by z); sagittal fix x (y by z).

use std::str::FromStr;

use relict_core::Volume3D;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Axial,
    Coronal,
    Sagittal,
}

impl FromStr for Plane {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "axial" => Ok(Plane::Axial),
            "coronal" => Ok(Plane::Coronal),
            "sagittal" => Ok(Plane::Sagittal),
            other => Err(format!("unknown plane '{other}'")),
        }
    }
}

impl Plane {
    /// Number of slices along the plane's normal.
    pub fn extent(self, dims: [usize; 3]) -> usize {
        match self {
            Plane::Axial => dims[2],
            Plane::Coronal => dims[1],
            Plane::Sagittal => dims[0],
        }
    }

    /// `(width, height)` of one slice.
    pub fn shape(self, dims: [usize; 3]) -> (usize, usize) {
        match self {
            Plane::Axial => (dims[0], dims[1]),
            Plane::Coronal => (dims[0], dims[2]),
            Plane::Sagittal => (dims[1], dims[2]),
        }
    }
}

/// Linear window `[lo, hi]` onto `0..=255`, clamped and rounded.
pub fn window(v: f64, lo: f64, hi: f64) -> u8 {
    ((v - lo) / (hi - lo) * 255.0).clamp(0.0, 255.0).round() as u8
}

/// Window used when the caller gives none: the volume's intensity range,
/// widened around a constant volume so it renders mid-gray.
pub fn default_window(v: &Volume3D) -> (f64, f64) {
    let (lo, hi) = v.intensity_range();
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Row-major gray pixels of one slice, or `None` if `index` is outside the
/// plane's extent.
pub fn extract_slice(v: &Volume3D, plane: Plane, index: usize, lo: f64, hi: f64) -> Option<Vec<u8>> {
    let dims = v.dims();
    if index >= plane.extent(dims) {
        return None;
    }
    let (w, h) = plane.shape(dims);
    let mut pixels = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let value = match plane {
                Plane::Axial => v.get(col, row, index),
                Plane::Coronal => v.get(col, index, row),
                Plane::Sagittal => v.get(index, col, row),
            };
            pixels.push(window(value, lo, hi));
        }
    }
    Some(pixels)
}

pub fn encode_png(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(pixels).expect("in-memory PNG data");
    }
    buf
}
