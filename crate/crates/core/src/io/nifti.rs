//! NIfTI-1 volumes (`.nii`, `.nii.gz`), 3D only.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::{Array3, ShapeBuilder};
use nifti::volume::ndarray::IntoNdArray;
use nifti::writer::WriterOptions;
use nifti::{InMemNiftiObject, NiftiHeader, NiftiObject};

use crate::error::{Error, Result};
use crate::volume::{SegmentationMask, Volume3D};

const HEADER_LEN: usize = 348;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Image id implied by a file name: the name without `.nii` / `.nii.gz`.
pub fn id_from_path(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .unwrap_or(&name)
        .to_string()
}

fn read_decompressed(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| format_err(path, format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Load a 3D NIfTI-1 volume; voxels are cast to `f64` with the header's
/// intensity scaling applied.
pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let bytes = read_decompressed(path)?;
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            path,
            format!("{} bytes, a NIfTI-1 header needs {HEADER_LEN}", bytes.len()),
        ));
    }
    let header =
        NiftiHeader::from_reader(&bytes[..]).map_err(|e| format_err(path, e.to_string()))?;
    if header.dim[0] != 3 {
        return Err(Error::Dimension(format!(
            "{}: dim[0] = {}, only 3D images are accepted",
            path.display(),
            header.dim[0]
        )));
    }
    let dims = [
        header.dim[1] as usize,
        header.dim[2] as usize,
        header.dim[3] as usize,
    ];
    if dims.contains(&0) {
        return Err(Error::Dimension(format!(
            "{}: zero-length axis in {dims:?}",
            path.display()
        )));
    }
    let datatype = header
        .data_type()
        .map_err(|e| format_err(path, e.to_string()))?;
    let n = dims[0] * dims[1] * dims[2];
    let offset = header.vox_offset.max(HEADER_LEN as f32) as usize;
    let available = bytes.len().saturating_sub(offset);
    let needed = n * datatype.size_of();
    if available < needed {
        return Err(Error::Dimension(format!(
            "{}: header dims {dims:?} need {needed} data bytes, file holds {available}",
            path.display()
        )));
    }

    let object =
        InMemNiftiObject::from_reader(&bytes[..]).map_err(|e| format_err(path, e.to_string()))?;
    let array = object
        .into_volume()
        .into_ndarray::<f64>()
        .map_err(|e| format_err(path, e.to_string()))?;
    // array is indexed [x, y, z]; its transpose iterates with x fastest
    let voxels: Vec<f64> = array.t().iter().copied().collect();
    let spacing = [
        header.pixdim[1] as f64,
        header.pixdim[2] as f64,
        header.pixdim[3] as f64,
    ];
    Volume3D::new(id_from_path(path), dims, spacing, voxels)
}

/// Load an integer label volume.
pub fn load_mask(path: impl AsRef<Path>) -> Result<SegmentationMask> {
    SegmentationMask::from_volume(&load_volume(path)?)
}

/// Write a volume as 64-bit float NIfTI-1; gzip when the path ends in `.gz`.
pub fn write_volume(v: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [nx, ny, nz] = v.dims();
    let array = Array3::from_shape_vec((nx, ny, nz).f(), v.voxels().to_vec())
        .map_err(|e| Error::Dimension(e.to_string()))?;
    let header = spatial_header(v.spacing());
    WriterOptions::new(path)
        .reference_header(&header)
        .write_nifti(&array)
        .map_err(|e| match e {
            nifti::NiftiError::Io(io) => Error::io(path, io),
            other => format_err(path, other.to_string()),
        })
}

/// Header carrying voxel spacing in millimeters.
fn spatial_header(spacing: [f64; 3]) -> NiftiHeader {
    NiftiHeader {
        pixdim: [
            1.0,
            spacing[0] as f32,
            spacing[1] as f32,
            spacing[2] as f32,
            1.0,
            1.0,
            1.0,
            1.0,
        ],
        xyzt_units: 2,
        ..NiftiHeader::default()
    }
}

/// Write a mask as 16-bit unsigned labels.
pub fn write_mask(m: &SegmentationMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [nx, ny, nz] = m.dims();
    let labels = m
        .labels()
        .iter()
        .map(|&l| {
            u16::try_from(l).map_err(|_| Error::Data(format!("label {l} exceeds 16 bits")))
        })
        .collect::<Result<Vec<u16>>>()?;
    let array = Array3::from_shape_vec((nx, ny, nz).f(), labels)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    let header = spatial_header(m.spacing());
    WriterOptions::new(path)
        .reference_header(&header)
        .write_nifti(&array)
        .map_err(|e| match e {
            nifti::NiftiError::Io(io) => Error::io(path, io),
            other => format_err(path, other.to_string()),
        })
}
