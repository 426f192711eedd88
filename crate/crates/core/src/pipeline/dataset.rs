//! Image loading from IDX files or PNG directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::ImageTensor;

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Loads one split.
///
/// `path` may be an IDX image file (loaded whatever the split), or a
/// directory holding either `<split>-images-idx3-ubyte` or a `<split>/`
/// subdirectory of PNG files. PNGs are read in lexicographic file-name
/// order; 8-bit gray stays one channel, RGB stays three, anything else is
/// converted to gray.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, split: Split) -> Result<Vec<ImageTensor<T>>> {
    let path = path.as_ref();
    if path.is_file() {
        return read_idx_file(path);
    }
    if !path.is_dir() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let idx = path.join(format!("{}-images-idx3-ubyte", split.as_str()));
    if idx.is_file() {
        return read_idx_file(&idx);
    }
    let sub = path.join(split.as_str());
    if sub.is_dir() {
        return read_png_dir(&sub);
    }
    Err(Error::MissingPath(idx))
}

fn read_idx_file<T: Scalar>(path: &Path) -> Result<Vec<ImageTensor<T>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let images = parse_idx(&bytes)?;
    log::info!("loaded {} images from {}", images.len(), path.display());
    Ok(images)
}

/// Parses an in-memory IDX image file: big-endian magic `0x00000803`, then
/// count, rows and columns as big-endian `u32`, then one byte per pixel.
pub fn parse_idx<T: Scalar>(bytes: &[u8]) -> Result<Vec<ImageTensor<T>>> {
    let word = |i: usize| -> Result<usize> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")) as usize)
            .ok_or_else(|| Error::MalformedIdx(format!("header truncated at {} bytes", bytes.len())))
    };
    let magic = word(0)? as u32;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::MalformedIdx(format!("magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}")));
    }
    let (count, rows, cols) = (word(1)?, word(2)?, word(3)?);
    let per = rows * cols;
    let body = &bytes[16..];
    if per == 0 || body.len() != count * per {
        return Err(Error::MalformedIdx(format!(
            "{count} images of {rows}x{cols} need {} pixel bytes, found {}",
            count * per,
            body.len()
        )));
    }
    body.chunks_exact(per).map(|px| ImageTensor::from_bytes(cols, rows, 1, px)).collect()
}

/// Encodes 8-bit single-channel images as an IDX image file.
pub fn write_idx(path: impl AsRef<Path>, width: usize, height: usize, images: &[Vec<u8>]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(16 + images.len() * width * height);
    for v in [IDX_IMAGE_MAGIC, images.len() as u32, height as u32, width as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        if img.len() != width * height {
            return Err(Error::InconsistentDims(format!("{} bytes for a {width}x{height} image", img.len())));
        }
        out.extend_from_slice(img);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_png_dir<T: Scalar>(dir: &Path) -> Result<Vec<ImageTensor<T>>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    let mut images: Vec<ImageTensor<T>> = Vec::with_capacity(files.len());
    for file in &files {
        let decoded = image::open(file).map_err(|e| Error::io(file, std::io::Error::other(e)))?;
        let img = match decoded {
            image::DynamicImage::ImageRgb8(rgb) => {
                ImageTensor::from_bytes(rgb.width() as usize, rgb.height() as usize, 3, rgb.as_raw())?
            }
            other => {
                let gray = other.into_luma8();
                ImageTensor::from_bytes(gray.width() as usize, gray.height() as usize, 1, gray.as_raw())?
            }
        };
        if let Some(first) = images.first() {
            if first.dims() != img.dims() {
                return Err(Error::InconsistentDims(format!(
                    "{} is {:?}, earlier images are {:?}",
                    file.display(),
                    img.dims(),
                    first.dims()
                )));
            }
        }
        images.push(img);
    }
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    log::info!("loaded {} images from {}", images.len(), dir.display());
    Ok(images)
}
