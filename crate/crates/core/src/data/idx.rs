//! IDX reader for the MNIST distribution files, plain or gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_PIXELS: usize = 28 * 28;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImage {
    pub pixels: Vec<u8>,
    pub label: u8,
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("gzip decode failed: {e}"),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Header<'a> {
    dims: Vec<usize>,
    body: &'a [u8],
}

fn parse_header<'a>(path: &Path, bytes: &'a [u8], magic: u32, n_dims: usize) -> Result<Header<'a>> {
    let err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let header_len = 4 + 4 * n_dims;
    if bytes.len() < header_len {
        return Err(err(format!("truncated header ({} bytes)", bytes.len())));
    }
    let word = |k: usize| u32::from_be_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    let found = word(0);
    if found != magic {
        return Err(err(format!("bad magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    let dims: Vec<usize> = (1..=n_dims).map(|k| word(k) as usize).collect();
    let body = &bytes[header_len..];
    let expected: usize = dims.iter().product();
    if body.len() < expected {
        return Err(err(format!("truncated body: {} bytes, header promises {expected}", body.len())));
    }
    Ok(Header {
        dims,
        body: &body[..expected],
    })
}

/// Reads an image file and its label file into records.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<RawImage>> {
    let image_bytes = read_maybe_gz(images_path)?;
    let label_bytes = read_maybe_gz(labels_path)?;
    let images = parse_header(images_path, &image_bytes, IMAGE_MAGIC, 3)?;
    let labels = parse_header(labels_path, &label_bytes, LABEL_MAGIC, 1)?;

    let (count, rows, cols) = (images.dims[0], images.dims[1], images.dims[2]);
    if rows * cols != IMAGE_PIXELS {
        return Err(Error::Parse {
            path: images_path.to_path_buf(),
            message: format!("expected 28x28 images, got {rows}x{cols}"),
        });
    }
    if labels.dims[0] != count {
        return Err(Error::Parse {
            path: labels_path.to_path_buf(),
            message: format!("{} labels for {count} images", labels.dims[0]),
        });
    }
    images
        .body
        .chunks_exact(IMAGE_PIXELS)
        .zip(labels.body)
        .map(|(pixels, &label)| {
            if label > 9 {
                return Err(Error::Parse {
                    path: labels_path.to_path_buf(),
                    message: format!("label {label} outside 0..=9"),
                });
            }
            Ok(RawImage {
                pixels: pixels.to_vec(),
                label,
            })
        })
        .collect()
}

/// Finds `<stem>` or `<stem>.gz` inside `dir`.
fn locate(dir: &Path, stem: &str) -> Result<PathBuf> {
    let plain = dir.join(stem);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::MissingPath(plain))
}

/// Train and test splits from a directory holding the four standard MNIST
/// files (`train-images-idx3-ubyte`, ...), optionally gzip-compressed.
pub fn load_mnist_dir(dir: &Path) -> Result<(Vec<RawImage>, Vec<RawImage>)> {
    if !dir.is_dir() {
        return Err(Error::MissingPath(dir.to_path_buf()));
    }
    let train = load_idx(
        &locate(dir, "train-images-idx3-ubyte")?,
        &locate(dir, "train-labels-idx1-ubyte")?,
    )?;
    let test = load_idx(
        &locate(dir, "t10k-images-idx3-ubyte")?,
        &locate(dir, "t10k-labels-idx1-ubyte")?,
    )?;
    Ok((train, test))
}

/// Serialises records back into IDX bytes; the inverse of [`load_idx`].
pub fn write_idx(images: &[RawImage]) -> (Vec<u8>, Vec<u8>) {
    let n = images.len() as u32;
    let mut img = Vec::with_capacity(16 + images.len() * IMAGE_PIXELS);
    for word in [IMAGE_MAGIC, n, 28, 28] {
        img.extend_from_slice(&word.to_be_bytes());
    }
    let mut lab = Vec::with_capacity(8 + images.len());
    for word in [LABEL_MAGIC, n] {
        lab.extend_from_slice(&word.to_be_bytes());
    }
    for r in images {
        img.extend_from_slice(&r.pixels);
        lab.push(r.label);
    }
    (img, lab)
}
