//! IDX (MNIST-style) file parsing and the binary two-class dataset.
//!
//! The IDX container is big-endian: images files carry magic `0x00000803`
//! followed by count/rows/cols and `count*rows*cols` unsigned bytes; label
//! files carry magic `0x00000801`, a count, and `count` label bytes.

use std::io::Read;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder};

use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// A raw image straight out of an IDX file: `rows*cols` intensities in 0..=255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

/// A filtered, normalized two-class image dataset.
///
/// Pixels are in `[0, 1]`; labels are 0 for the first filter class and 1 for
/// the second. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Vec<Vec<f64>>,
    labels: Vec<u8>,
    side: usize,
}

impl LabeledDataset {
    pub fn new(images: Vec<Vec<f64>>, labels: Vec<u8>, side: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        for img in &images {
            if img.len() != side * side {
                return Err(Error::Shape(format!(
                    "image has {} pixels, expected {}",
                    img.len(),
                    side * side
                )));
            }
            if img.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidConfig("pixel outside [0,1]".into()));
            }
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidConfig("label outside {0,1}".into()));
        }
        Ok(Self {
            images,
            labels,
            side,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixel_count(&self) -> usize {
        self.side * self.side
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn images(&self) -> &[Vec<f64>] {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Iterator over all images of one binary class.
    pub fn class_images(&self, class: u8) -> impl Iterator<Item = &[f64]> {
        self.images
            .iter()
            .zip(&self.labels)
            .filter(move |(_, &l)| l == class)
            .map(|(img, _)| img.as_slice())
    }

    pub fn class_count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Desk-scale subset: the first `n` samples (everything if `n` exceeds
    /// the length).
    pub fn take_first(&self, n: usize) -> LabeledDataset {
        let n = n.min(self.len());
        LabeledDataset {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            side: self.side,
        }
    }
}

fn read_u32s(bytes: &[u8], n: usize) -> Result<Vec<u32>> {
    if bytes.len() < 4 * n {
        return Err(Error::Truncated {
            expected: 4 * n,
            actual: bytes.len(),
        });
    }
    Ok((0..n).map(|i| BigEndian::read_u32(&bytes[4 * i..])).collect())
}

/// Parses an IDX3 images byte stream.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<RawImage>> {
    let header = read_u32s(bytes, 4)?;
    if header[0] != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "bad images magic {:#010x} (want {:#010x})",
            header[0], IDX_IMAGES_MAGIC
        )));
    }
    let (count, rows, cols) = (header[1] as usize, header[2] as usize, header[3] as usize);
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let mut images = Vec::with_capacity(count);
    let mut offset = 16;
    for _ in 0..count {
        images.push(RawImage {
            rows,
            cols,
            pixels: bytes[offset..offset + rows * cols].to_vec(),
        });
        offset += rows * cols;
    }
    Ok(images)
}

/// Parses an IDX1 labels byte stream.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let header = read_u32s(bytes, 2)?;
    if header[0] != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "bad labels magic {:#010x} (want {:#010x})",
            header[0], IDX_LABELS_MAGIC
        )));
    }
    let count = header[1] as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(bytes[8..8 + count].to_vec())
}

/// Encodes images into IDX3 bytes (the inverse of [`parse_idx_images`]).
pub fn write_idx_images(images: &[RawImage]) -> Result<Vec<u8>> {
    let (rows, cols) = match images.first() {
        Some(img) => (img.rows, img.cols),
        None => (0, 0),
    };
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        if img.rows != rows || img.cols != cols {
            return Err(Error::Shape("images differ in size".into()));
        }
        out.extend_from_slice(&img.pixels);
    }
    Ok(out)
}

/// Encodes labels into IDX1 bytes.
pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Keeps only samples labeled `class_a` or `class_b`, divides intensities by
/// 255, and maps `class_a` to 0 and `class_b` to 1, preserving order.
pub fn filter_and_normalize(
    images: &[RawImage],
    labels: &[u8],
    class_a: u8,
    class_b: u8,
) -> Result<LabeledDataset> {
    if class_a == class_b {
        return Err(Error::InvalidConfig(format!(
            "filter classes must differ (got {class_a} twice)"
        )));
    }
    if images.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let side = images.first().map(|img| img.rows).unwrap_or(0);
    let mut kept_images = Vec::new();
    let mut kept_labels = Vec::new();
    for (img, &label) in images.iter().zip(labels) {
        if label != class_a && label != class_b {
            continue;
        }
        if img.rows != img.cols {
            return Err(Error::Shape(format!(
                "non-square image {}x{}",
                img.rows, img.cols
            )));
        }
        kept_images.push(img.pixels.iter().map(|&p| p as f64 / 255.0).collect());
        kept_labels.push(u8::from(label == class_b));
    }
    LabeledDataset::new(kept_images, kept_labels, side)
}

/// Reads and parses an IDX images file.
pub fn load_idx_images(path: &Path) -> Result<Vec<RawImage>> {
    parse_idx_images(&read_file(path)?)
}

/// Reads and parses an IDX labels file.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&read_file(path)?)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?
        .read_to_end(&mut bytes)?;
    Ok(bytes)
}
