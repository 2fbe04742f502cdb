//! MNIST-style IDX loading, writing and subsetting.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("image"));
        }
        if pixels.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: pixels.len(),
            });
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImageSet {
    pub images: Vec<GrayImage>,
    pub labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn new(images: Vec<GrayImage>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Shape of the first image; all images in a loaded IDX file share it.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.images.first().map(|im| (im.rows(), im.cols()))
    }

    /// Number of samples per label value, indexed by label.
    pub fn label_histogram(&self) -> Vec<usize> {
        let top = self.labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut hist = vec![0; top];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }

    /// Seeded uniform sample of `count` items without replacement, in sampled order.
    pub fn subset(&self, count: usize, seed: u64) -> Result<Self> {
        if count > self.len() {
            return Err(Error::invalid(
                "subset",
                format!("requested {count} of {} samples", self.len()),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = index::sample(&mut rng, self.len(), count);
        let images = picks.iter().map(|i| self.images[i].clone()).collect();
        let labels = picks.iter().map(|i| self.labels[i]).collect();
        Ok(Self { images, labels })
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let gz_ext = path.extension().is_some_and(|e| e == "gz");
    if gz_ext || raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Header<'a> {
    dims: Vec<usize>,
    payload: &'a [u8],
}

fn parse_header<'a>(path: &Path, bytes: &'a [u8], magic: u32, ndims: usize) -> Result<Header<'a>> {
    let head_len = 4 + 4 * ndims;
    let truncated = |needed| Error::Truncated {
        file: path.to_path_buf(),
        needed,
        available: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(head_len));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let found = word(0);
    if found != magic {
        return Err(Error::BadMagic {
            file: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    if bytes.len() < head_len {
        return Err(truncated(head_len));
    }
    let dims: Vec<usize> = (1..=ndims).map(|i| word(i) as usize).collect();
    let needed: usize = dims.iter().product();
    let payload = &bytes[head_len..];
    if payload.len() < needed {
        return Err(truncated(head_len + needed));
    }
    Ok(Header {
        dims,
        payload: &payload[..needed],
    })
}

pub fn load_idx_images(path: &Path) -> Result<Vec<GrayImage>> {
    let bytes = read_maybe_gz(path)?;
    let h = parse_header(path, &bytes, IMAGE_MAGIC, 3)?;
    let (count, rows, cols) = (h.dims[0], h.dims[1], h.dims[2]);
    if rows * cols == 0 {
        return match count {
            0 => Ok(Vec::new()),
            _ => Err(Error::Empty("IDX image dimensions")),
        };
    }
    h.payload
        .chunks_exact(rows * cols)
        .take(count)
        .map(|px| GrayImage::new(rows, cols, px.to_vec()))
        .collect()
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_maybe_gz(path)?;
    let h = parse_header(path, &bytes, LABEL_MAGIC, 1)?;
    Ok(h.payload.to_vec())
}

/// Load an image file and its label file, checking that the counts agree.
pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledImageSet> {
    let imgs = load_idx_images(images)?;
    let labs = load_idx_labels(labels)?;
    LabeledImageSet::new(imgs, labs)
}

pub fn encode_idx_images(images: &[GrayImage]) -> Result<Vec<u8>> {
    let (rows, cols) = images.first().map_or((0, 0), |im| (im.rows(), im.cols()));
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for word in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for im in images {
        if (im.rows(), im.cols()) != (rows, cols) {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: im.rows() * im.cols(),
            });
        }
        out.extend_from_slice(im.pixels());
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Write raw bytes, gzip-compressing when the path ends in `.gz`.
pub fn write_idx_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let data = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes.to_vec()
    };
    fs::write(path, data).map_err(|e| Error::io(path, e))
}
