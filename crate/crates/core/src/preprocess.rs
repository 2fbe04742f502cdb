//! Image to pulse-train conversion.
//!
//! A binarized image is expanded into an ordered list of binary rows
//! (original rows, then columns for 2D input, then adjacent-row XOR parity
//! rows) and each row is cut into `k` contiguous sections. Every section
//! becomes the pulse train of one reservoir device.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::GrayImage;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: u8 = 25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    rows: usize,
    cols: usize,
    pixels: Vec<bool>,
}

impl BinaryImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("binary image"));
        }
        if pixels.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: pixels.len(),
            });
        }
        Ok(Self { rows, cols, pixels })
    }

    /// Build from nested 0/1 rows; every row must have the same length.
    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut pixels = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            pixels.extend(r.iter().map(|&p| p != 0));
        }
        Self::new(rows.len(), cols, pixels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.pixels[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[bool] {
        &self.pixels[r * self.cols..(r + 1) * self.cols]
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// XOR of each pair of adjacent rows; `n - 1` rows of the same width.
    pub fn parity_rows(&self) -> Result<BinaryImage> {
        if self.rows < 2 {
            return Err(Error::invalid("rows", "parity needs at least two rows"));
        }
        let pixels = (0..self.rows - 1)
            .flat_map(|r| self.row(r).iter().zip(self.row(r + 1)).map(|(a, b)| a ^ b))
            .collect();
        BinaryImage::new(self.rows - 1, self.cols, pixels)
    }
}

/// Pixels strictly above `threshold` become `1`.
pub fn binarize(image: &GrayImage, threshold: u8) -> Result<BinaryImage> {
    let pixels = image.pixels().iter().map(|&p| p > threshold).collect();
    BinaryImage::new(image.rows(), image.cols(), pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "1d", alias = "1D")]
    OneD,
    #[serde(rename = "2d", alias = "2D")]
    TwoD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub dimension: Dimension,
    pub parity: bool,
    pub sections: usize,
    pub threshold: u8,
}

impl PreprocessSpec {
    pub fn new(dimension: Dimension, parity: bool, sections: usize) -> Self {
        Self {
            dimension,
            parity,
            sections,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sections == 0 {
            return Err(Error::invalid("sections", "must be at least 1"));
        }
        Ok(())
    }

    /// Check that every expanded row of an `n × m` image can be cut into `sections` pieces.
    pub fn validate_for_shape(&self, n: usize, m: usize) -> Result<()> {
        self.validate()?;
        let shortest = match self.dimension {
            Dimension::OneD => m,
            Dimension::TwoD => n.min(m),
        };
        if self.sections > shortest {
            return Err(Error::invalid(
                "sections",
                format!("{} sections exceed the shortest row length {shortest}", self.sections),
            ));
        }
        Ok(())
    }

    /// Short method label such as `2D+parity`.
    pub fn method(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PreprocessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dim = match self.dimension {
            Dimension::OneD => "1D",
            Dimension::TwoD => "2D",
        };
        if self.parity {
            write!(f, "{dim}+parity")
        } else {
            f.write_str(dim)
        }
    }
}

/// Ordered binary slot sequence driving one device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseTrain {
    slots: Vec<bool>,
}

impl PulseTrain {
    pub fn new(slots: Vec<bool>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Empty("pulse train"));
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[bool] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.slots.iter().filter(|&&s| s).count()
    }
}

/// Rows in feed order: originals, columns top-to-bottom (2D), then parity rows.
pub fn expand(image: &BinaryImage, spec: &PreprocessSpec) -> Vec<Vec<bool>> {
    let (n, m) = (image.rows(), image.cols());
    let mut rows: Vec<Vec<bool>> = (0..n).map(|r| image.row(r).to_vec()).collect();
    if spec.dimension == Dimension::TwoD {
        rows.extend((0..m).map(|c| (0..n).map(|r| image.get(r, c)).collect()));
    }
    if spec.parity && n >= 2 {
        let parity = image.parity_rows().expect("n >= 2");
        rows.extend((0..n - 1).map(|r| parity.row(r).to_vec()));
    }
    rows
}

/// Contiguous near-equal split; the first `len % k` sections are one slot longer.
pub fn sectionize(row: &[bool], k: usize) -> Result<Vec<PulseTrain>> {
    if k == 0 || k > row.len() {
        return Err(Error::invalid(
            "sections",
            format!("cannot cut a row of {} slots into {k} sections", row.len()),
        ));
    }
    let (base, extra) = (row.len() / k, row.len() % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(PulseTrain::new(row[start..start + len].to_vec())?);
        start += len;
    }
    Ok(out)
}

/// Number of devices (pulse trains) produced for an `n × m` image.
pub fn reservoir_size(spec: &PreprocessSpec, n: usize, m: usize) -> usize {
    let base = match spec.dimension {
        Dimension::OneD => n,
        Dimension::TwoD => n + m,
    };
    let parity = if spec.parity { n.saturating_sub(1) } else { 0 };
    (base + parity) * spec.sections
}

/// Full pipeline from grayscale pixels to the reservoir's pulse trains.
pub fn pulse_trains(image: &GrayImage, spec: &PreprocessSpec) -> Result<Vec<PulseTrain>> {
    spec.validate_for_shape(image.rows(), image.cols())?;
    let bin = binarize(image, spec.threshold)?;
    let mut trains = Vec::with_capacity(reservoir_size(spec, bin.rows(), bin.cols()));
    for row in expand(&bin, spec) {
        trains.extend(sectionize(&row, spec.sections)?);
    }
    Ok(trains)
}
