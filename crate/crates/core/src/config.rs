//! TOML experiment configuration.
//!
//! ```toml
//! version = 1
//! seed = 7
//! out_dir = "out"
//!
//! [data]
//! dir = "data/mnist"          # or explicit train_images/train_labels/test_images/test_labels
//! subset_train = 10000
//! subset_test = 2000
//!
//! [device]                    # any DeviceParams field overrides the default
//! tau = 5e-9
//!
//! [preprocess]
//! dimension = ["1d", "2d"]    # scalar or list
//! parity = [false, true]
//! sections = [1, 4]
//! threshold = 25
//!
//! [quantize]
//! bits = 6                    # scalar or list in 1..=7
//! scaling = "per_image"       # or "global"
//!
//! [train]
//! epochs = 500
//! learning_rate = 0.02
//! shuffle = true
//! bias = false
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::preprocess::{Dimension, PreprocessSpec, DEFAULT_THRESHOLD};
use crate::readout::TrainConfig;
use crate::reservoir::{Scaling, MAX_BITS};

pub const SCHEMA_VERSION: u32 = 1;

/// A scalar or a list of values for one sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding the four standard MNIST file names (optionally `.gz`).
    pub dir: Option<PathBuf>,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub subset_train: Option<usize>,
    pub subset_test: Option<usize>,
    #[serde(default = "default_classes")]
    pub classes: usize,
}

fn default_classes() -> usize {
    10
}

/// Resolved file locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl DataPaths {
    /// Standard MNIST names inside `dir`, preferring uncompressed files.
    pub fn in_dir(dir: &Path) -> Self {
        let pick = |stem: &str| {
            let plain = dir.join(stem);
            if plain.exists() {
                plain
            } else {
                dir.join(format!("{stem}.gz"))
            }
        };
        Self {
            train_images: pick("train-images-idx3-ubyte"),
            train_labels: pick("train-labels-idx1-ubyte"),
            test_images: pick("t10k-images-idx3-ubyte"),
            test_labels: pick("t10k-labels-idx1-ubyte"),
        }
    }
}

impl DataConfig {
    pub fn resolve(&self, base: &Path) -> Result<DataPaths> {
        let abs = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        let mut paths = match &self.dir {
            Some(dir) => DataPaths::in_dir(&abs(dir)),
            None => {
                let need = |p: &Option<PathBuf>, key: &str| {
                    p.as_ref()
                        .map(abs)
                        .ok_or_else(|| Error::Config(format!("data.{key} is required when data.dir is unset")))
                };
                return Ok(DataPaths {
                    train_images: need(&self.train_images, "train_images")?,
                    train_labels: need(&self.train_labels, "train_labels")?,
                    test_images: need(&self.test_images, "test_images")?,
                    test_labels: need(&self.test_labels, "test_labels")?,
                });
            }
        };
        let overrides = [
            (&self.train_images, &mut paths.train_images),
            (&self.train_labels, &mut paths.train_labels),
            (&self.test_images, &mut paths.test_images),
            (&self.test_labels, &mut paths.test_labels),
        ];
        for (given, slot) in overrides {
            if let Some(p) = given {
                *slot = abs(p);
            }
        }
        Ok(paths)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessGrid {
    pub dimension: OneOrMany<Dimension>,
    pub parity: OneOrMany<bool>,
    pub sections: OneOrMany<usize>,
    pub threshold: u8,
}

impl Default for PreprocessGrid {
    fn default() -> Self {
        Self {
            dimension: OneOrMany::One(Dimension::OneD),
            parity: OneOrMany::One(false),
            sections: OneOrMany::One(1),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizeConfig {
    pub bits: OneOrMany<u8>,
    pub scaling: Scaling,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        Self {
            bits: OneOrMany::One(6),
            scaling: Scaling::PerImage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub shuffle: bool,
    pub bias: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            shuffle: d.shuffle,
            bias: d.bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default)]
    pub preprocess: PreprocessGrid,
    #[serde(default)]
    pub quantize: QuantizeConfig,
    #[serde(default)]
    pub train: TrainSection,
    /// Directory relative paths are resolved against; the config file's parent when loaded from disk.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_workers() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One configuration of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub spec: PreprocessSpec,
    pub bits: u8,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        if self.data.classes < 2 {
            return Err(Error::invalid("classes", "must be at least 2"));
        }
        self.device.validate()?;
        self.train_config().validate()?;
        for bits in self.quantize.bits.values() {
            if !(1..=MAX_BITS).contains(&bits) {
                return Err(Error::invalid("bits", format!("{bits} not in [1, {MAX_BITS}]")));
            }
        }
        let grid = self.grid();
        if grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        grid.iter().try_for_each(|p| p.spec.validate())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            shuffle: self.train.shuffle,
            seed: self.seed.wrapping_add(1),
            bias: self.train.bias,
        }
    }

    /// Cartesian product in dimension, parity, sections, bits order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for dimension in self.preprocess.dimension.values() {
            for parity in self.preprocess.parity.values() {
                for sections in self.preprocess.sections.values() {
                    for bits in self.quantize.bits.values() {
                        out.push(GridPoint {
                            spec: PreprocessSpec {
                                dimension,
                                parity,
                                sections,
                                threshold: self.preprocess.threshold,
                            },
                            bits,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn data_paths(&self) -> Result<DataPaths> {
        self.data.resolve(&self.base_dir)
    }

    pub fn out_dir(&self) -> PathBuf {
        if self.out_dir.is_absolute() {
            self.out_dir.clone()
        } else {
            self.base_dir.join(&self.out_dir)
        }
    }
}
