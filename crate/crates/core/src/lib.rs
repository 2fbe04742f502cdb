//! Delay-feedback reservoir computing on volatile memristors.
//!
//! Images are binarized and turned into binary pulse trains ([`preprocess`]),
//! written into a bank of volatile memristors ([`device`], [`reservoir`]),
//! read once, quantized, and classified by a logistic readout ([`readout`]).
//! [`metrics`] accounts throughput, energy and area; [`experiment`] wires the
//! pipeline to configuration files and sweep grids.

pub mod config;
pub mod dataset;
pub mod device;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod preprocess;
pub mod readout;
pub mod reservoir;

pub use device::{DeviceParams, DeviceState};
pub use error::{Error, Result};
pub use metrics::ExperimentReport;
pub use preprocess::{Dimension, PreprocessSpec, PulseTrain};
pub use readout::{ReadoutModel, TrainConfig};
pub use reservoir::{FeatureVector, ImageCost, ReservoirBank};
