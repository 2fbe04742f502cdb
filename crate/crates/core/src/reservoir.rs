//! A bank of independent volatile memristors driven in lockstep.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::dataset::GrayImage;
use crate::device::{DeviceParams, DeviceState};
use crate::error::{Error, Result};
use crate::preprocess::{pulse_trains, reservoir_size, PreprocessSpec, PulseTrain};

pub const MAX_BITS: u8 = 7;

/// Energy and time spent on one image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageCost {
    pub write_energy: f64,
    pub read_energy: f64,
    /// Write/idle slots per device sequence (read slot not included).
    pub slot_count: usize,
    pub wall_time: f64,
}

impl ImageCost {
    pub fn total_energy(&self) -> f64 {
        self.write_energy + self.read_energy
    }
}

impl Add for ImageCost {
    type Output = ImageCost;

    fn add(self, rhs: ImageCost) -> ImageCost {
        ImageCost {
            write_energy: self.write_energy + rhs.write_energy,
            read_energy: self.read_energy + rhs.read_energy,
            slot_count: self.slot_count + rhs.slot_count,
            wall_time: self.wall_time + rhs.wall_time,
        }
    }
}

impl AddAssign for ImageCost {
    fn add_assign(&mut self, rhs: ImageCost) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone)]
pub struct ReservoirBank {
    params: DeviceParams,
    devices: Vec<DeviceState>,
}

impl ReservoirBank {
    pub fn new(params: DeviceParams, size: usize) -> Result<Self> {
        params.validate()?;
        if size == 0 {
            return Err(Error::Empty("reservoir"));
        }
        Ok(Self {
            params,
            devices: vec![DeviceState::fresh(&params); size],
        })
    }

    /// Bank sized for `spec` applied to `n × m` images.
    pub fn for_shape(params: DeviceParams, spec: &PreprocessSpec, n: usize, m: usize) -> Result<Self> {
        spec.validate_for_shape(n, m)?;
        Self::new(params, reservoir_size(spec, n, m))
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn states(&self) -> &[DeviceState] {
        &self.devices
    }

    pub fn reset(&mut self) {
        let fresh = DeviceState::fresh(&self.params);
        self.devices.iter_mut().for_each(|d| *d = fresh);
    }

    /// Apply one pulse train per device. Shorter trains idle ('0') until the longest finishes.
    pub fn ingest(&mut self, trains: &[PulseTrain]) -> Result<ImageCost> {
        if trains.len() != self.devices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.devices.len(),
                got: trains.len(),
            });
        }
        let p = self.params;
        let slot_count = trains.iter().map(PulseTrain::len).max().unwrap_or(0);
        let mut write_energy = 0.0;
        for (dev, train) in self.devices.iter_mut().zip(trains) {
            let mut s = *dev;
            for &slot in train.slots() {
                if slot {
                    write_energy += s.pulse_energy(p.v_write, &p);
                }
                s = s.step(slot, &p);
            }
            for _ in train.len()..slot_count {
                s = s.decay_update(&p);
            }
            *dev = s;
        }
        Ok(ImageCost {
            write_energy,
            read_energy: 0.0,
            slot_count,
            wall_time: slot_count as f64 * p.t_pulse,
        })
    }

    /// One simultaneous read pulse; the state is not disturbed.
    pub fn read_all(&self) -> (Vec<f64>, ImageCost) {
        let p = &self.params;
        let currents: Vec<f64> = self.devices.iter().map(|d| d.read_current(p.v_read, p)).collect();
        let read_energy = self.devices.iter().map(|d| d.pulse_energy(p.v_read, p)).sum();
        let cost = ImageCost {
            write_energy: 0.0,
            read_energy,
            slot_count: 0,
            wall_time: p.t_pulse,
        };
        (currents, cost)
    }

    /// Reset, write `image` under `spec`, then read. Returns raw currents and the full image cost.
    pub fn process(&mut self, image: &GrayImage, spec: &PreprocessSpec) -> Result<(Vec<f64>, ImageCost)> {
        let trains = pulse_trains(image, spec)?;
        self.reset();
        let write = self.ingest(&trains)?;
        let (currents, read) = self.read_all();
        Ok((currents, write + read))
    }
}

/// Quantized reservoir read-out on the `(2^bits - 1)`-step lattice of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    levels: Vec<u8>,
    bits: u8,
}

impl FeatureVector {
    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        let top = max_level(self.bits) as f64;
        self.levels.iter().map(|&l| l as f64 / top).collect()
    }
}

pub fn max_level(bits: u8) -> u8 {
    ((1u16 << bits) - 1) as u8
}

fn check_bits(bits: u8) -> Result<()> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(Error::invalid("bits", format!("{bits} not in [1, {MAX_BITS}]")));
    }
    Ok(())
}

/// Quantize against a fixed `[lo, hi]` range; values outside are clamped.
pub fn quantize_in_range(currents: &[f64], bits: u8, lo: f64, hi: f64) -> Result<FeatureVector> {
    check_bits(bits)?;
    if currents.is_empty() {
        return Err(Error::Empty("currents"));
    }
    let top = max_level(bits);
    let span = hi - lo;
    let levels = if span.is_nan() || span <= 0.0 {
        vec![0; currents.len()]
    } else {
        currents
            .iter()
            .map(|&i| {
                let x = ((i - lo) / span).clamp(0.0, 1.0) * top as f64;
                // half-up; the epsilon absorbs subtraction round-off at exact .5 ties
                (x + 0.5 + 1e-9).floor().min(top as f64) as u8
            })
            .collect()
    };
    Ok(FeatureVector { levels, bits })
}

/// Per-image min-max quantization.
pub fn quantize_rescale(currents: &[f64], bits: u8) -> Result<FeatureVector> {
    let lo = currents.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = currents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    quantize_in_range(currents, bits, lo, hi)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Range taken from each image's own read currents.
    #[default]
    PerImage,
    /// One range observed over the training set, reused for every image.
    Global,
}
