//! Accuracy, throughput, energy efficiency and area accounting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::preprocess::{reservoir_size, Dimension, PreprocessSpec};
use crate::reservoir::ImageCost;

/// Longest pulse train an `n × m` image produces under `spec`, in slots.
pub fn longest_train(spec: &PreprocessSpec, n: usize, m: usize) -> usize {
    let longest_row = match spec.dimension {
        Dimension::OneD => m,
        Dimension::TwoD => m.max(n),
    };
    longest_row.div_ceil(spec.sections)
}

/// Images per second limited by pulse slots: write slots plus one read slot.
pub fn throughput(spec: &PreprocessSpec, n: usize, m: usize, params: &DeviceParams) -> f64 {
    let slots = longest_train(spec, n, m) + 1;
    1.0 / (slots as f64 * params.t_pulse)
}

/// Images per joule of reservoir energy (write plus read).
pub fn energy_efficiency(total_energy: f64, images: usize) -> Result<f64> {
    if total_energy.is_nan() || total_energy <= 0.0 {
        return Err(Error::invalid("energy", format!("must be > 0, got {total_energy}")));
    }
    Ok(images as f64 / total_energy)
}

/// Area proxy: number of reservoir devices.
pub fn area(spec: &PreprocessSpec, n: usize, m: usize) -> usize {
    reservoir_size(spec, n, m)
}

/// Running sum of per-image costs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTally {
    pub images: usize,
    pub write_energy: f64,
    pub read_energy: f64,
}

impl CostTally {
    pub fn add(&mut self, cost: &ImageCost) {
        self.images += 1;
        self.write_energy += cost.write_energy;
        self.read_energy += cost.read_energy;
    }

    pub fn merge(&mut self, other: &CostTally) {
        self.images += other.images;
        self.write_energy += other.write_energy;
        self.read_energy += other.read_energy;
    }

    pub fn total_energy(&self) -> f64 {
        self.write_energy + self.read_energy
    }

    pub fn write_fraction(&self) -> f64 {
        let total = self.total_energy();
        if total > 0.0 {
            self.write_energy / total
        } else {
            0.0
        }
    }

    pub fn energy_per_image(&self) -> f64 {
        if self.images == 0 {
            0.0
        } else {
            self.total_energy() / self.images as f64
        }
    }

    pub fn images_per_joule(&self) -> Result<f64> {
        energy_efficiency(self.total_energy(), self.images)
    }
}

/// Outcome of one configuration. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: String,
    pub dimension: Dimension,
    pub parity: bool,
    pub sections: usize,
    pub threshold: u8,
    pub bits: u8,
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub images_per_second: f64,
    pub images_per_joule: f64,
    pub energy_per_image: f64,
    pub write_energy_fraction: f64,
    pub device_count: usize,
    pub readout_weights: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub final_train_loss: f64,
}

impl ExperimentReport {
    pub fn spec(&self) -> PreprocessSpec {
        PreprocessSpec {
            dimension: self.dimension,
            parity: self.parity,
            sections: self.sections,
            threshold: self.threshold,
        }
    }
}

pub fn write_reports_csv<W: Write>(reports: &[ExperimentReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_reports_csv<R: std::io::Read>(input: R) -> Result<Vec<ExperimentReport>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Ordinary least-squares fit `y = a + b·x`; returns `(a, b, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (intercept, slope, r2)
}
