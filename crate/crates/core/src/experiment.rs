//! End-to-end runs: load data, extract reservoir features once, train the
//! readout, evaluate, and write reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, GridPoint};
use crate::dataset::{load_idx, GrayImage, LabeledImageSet};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::metrics::{self, write_reports_csv, CostTally, ExperimentReport};
use crate::preprocess::{reservoir_size, Dimension, PreprocessSpec};
use crate::readout::{FeatureSet, ReadoutModel, Samples, TrainTrace};
use crate::reservoir::{quantize_in_range, quantize_rescale, FeatureVector, ReservoirBank, Scaling};

const TEST_SUBSET_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Train and test splits sharing one image shape.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: LabeledImageSet,
    pub test: LabeledImageSet,
    pub rows: usize,
    pub cols: usize,
}

impl ExperimentData {
    pub fn new(train: LabeledImageSet, test: LabeledImageSet) -> Result<Self> {
        let (rows, cols) = train.shape().ok_or(Error::Empty("training set"))?;
        let same_shape = |set: &LabeledImageSet| set.images.iter().all(|im| im.rows() == rows && im.cols() == cols);
        if test.is_empty() {
            return Err(Error::Empty("test set"));
        }
        if !same_shape(&train) || !same_shape(&test) {
            return Err(Error::Config("train and test images must share one shape".into()));
        }
        Ok(Self {
            train,
            test,
            rows,
            cols,
        })
    }

    /// Load the configured files and apply the seeded subsets.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let paths = cfg.data_paths()?;
        let mut train = load_idx(&paths.train_images, &paths.train_labels)?;
        let mut test = load_idx(&paths.test_images, &paths.test_labels)?;
        if let Some(n) = cfg.data.subset_train {
            train = train.subset(n, cfg.seed)?;
        }
        if let Some(n) = cfg.data.subset_test {
            test = test.subset(n, cfg.seed ^ TEST_SUBSET_SALT)?;
        }
        for &l in train.labels.iter().chain(&test.labels) {
            if l as usize >= cfg.data.classes {
                return Err(Error::LabelOutOfRange {
                    label: l as usize,
                    classes: cfg.data.classes,
                });
            }
        }
        Self::new(train, test)
    }
}

/// Quantization range policy resolved for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    PerImage,
    Fixed { lo: f64, hi: f64 },
}

fn quantize(currents: &[f64], bits: u8, range: Range) -> Result<FeatureVector> {
    match range {
        Range::PerImage => quantize_rescale(currents, bits),
        Range::Fixed { lo, hi } => quantize_in_range(currents, bits, lo, hi),
    }
}

/// Smallest and largest read current over every device and image.
pub fn current_range(images: &[GrayImage], spec: &PreprocessSpec, params: &DeviceParams) -> Result<(f64, f64)> {
    let (n, m) = images
        .first()
        .map(|im| (im.rows(), im.cols()))
        .ok_or(Error::Empty("images"))?;
    images
        .par_iter()
        .map_init(
            || ReservoirBank::for_shape(*params, spec, n, m),
            |bank, im| {
                let bank = bank.as_mut().map_err(|e| Error::Config(e.to_string()))?;
                let (c, _) = bank.process(im, spec)?;
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok((lo, hi))
            },
        )
        .collect::<Result<Vec<_>>>()
        .map(|v| {
            v.into_iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| {
                    (a.min(lo), b.max(hi))
                })
        })
}

/// Features for a whole image set plus the reservoir energy spent producing them.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub features: FeatureSet,
    pub cost: CostTally,
}

/// Simulate every image once. Work is spread over images; sums are folded in image order.
pub fn extract_features(
    set: &LabeledImageSet,
    spec: &PreprocessSpec,
    bits: u8,
    params: &DeviceParams,
    range: Range,
) -> Result<Extraction> {
    let (n, m) = set.shape().ok_or(Error::Empty("images"))?;
    ReservoirBank::for_shape(*params, spec, n, m)?;
    let per_image: Vec<_> = set
        .images
        .par_iter()
        .map_init(
            || ReservoirBank::for_shape(*params, spec, n, m).expect("validated above"),
            |bank, im| {
                let (currents, cost) = bank.process(im, spec)?;
                Ok((quantize(&currents, bits, range)?, cost))
            },
        )
        .collect::<Result<_>>()?;
    let mut features = FeatureSet::new(reservoir_size(spec, n, m), bits);
    let mut cost = CostTally::default();
    for ((fv, c), &label) in per_image.iter().zip(&set.labels) {
        features.push(fv, label as usize)?;
        cost.add(c);
    }
    Ok(Extraction { features, cost })
}

/// Samples that re-run the reservoir on every access instead of caching.
pub struct LiveFeatures<'a> {
    pub set: &'a LabeledImageSet,
    pub spec: PreprocessSpec,
    pub bits: u8,
    pub params: DeviceParams,
    pub range: Range,
}

impl Samples for LiveFeatures<'_> {
    fn len(&self) -> usize {
        self.set.len()
    }

    fn dim(&self) -> usize {
        let (n, m) = self.set.shape().unwrap_or((0, 0));
        reservoir_size(&self.spec, n, m)
    }

    fn fill(&self, i: usize, out: &mut [f64]) {
        let im = &self.set.images[i];
        let mut bank = ReservoirBank::for_shape(self.params, &self.spec, im.rows(), im.cols()).expect("valid spec");
        let (currents, _) = bank.process(im, &self.spec).expect("valid image");
        let fv = quantize(&currents, self.bits, self.range).expect("valid bits");
        out.copy_from_slice(&fv.values());
    }

    fn label(&self, i: usize) -> usize {
        self.set.labels[i] as usize
    }
}

/// Everything produced by one grid point.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub model: ReadoutModel,
    pub trace: TrainTrace,
}

pub fn run_point(data: &ExperimentData, cfg: &ExperimentConfig, point: &GridPoint) -> Result<RunOutput> {
    let spec = point.spec;
    spec.validate_for_shape(data.rows, data.cols)?;
    let params = cfg.device;
    let range = match cfg.quantize.scaling {
        Scaling::PerImage => Range::PerImage,
        Scaling::Global => {
            let (lo, hi) = current_range(&data.train.images, &spec, &params)?;
            Range::Fixed { lo, hi }
        }
    };
    let train = extract_features(&data.train, &spec, point.bits, &params, range)?;
    let test = extract_features(&data.test, &spec, point.bits, &params, range)?;

    let tcfg = cfg.train_config();
    let mut model = ReadoutModel::init(train.features.dim(), cfg.data.classes, cfg.seed)?;
    let trace = model.train(&train.features, &tcfg)?;
    let accuracy = model.evaluate(&test.features)?;
    let train_accuracy = model.evaluate(&train.features)?;

    let report = ExperimentReport {
        method: spec.method(),
        dimension: spec.dimension,
        parity: spec.parity,
        sections: spec.sections,
        threshold: spec.threshold,
        bits: point.bits,
        accuracy,
        train_accuracy,
        images_per_second: metrics::throughput(&spec, data.rows, data.cols, &params),
        images_per_joule: test.cost.images_per_joule()?,
        energy_per_image: test.cost.energy_per_image(),
        write_energy_fraction: test.cost.write_fraction(),
        device_count: metrics::area(&spec, data.rows, data.cols),
        readout_weights: model.param_count(),
        train_count: data.train.len(),
        test_count: data.test.len(),
        epochs: tcfg.epochs,
        learning_rate: tcfg.learning_rate,
        seed: cfg.seed,
        final_train_loss: trace.epoch_loss.last().copied().unwrap_or(trace.initial_loss),
    };
    Ok(RunOutput { report, model, trace })
}

/// Run every grid point, at most `cfg.workers` at a time. Output order follows the grid.
pub fn sweep(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    let grid = cfg.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| grid.par_iter().map(|p| run_point(data, cfg, p)).collect())
}

/// Accuracy change from switching one preprocessing option on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    /// `parity` or `2d`.
    pub change: String,
    pub base_method: String,
    pub sections: usize,
    pub bits: u8,
    pub base_accuracy: f64,
    pub accuracy: f64,
    pub gain: f64,
}

/// Pairwise gains of parity over no parity and of 2D over 1D.
pub fn deltas(reports: &[ExperimentReport]) -> Vec<Delta> {
    let key = |r: &ExperimentReport| (r.dimension, r.parity, r.sections, r.bits);
    let by_key: BTreeMap<_, &ExperimentReport> = reports.iter().map(|r| (key(r), r)).collect();
    let mut out = Vec::new();
    for (&(dim, parity, k, bits), base) in &by_key {
        let mut push = |change: &str, other: Option<&&ExperimentReport>| {
            if let Some(o) = other {
                out.push(Delta {
                    change: change.into(),
                    base_method: base.method.clone(),
                    sections: k,
                    bits,
                    base_accuracy: base.accuracy,
                    accuracy: o.accuracy,
                    gain: o.accuracy - base.accuracy,
                });
            }
        };
        if !parity {
            push("parity", by_key.get(&(dim, true, k, bits)));
        }
        if dim == Dimension::OneD {
            push("2d", by_key.get(&(Dimension::TwoD, parity, k, bits)));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct Summary<'a> {
    reports: &'a [ExperimentReport],
    deltas: Vec<Delta>,
}

/// Row of the plot-ready tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub method: String,
    pub sections: usize,
    pub bits: u8,
    pub accuracy: f64,
    pub images_per_second: f64,
    pub images_per_joule: f64,
    pub device_count: usize,
}

pub const PLOT_TABLES: [&str; 4] = [
    "accuracy_by_method.csv",
    "accuracy_vs_throughput.csv",
    "accuracy_vs_efficiency.csv",
    "accuracy_vs_area.csv",
];

/// Plot rows sorted by accuracy, best first; ties keep input order.
pub fn plot_rows(reports: &[ExperimentReport]) -> Vec<PlotRow> {
    let mut rows: Vec<PlotRow> = reports
        .iter()
        .map(|r| PlotRow {
            method: r.method.clone(),
            sections: r.sections,
            bits: r.bits,
            accuracy: r.accuracy,
            images_per_second: r.images_per_second,
            images_per_joule: r.images_per_joule,
            device_count: r.device_count,
        })
        .collect();
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    rows
}

pub fn emit_plot_tables(reports: &[ExperimentReport], dir: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Empty("reports"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = plot_rows(reports);
    for name in PLOT_TABLES {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn weights_name(r: &ExperimentReport) -> String {
    format!("{}_k{}_b{}.csv", r.method.replace('+', "_"), r.sections, r.bits)
}

/// Write `reports.csv`, `reports.json`, the plot tables and `weights/*.csv` into `dir`.
pub fn write_outputs(outputs: &[RunOutput], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let reports: Vec<ExperimentReport> = outputs.iter().map(|o| o.report.clone()).collect();

    let csv_path = dir.join("reports.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_reports_csv(&reports, file)?;

    let json_path = dir.join("reports.json");
    let summary = Summary {
        reports: &reports,
        deltas: deltas(&reports),
    };
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;

    emit_plot_tables(&reports, &dir.join("plots"))?;

    let wdir = dir.join("weights");
    fs::create_dir_all(&wdir).map_err(|e| Error::io(&wdir, e))?;
    for o in outputs {
        o.model.save(&wdir.join(weights_name(&o.report)))?;
    }
    Ok(())
}
