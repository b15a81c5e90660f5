//! Synthetic ensemble of yearly temperature-like maps.
//!
//! Each of `members` ensemble members contributes one map per year. A map is a
//! smooth warming pattern scaled by the year, an extra signal confined to a
//! rectangular region of interest, and independent per-member noise:
//!
//! ```text
//! raw(i, t) = trend · (t / T) · pattern + roi_signal · (t / T) · roi_mask + noise(i, t)
//! ```
//!
//! Every pixel is then standardized over all samples. Classes are contiguous,
//! equal-width bins of years.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};
use crate::rng::{self, stream};
use crate::tensor::Tensor;

/// Half-open rectangle of grid indices: rows `row_start..row_end`, columns `col_start..col_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roi {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl Roi {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_start..self.row_end).contains(&row) && (self.col_start..self.col_end).contains(&col)
    }

    pub fn len(&self) -> usize {
        (self.row_end - self.row_start) * (self.col_end - self.col_start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Boolean mask over a `(rows, cols)` map in row-major order.
    pub fn mask(&self, rows: usize, cols: usize) -> Vec<bool> {
        (0..rows * cols).map(|k| self.contains(k / cols, k % cols)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Map extent `(v, h)`.
    pub grid: (usize, usize),
    pub years: usize,
    pub members: usize,
    pub classes: usize,
    /// Calendar year of year index 0; only used to label class centres.
    pub start_year: i32,
    pub trend_amplitude: f64,
    pub roi: Roi,
    pub roi_signal: f64,
    pub noise_sigma: f64,
    /// Gaussian smoothing length (in pixels) applied to the noise; 0 disables it.
    pub noise_correlation: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            grid: (36, 24),
            years: 160,
            members: 20,
            classes: 20,
            start_year: 1920,
            trend_amplitude: 1.0,
            roi: Roi {
                row_start: 8,
                row_end: 16,
                col_start: 4,
                col_end: 10,
            },
            roi_signal: 20.0,
            noise_sigma: 1.0,
            noise_correlation: 0.0,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let (v, h) = self.grid;
        if v == 0 || h == 0 {
            return Err(Error::Config(format!("grid must be non-empty, got {v}x{h}")));
        }
        if self.members == 0 || self.years == 0 || self.classes == 0 {
            return Err(Error::Config("years, members and classes must be positive".into()));
        }
        if self.years < self.classes {
            return Err(Error::Config(format!(
                "need at least one year per class: years={} < classes={}",
                self.years, self.classes
            )));
        }
        if self.years % self.classes != 0 {
            return Err(Error::Config(format!(
                "classes ({}) must divide years ({}) into equal bins",
                self.classes, self.years
            )));
        }
        let r = &self.roi;
        if r.row_start >= r.row_end || r.col_start >= r.col_end || r.row_end > v || r.col_end > h {
            return Err(Error::Config(format!("roi {r:?} must be a non-empty rectangle inside the {v}x{h} grid")));
        }
        if !(self.noise_sigma > 0.0) {
            return Err(Error::Config("noise_sigma must be > 0".into()));
        }
        if !(self.noise_correlation >= 0.0) {
            return Err(Error::Config("noise_correlation must be >= 0".into()));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> usize {
        self.years / self.classes
    }

    pub fn pixels(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn samples(&self) -> usize {
        self.members * self.years
    }

    /// Representative year of every class: the bin start plus half a bin.
    pub fn central_years(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.classes)
            .map(|c| f64::from(self.start_year) + (c * w) as f64 + w as f64 / 2.0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    /// `(members · years, v, h)`, standardized per pixel.
    pub inputs: Tensor,
    pub year_index: Vec<usize>,
    pub class_label: Vec<usize>,
    pub member_index: Vec<usize>,
    pub split: Vec<Split>,
    pub central_year: Vec<f64>,
}

pub fn class_of(year_index: usize, config: &DatasetConfig) -> Result<usize> {
    if year_index >= config.years {
        return Err(Error::Config(format!(
            "year index {year_index} out of range 0..{}",
            config.years
        )));
    }
    if config.classes == 0 || config.years < config.classes {
        return Err(Error::Config("degenerate class configuration".into()));
    }
    Ok(year_index / config.bin_width())
}

/// Smooth low-frequency warming pattern: a constant plus two cosine modes with seeded phases.
fn global_pattern(config: &DatasetConfig) -> Vec<f64> {
    let (v, h) = config.grid;
    let mut rng = rng::rng_for(config.seed, &[stream::DATA_PATTERN]);
    let k1 = rng.random_range(1..=2) as f64;
    let k2 = rng.random_range(1..=2) as f64;
    let p1 = rng.random_range(0.0..2.0 * PI);
    let p2 = rng.random_range(0.0..2.0 * PI);
    (0..v * h)
        .map(|k| {
            let (r, c) = ((k / h) as f64, (k % h) as f64);
            1.0 + 0.35 * (2.0 * PI * k1 * r / v as f64 + p1).cos() + 0.35 * (2.0 * PI * k2 * c / h as f64 + p2).cos()
        })
        .collect()
}

fn gaussian_kernel(length: f64) -> Vec<f64> {
    let radius = (3.0 * length).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d as f64).powi(2) / (2.0 * length * length)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian smoothing with clamped borders, rescaled back to unit variance.
fn smooth_noise(field: &mut [f64], rows: usize, cols: usize, length: f64) {
    let kernel = gaussian_kernel(length);
    let radius = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; field.len()];
    for r in 0..rows {
        for c in 0..cols {
            tmp[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let cc = (c as isize + k as isize - radius).clamp(0, cols as isize - 1) as usize;
                    w * field[r * cols + cc]
                })
                .sum();
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            field[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let rr = (r as isize + k as isize - radius).clamp(0, rows as isize - 1) as usize;
                    w * tmp[rr * cols + c]
                })
                .sum();
        }
    }
    // variance of a 2-D separable smoothing of unit white noise, ignoring borders
    let var: f64 = kernel.iter().map(|w| w * w).sum::<f64>().powi(2);
    let scale = var.sqrt().recip();
    field.iter_mut().for_each(|v| *v *= scale);
}

/// Raw, unstandardized maps `(members · years, v, h)`; sample index is `member · years + year`.
pub fn generate_raw(config: &DatasetConfig) -> Result<Tensor> {
    config.validate()?;
    let (v, h) = config.grid;
    let d = v * h;
    let pattern = global_pattern(config);
    let mask = config.roi.mask(v, h);
    let mut data = Vec::with_capacity(config.samples() * d);
    for member in 0..config.members {
        for year in 0..config.years {
            let frac = year as f64 / config.years as f64;
            let mut rng = rng::rng_for(config.seed, &[stream::DATA_NOISE, member as u64, year as u64]);
            let mut noise: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            if config.noise_correlation > 0.0 {
                smooth_noise(&mut noise, v, h, config.noise_correlation);
            }
            data.extend((0..d).map(|k| {
                let roi = if mask[k] { config.roi_signal } else { 0.0 };
                (config.trend_amplitude * pattern[k] + roi) * frac + config.noise_sigma * noise[k]
            }));
        }
    }
    Tensor::new(vec![config.samples(), v, h], data)
}

/// Standard deviations below this are treated as zero; such pixels standardize to 0.
pub const MIN_STD: f64 = 1e-12;

/// Per-pixel standardization over the leading (sample) axis, using the population std.
pub fn standardize(inputs: &Tensor) -> Tensor {
    let n = inputs.shape()[0];
    let d = inputs.len() / n;
    let x = inputs.data();
    let mut out = vec![0.0; x.len()];
    for p in 0..d {
        let mean = (0..n).map(|s| x[s * d + p]).sum::<f64>() / n as f64;
        let var = (0..n).map(|s| (x[s * d + p] - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        for s in 0..n {
            out[s * d + p] = if std < MIN_STD { 0.0 } else { (x[s * d + p] - mean) / std };
        }
    }
    Tensor::new(inputs.shape().to_vec(), out).expect("same shape")
}

pub fn generate(config: &DatasetConfig) -> Result<Dataset> {
    let raw = generate_raw(config)?;
    let inputs = standardize(&raw);
    let n = config.samples();
    let year_index: Vec<usize> = (0..n).map(|s| s % config.years).collect();
    let class_label = year_index
        .iter()
        .map(|&y| class_of(y, config))
        .collect::<Result<Vec<_>>>()?;
    let member_index = (0..n).map(|s| s / config.years).collect();
    let dataset = Dataset {
        config: config.clone(),
        inputs,
        year_index,
        class_label,
        member_index,
        split: vec![Split::Train; n],
        central_year: config.central_years(),
    };
    Ok(split(dataset, rng::derive_seed(config.seed, &[stream::SPLIT])))
}

/// Random partition into exactly 20% test, 16% validation and the remaining train samples.
pub fn split(mut dataset: Dataset, seed: u64) -> Dataset {
    let n = dataset.len();
    let n_test = (0.20 * n as f64).round() as usize;
    let n_val = (0.16 * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_for(seed, &[]));
    for (rank, &s) in order.iter().enumerate() {
        dataset.split[s] = if rank < n_test {
            Split::Test
        } else if rank < n_test + n_val {
            Split::Val
        } else {
            Split::Train
        };
    }
    dataset
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.year_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn map_shape(&self) -> [usize; 2] {
        [self.config.grid.0, self.config.grid.1]
    }

    pub fn sample(&self, index: usize) -> Tensor {
        let d = self.config.pixels();
        let data = self.inputs.data()[index * d..(index + 1) * d].to_vec();
        Tensor::new(self.map_shape().to_vec(), data).expect("map shape")
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    /// Calendar year of a sample.
    pub fn year(&self, index: usize) -> f64 {
        f64::from(self.config.start_year) + self.year_index[index] as f64
    }

    /// `(min, max)` over every standardized input value.
    pub fn value_range(&self) -> (f64, f64) {
        (self.inputs.min(), self.inputs.max())
    }

    pub fn roi_mask(&self) -> Vec<bool> {
        self.config.roi.mask(self.config.grid.0, self.config.grid.1)
    }
}

const DATASET_MAGIC: &[u8; 8] = b"XAIBDSET";
const FORMAT_VERSION: u32 = 1;

/// Sidecar manifest written next to the binary dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    pub config_hash: String,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

impl Dataset {
    /// Binary layout: 16-byte header (8-byte magic, u32 version, u32 reserved), u32 dims
    /// `(I, T, v, h, C)`, f64 inputs, u32 year/class/member arrays, f64 central years, u8 split tags.
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut w = ByteWriter::with_header(DATASET_MAGIC, FORMAT_VERSION);
        for dim in [c.members, c.years, c.grid.0, c.grid.1, c.classes] {
            w.u32(dim as u32);
        }
        w.f64s(self.inputs.data());
        for arr in [&self.year_index, &self.class_label, &self.member_index] {
            arr.iter().for_each(|&v| w.u32(v as u32));
        }
        w.f64s(&self.central_year);
        w.bytes(&self.split.iter().map(|s| s.code()).collect::<Vec<_>>());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8], config: DatasetConfig, path: &Path) -> Result<Self> {
        let mut r = ByteReader::with_header(bytes, DATASET_MAGIC, FORMAT_VERSION, path)?;
        let dims: Vec<usize> = (0..5).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
        let (members, years, v, h, classes) = (dims[0], dims[1], dims[2], dims[3], dims[4]);
        if (members, years, (v, h), classes) != (config.members, config.years, config.grid, config.classes) {
            return Err(Error::artifact(path, "dimensions disagree with the manifest"));
        }
        let n = members * years;
        let inputs = Tensor::new(vec![n, v, h], r.f64s(n * v * h)?)?;
        let mut arrays = Vec::with_capacity(3);
        for _ in 0..3 {
            arrays.push((0..n).map(|_| r.u32().map(|x| x as usize)).collect::<Result<Vec<_>>>()?);
        }
        let central_year = r.f64s(classes)?;
        let split = r
            .bytes(n)?
            .iter()
            .map(|&b| Split::from_code(b).ok_or_else(|| Error::artifact(path, format!("bad split tag {b}"))))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let mut arrays = arrays.into_iter();
        Ok(Self {
            config,
            inputs,
            year_index: arrays.next().unwrap(),
            class_label: arrays.next().unwrap(),
            member_index: arrays.next().unwrap(),
            split,
            central_year,
        })
    }

    /// Writes the binary file and its JSON manifest.
    pub fn write(&self, path: &Path, config_hash: &str) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())?;
        let manifest = DatasetManifest {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            config_hash: config_hash.to_string(),
        };
        crate::io::write_json(&manifest_path(path), &manifest)
    }

    pub fn read(path: &Path) -> Result<(Self, DatasetManifest)> {
        let manifest: DatasetManifest = crate::io::read_json(&manifest_path(path))?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let dataset = Self::from_bytes(&bytes, manifest.config.clone(), path)?;
        Ok((dataset, manifest))
    }
}
