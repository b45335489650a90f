//! Per-pixel heart rates to one number: histogram, heat map, mode, and the
//! error statistics used to score estimates against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default reporting range, bpm.
pub const HR_RANGE_BPM: [u32; 2] = [42, 150];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregateConfig {
    /// Pixels black in more than this fraction of frames are excluded.
    pub max_masked_fraction: f64,
    /// The mode bin must hold at least this share of the used pixels.
    pub min_mode_fraction: f64,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        Self {
            max_masked_fraction: 0.5,
            min_mode_fraction: 0.1,
        }
    }
}

/// Row-major per-pixel rates; `None` marks an excluded pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct HrField {
    pub height: usize,
    pub width: usize,
    pub values: Vec<Option<f64>>,
}

impl HrField {
    pub fn n_used(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn n_excluded(&self) -> usize {
        self.values.len() - self.n_used()
    }
}

/// `per_pixel[k]` is `None` where no in-band peak was found.
pub fn build_field(
    height: usize,
    width: usize,
    per_pixel: &[Option<f64>],
    masked_fraction: &[f64],
    max_masked_fraction: f64,
) -> Result<HrField> {
    let n = height * width;
    for len in [per_pixel.len(), masked_fraction.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let values = per_pixel
        .iter()
        .zip(masked_fraction)
        .map(|(&hr, &m)| if m > max_masked_fraction { None } else { hr })
        .collect();
    Ok(HrField {
        height,
        width,
        values,
    })
}

/// 1-bpm bins centred on the integers of `range`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: u32,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(range: [u32; 2]) -> Self {
        Self {
            lo: range[0],
            counts: vec![0; (range[1] - range[0] + 1) as usize],
        }
    }

    pub fn of(field: &HrField, range: [u32; 2]) -> Self {
        let mut h = Self::new(range);
        for v in field.values.iter().flatten() {
            h.add(*v);
        }
        h
    }

    pub fn bin_of(&self, bpm: f64) -> usize {
        let idx = (bpm.round() - self.lo as f64).max(0.0) as usize;
        idx.min(self.counts.len() - 1)
    }

    pub fn add(&mut self, bpm: f64) {
        let b = self.bin_of(bpm);
        self.counts[b] += 1;
    }

    pub fn centre(&self, bin: usize) -> u32 {
        self.lo + bin as u32
    }

    /// `counts.len() + 1` half-integer edges.
    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|k| self.lo as f64 - 0.5 + k as f64)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fullest bin, lowest on ties.
    pub fn mode_bin(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (k, &c) in self.counts.iter().enumerate() {
            if c > 0 && best.is_none_or(|b| c > self.counts[b]) {
                best = Some(k);
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        let edges = self.bin_edges();
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", edges[k], edges[k + 1], c));
        }
        out
    }
}

pub fn mode_hr(field: &HrField) -> Result<u32> {
    mode_hr_in(field, HR_RANGE_BPM)
}

pub fn mode_hr_in(field: &HrField, range: [u32; 2]) -> Result<u32> {
    let h = Histogram::of(field, range);
    h.mode_bin().map(|b| h.centre(b)).ok_or(Error::EmptyField)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub n: usize,
    pub sd: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// Errors are `estimate - truth`. SD is the sample deviation (divisor
/// `n - 1`, zero for a single pair).
pub fn error_metrics(estimates: &[f64], truths: &[f64]) -> Result<ErrorMetrics> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            expected: estimates.len(),
            got: truths.len(),
        });
    }
    let n = estimates.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let e: Vec<f64> = estimates.iter().zip(truths).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mae = e.iter().map(|v| v.abs()).sum::<f64>() / nf;
    let rmse = (e.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
    let mean = e.iter().sum::<f64>() / nf;
    let sd = if n == 1 {
        0.0
    } else {
        (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    };
    Ok(ErrorMetrics { n, sd, mae, rmse })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramJson {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrReport {
    pub hr_bpm: u32,
    pub n_pixels_used: usize,
    pub n_excluded: usize,
    pub mode_fraction: f64,
    pub histogram: HistogramJson,
    pub metrics: Option<ErrorMetrics>,
    #[serde(skip)]
    pub heatmap: Option<HrField>,
    #[serde(skip)]
    pub range: [u32; 2],
}

/// Mode, histogram and consensus check over a finished field.
pub fn summarize(field: HrField, range: [u32; 2], config: &AggregateConfig) -> Result<HrReport> {
    let hist = Histogram::of(&field, range);
    let bin = hist.mode_bin().ok_or(Error::EmptyField)?;
    let used = hist.total();
    let fraction = hist.counts[bin] as f64 / used as f64;
    if fraction < config.min_mode_fraction {
        return Err(Error::NoConsensus {
            fraction,
            required: config.min_mode_fraction,
        });
    }
    Ok(HrReport {
        hr_bpm: hist.centre(bin),
        n_pixels_used: field.n_used(),
        n_excluded: field.n_excluded(),
        mode_fraction: fraction,
        histogram: HistogramJson {
            bin_edges: hist.bin_edges(),
            counts: hist.counts.clone(),
        },
        metrics: None,
        heatmap: Some(field),
        range,
    })
}

/// Grey level of one pixel: `range` maps linearly onto `[0, 255]`,
/// excluded pixels are 0.
pub fn heat_level(hr: Option<f64>, range: [u32; 2]) -> u8 {
    match hr {
        None => 0,
        Some(v) => {
            let (lo, hi) = (range[0] as f64, range[1] as f64);
            (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8
        }
    }
}

pub fn heatmap_levels(field: &HrField, range: [u32; 2]) -> Vec<u8> {
    field.values.iter().map(|&v| heat_level(v, range)).collect()
}
