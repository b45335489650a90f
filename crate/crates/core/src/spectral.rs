//! Welch power spectral density and the peak-frequency heart rate.
//!
//! Segments do not overlap by default: a series of `N` samples is truncated
//! to `L·M` and cut into `L` contiguous blocks of `M`. Each block is
//! windowed, zero-padded to the FFT length and turned into a periodogram;
//! the estimate is their mean.
//!
//! Periodograms are scaled by `1 / Σ w²(n)`, i.e. `1 / (M·U)` with
//! `U = (1/M) Σ w²(n)`. With that scaling the mean of the estimate over the
//! full two-sided grid equals the mean square of the (windowed, rescaled)
//! segment, so power is comparable across segment lengths.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest segment the estimator accepts.
pub const MIN_SEGMENT: usize = 8;

/// Segments default to spanning at least this many seconds.
pub const DEFAULT_SEGMENT_SECONDS: f64 = 10.0;

/// Grid spacing the FFT length is padded to reach, in Hz (half a bpm).
pub const TARGET_SPACING_HZ: f64 = 0.5 / 60.0;

/// In-band power below this is treated as no signal.
pub const NO_PEAK_POWER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    #[default]
    Hamming,
    Hann,
}

impl WindowKind {
    /// Symmetric window of length `m`.
    pub fn weights(self, m: usize) -> Vec<f64> {
        let denom = m.saturating_sub(1).max(1) as f64;
        (0..m)
            .map(|n| {
                let c = (2.0 * PI * n as f64 / denom).cos();
                match self {
                    WindowKind::Rectangular => 1.0,
                    WindowKind::Hamming => 0.54 - 0.46 * c,
                    WindowKind::Hann => 0.5 - 0.5 * c,
                }
            })
            .collect()
    }
}

/// Normalisation factor `U = (1/M) Σ w²(n)`.
pub fn normalization(window: &[f64]) -> f64 {
    window.iter().map(|w| w * w).sum::<f64>() / window.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WelchConfig {
    /// `L`; `None` picks `max(1, floor(duration / 10 s))`.
    pub n_segments: Option<usize>,
    pub window: WindowKind,
    /// `None` picks the smallest power of two reaching the target spacing.
    pub fft_length: Option<usize>,
    /// Fractional overlap between consecutive segments, `[0, 1)`.
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            n_segments: None,
            window: WindowKind::Hamming,
            fft_length: None,
            overlap: 0.0,
        }
    }
}

/// Resolved segment layout for a given series length and sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WelchPlan {
    pub n_segments: usize,
    pub segment_length: usize,
    pub step: usize,
    pub fft_length: usize,
}

impl WelchConfig {
    pub fn plan(&self, n: usize, fs: f64) -> Result<WelchPlan> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::MissingFps);
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidInput(format!(
                "overlap must lie in [0, 1), got {}",
                self.overlap
            )));
        }
        let l = match self.n_segments {
            Some(0) => {
                return Err(Error::InvalidInput("n_segments must be at least 1".into()));
            }
            Some(l) => l,
            None => ((n as f64 / fs / DEFAULT_SEGMENT_SECONDS).floor() as usize).max(1),
        };
        let m = n / l;
        if m < MIN_SEGMENT {
            return Err(Error::TooShort {
                needed: l * MIN_SEGMENT,
                got: n,
            });
        }
        let (step, count) = if self.overlap == 0.0 {
            (m, l)
        } else {
            let step = ((m as f64 * (1.0 - self.overlap)).round() as usize).max(1);
            (step, (n - m) / step + 1)
        };
        let fft_length = match self.fft_length {
            Some(f) if f < m => {
                return Err(Error::InvalidInput(format!(
                    "fft_length {f} shorter than segment length {m}"
                )));
            }
            Some(f) => f,
            None => {
                let want = (fs / TARGET_SPACING_HZ).ceil() as usize;
                want.max(m).next_power_of_two()
            }
        };
        Ok(WelchPlan {
            n_segments: count,
            segment_length: m,
            step,
            fft_length,
        })
    }
}

/// Cut `series` into `l` contiguous blocks after dropping the remainder.
pub fn segment(series: &[f64], l: usize) -> Result<Vec<&[f64]>> {
    if l == 0 {
        return Err(Error::InvalidInput("n_segments must be at least 1".into()));
    }
    let m = series.len() / l;
    if m < MIN_SEGMENT {
        return Err(Error::TooShort {
            needed: l * MIN_SEGMENT,
            got: series.len(),
        });
    }
    Ok(series[..l * m].chunks_exact(m).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdEstimate {
    /// `k · fs / fft_length` for every FFT bin, including the upper half.
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    /// `U` of the window used.
    pub normalization: f64,
    pub fs: f64,
}

/// Reusable Welch machinery for many series of one length and rate.
#[derive(Clone)]
pub struct WelchEstimator {
    plan: WelchPlan,
    window: Vec<f64>,
    scale: f64,
    u: f64,
    fs: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for WelchEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WelchEstimator")
            .field("plan", &self.plan)
            .field("fs", &self.fs)
            .finish()
    }
}

impl WelchEstimator {
    pub fn new(config: &WelchConfig, n: usize, fs: f64) -> Result<Self> {
        let plan = config.plan(n, fs)?;
        let window = config.window.weights(plan.segment_length);
        let energy: f64 = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(plan.fft_length);
        Ok(Self {
            u: energy / plan.segment_length as f64,
            scale: 1.0 / energy,
            window,
            plan,
            fs,
            fft,
        })
    }

    pub fn plan(&self) -> &WelchPlan {
        &self.plan
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let nfft = self.plan.fft_length;
        (0..nfft)
            .map(|k| k as f64 * self.fs / nfft as f64)
            .collect()
    }

    /// Averaged power on the full grid.
    pub fn power(&self, series: &[f64]) -> Vec<f64> {
        let p = &self.plan;
        let mut acc = vec![0.0; p.fft_length];
        let mut buf = vec![Complex64::new(0.0, 0.0); p.fft_length];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for i in 0..p.n_segments {
            let seg = &series[i * p.step..i * p.step + p.segment_length];
            for (slot, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&self.window)) {
                *slot = Complex64::new(x * w, 0.0);
            }
            buf[p.segment_length..].fill(Complex64::new(0.0, 0.0));
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, c) in acc.iter_mut().zip(&buf) {
                *a += c.norm_sqr() * self.scale;
            }
        }
        let inv_l = 1.0 / p.n_segments as f64;
        acc.iter_mut().for_each(|a| *a *= inv_l);
        acc
    }

    pub fn estimate(&self, series: &[f64]) -> Result<PsdEstimate> {
        let needed = (self.plan.n_segments - 1) * self.plan.step + self.plan.segment_length;
        if series.len() < needed {
            return Err(Error::TooShort {
                needed,
                got: series.len(),
            });
        }
        Ok(PsdEstimate {
            frequencies: self.frequencies(),
            power: self.power(series),
            normalization: self.u,
            fs: self.fs,
        })
    }

    /// Peak heart rate straight from a series, skipping the grid copy.
    pub fn estimate_hr(&self, series: &[f64], band: [f64; 2]) -> Result<f64> {
        let power = self.estimate(series)?.power;
        peak_in_band(&power, self.fs, band)
    }
}

/// Periodogram of one segment on an `fft_length`-point grid.
pub fn periodogram(segment: &[f64], window: WindowKind, fft_length: usize) -> Result<Vec<f64>> {
    let m = segment.len();
    if m == 0 {
        return Err(Error::Empty);
    }
    if fft_length < m {
        return Err(Error::InvalidInput(format!(
            "fft_length {fft_length} shorter than segment length {m}"
        )));
    }
    let w = window.weights(m);
    let energy: f64 = w.iter().map(|v| v * v).sum();
    let mut buf: Vec<Complex64> = segment
        .iter()
        .zip(&w)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(fft_length)
        .collect();
    FftPlanner::new()
        .plan_fft_forward(fft_length)
        .process(&mut buf);
    Ok(buf.iter().map(|c| c.norm_sqr() / energy).collect())
}

pub fn welch_psd(series: &[f64], fs: f64, config: &WelchConfig) -> Result<PsdEstimate> {
    WelchEstimator::new(config, series.len(), fs)?.estimate(series)
}

fn peak_in_band(power: &[f64], fs: f64, band: [f64; 2]) -> Result<f64> {
    let [lo, hi] = band;
    if !(lo >= 0.0 && lo < hi && hi <= fs / 2.0) {
        return Err(Error::InvalidBand { lo, hi, fs });
    }
    let nfft = power.len();
    let df = fs / nfft as f64;
    let eps = 1e-9 * df;
    let first = ((lo - eps) / df).ceil().max(0.0) as usize;
    let last = (((hi + eps) / df).floor() as usize).min(nfft / 2);
    let mut best: Option<(usize, f64)> = None;
    for k in first..=last {
        if best.is_none_or(|(_, p)| power[k] > p) {
            best = Some((k, power[k]));
        }
    }
    match best {
        Some((k, p)) if p >= NO_PEAK_POWER => Ok(60.0 * k as f64 * df),
        _ => Err(Error::NoPeak),
    }
}

/// `60 · argmax` of the in-band power, lower frequency on ties.
pub fn estimate_hr(psd: &PsdEstimate, band: [f64; 2]) -> Result<f64> {
    peak_in_band(&psd.power, psd.fs, band)
}
