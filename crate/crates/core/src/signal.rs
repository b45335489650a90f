//! Phase 2: per-pixel green traces and the Butterworth band-pass.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct PixelSeries {
    pub values: Vec<f64>,
    pub fps: f64,
    pub origin: (usize, usize),
}

/// Green channel of one pixel across the video. Black (masked) frames
/// contribute 0, which is simply their G value.
pub fn extract_green_series(video: &FrameSequence, pixel: (usize, usize)) -> Result<PixelSeries> {
    let (h, w) = video.dims();
    let (row, col) = pixel;
    if row >= h || col >= w {
        return Err(Error::OutOfBounds {
            row,
            col,
            height: h,
            width: w,
        });
    }
    let idx = (row * w + col) * 3 + 1;
    Ok(PixelSeries {
        values: video.frames().iter().map(|f| f.data[idx] as f64).collect(),
        fps: video.fps(),
        origin: pixel,
    })
}

/// One second-order section, `b0 + b1 z^-1 + b2 z^-2` over
/// `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2])
            / (1.0 + z_inv * self.a[0] + z2 * self.a[1])
    }

    /// Transposed direct form II over `x` starting from state `zi`.
    fn run(&self, x: &mut [f64], mut zi: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let y = b0 * *v + zi[0];
            zi[0] = b1 * *v - a1 * y + zi[1];
            zi[1] = b2 * *v - a2 * y;
            *v = y;
        }
    }

    /// State that makes the section's output constant for a constant input.
    fn steady_state(&self) -> [f64; 2] {
        // unit DC input: y = H(1), then solve the two state equations
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let g = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z1 = b2 - a2 * g;
        let z0 = b1 - a1 * g + z1;
        [z0, z1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandpassFilter {
    pub order: usize,
    pub band: [f64; 2],
    pub fs: f64,
    pub sections: Vec<Biquad>,
}

/// Butterworth band-pass of the given low-pass prototype order, via the
/// bilinear transform with both band edges prewarped.
pub fn design_bandpass(fs: f64, band: [f64; 2], order: usize) -> Result<BandpassFilter> {
    let [lo, hi] = band;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::MissingFps);
    }
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(Error::InvalidBand { lo, hi, fs });
    }
    if order == 0 {
        return Err(Error::InvalidInput(
            "filter order must be at least 1".into(),
        ));
    }
    let t = 1.0 / fs;
    let warp = |f: f64| 2.0 / t * (PI * f * t).tan();
    let (w1, w2) = (warp(lo), warp(hi));
    let bw = w2 - w1;
    let w0sq = w1 * w2;

    // analog band-pass poles: each prototype pole p maps to the roots of
    // s² - p·bw·s + w0² = 0
    let mut analog = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * bw / 2.0;
        let disc = (half * half - w0sq).sqrt();
        analog.push(half + disc);
        analog.push(half - disc);
    }
    let fs2 = 2.0 / t;
    let mut digital: Vec<Complex64> = analog.iter().map(|&s| (fs2 + s) / (fs2 - s)).collect();

    // pair conjugates; keep the upper-half-plane member of each pair
    digital.retain(|z| z.im > 1e-14);
    if digital.len() != order {
        // odd orders always give complex poles for a proper band, so this
        // only trips on degenerate bands
        return Err(Error::InvalidBand { lo, hi, fs });
    }
    digital.sort_by(|a, b| {
        a.norm()
            .partial_cmp(&b.norm())
            .unwrap()
            .then(a.arg().partial_cmp(&b.arg()).unwrap())
    });

    // unit gain at the digital image of the geometric centre
    let wc = 2.0 * (w0sq.sqrt() * t / 2.0).atan();
    let zc_inv = Complex64::from_polar(1.0, -wc);
    let sections = digital
        .iter()
        .map(|p| {
            let mut s = Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-2.0 * p.re, p.norm_sqr()],
            };
            let g = s.response(zc_inv);
            let k = 1.0 / g.norm();
            s.b = [k, 0.0, -k];
            s
        })
        .collect();
    Ok(BandpassFilter {
        order,
        band,
        fs,
        sections,
    })
}

/// How the cascade is run over a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    ZeroPhase,
    SinglePass,
}

impl BandpassFilter {
    pub fn response_at(&self, f_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f_hz / self.fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude_db(&self, f_hz: f64) -> f64 {
        20.0 * self.response_at(f_hz).norm().log10()
    }

    /// Reflection padding on each side for zero-phase runs.
    pub fn padding(&self) -> usize {
        (3 * self.order).max(12)
    }

    fn cascade(&self, x: &mut [f64]) {
        let x0 = x.first().copied().unwrap_or(0.0);
        let mut scale = x0;
        for s in &self.sections {
            let zi = s.steady_state();
            s.run(x, [zi[0] * scale, zi[1] * scale]);
            // the section's steady output for a constant x0 input
            scale *= (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
        }
    }

    pub fn apply(&self, x: &[f64], mode: FilterMode) -> Result<Vec<f64>> {
        match mode {
            FilterMode::SinglePass => {
                let mut y = x.to_vec();
                for s in &self.sections {
                    s.run(&mut y, [0.0; 2]);
                }
                Ok(y)
            }
            FilterMode::ZeroPhase => {
                let pad = self.padding();
                let n = x.len();
                if n <= pad {
                    return Err(Error::TooShort {
                        needed: pad + 1,
                        got: n,
                    });
                }
                // odd reflection about the end samples
                let mut ext = Vec::with_capacity(n + 2 * pad);
                ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
                ext.extend_from_slice(x);
                ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));
                self.cascade(&mut ext);
                ext.reverse();
                self.cascade(&mut ext);
                ext.reverse();
                Ok(ext[pad..pad + n].to_vec())
            }
        }
    }
}

pub fn filter_series(series: &PixelSeries, filter: &BandpassFilter) -> Result<PixelSeries> {
    filter_series_with(series, filter, FilterMode::ZeroPhase)
}

pub fn filter_series_with(
    series: &PixelSeries,
    filter: &BandpassFilter,
    mode: FilterMode,
) -> Result<PixelSeries> {
    if (series.fps - filter.fs).abs() > 1e-9 * filter.fs {
        return Err(Error::FsMismatch {
            series: series.fps,
            filter: filter.fs,
        });
    }
    Ok(PixelSeries {
        values: filter.apply(&series.values, mode)?,
        fps: series.fps,
        origin: series.origin,
    })
}
