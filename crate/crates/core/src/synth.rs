//! Synthetic pulsing-skin videos with known mask and heart rate.
//!
//! A skin-toned patch sits on a flat background. Its green channel carries
//! `A·sin(2π·(hr/60)·t)` and its red channel half that, so the in-band
//! spectral peak of every patch pixel is exactly at the chosen rate. The
//! patch may translate; with `motion_extent` set it bounces back and forth
//! along each axis instead of leaving the frame.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{from_u8, to_u8, FrameSequence, Mask, RgbFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Patch {
    Rect {
        top: i64,
        left: i64,
        height: i64,
        width: i64,
    },
    Disk {
        row: f64,
        col: f64,
        radius: f64,
    },
}

impl Patch {
    fn contains(&self, r: i64, c: i64, dy: i64, dx: i64) -> bool {
        match *self {
            Patch::Rect {
                top,
                left,
                height,
                width,
            } => {
                let (r, c) = (r - dy, c - dx);
                r >= top && r < top + height && c >= left && c < left + width
            }
            Patch::Disk { row, col, radius } => {
                let (y, x) = ((r - dy) as f64 - row, (c - dx) as f64 - col);
                y * y + x * x <= radius * radius
            }
        }
    }

    /// Inclusive-exclusive row and column extent when shifted.
    fn bounds(&self, dy: i64, dx: i64) -> (f64, f64, f64, f64) {
        match *self {
            Patch::Rect {
                top,
                left,
                height,
                width,
            } => (
                (top + dy) as f64,
                (top + dy + height) as f64,
                (left + dx) as f64,
                (left + dx + width) as f64,
            ),
            Patch::Disk { row, col, radius } => (
                row + dy as f64 - radius,
                row + dy as f64 + radius + 1.0,
                col + dx as f64 - radius,
                col + dx as f64 + radius + 1.0,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub duration: f64,
    pub hr_bpm: f64,
    pub pulse_amplitude: f64,
    pub patch: Patch,
    /// (rows, cols) per frame.
    pub motion: [f64; 2],
    /// Bounce between 0 and this displacement instead of moving linearly.
    pub motion_extent: Option<u32>,
    pub noise_std: f64,
    pub noise_on_background: bool,
    pub background: [f64; 3],
    pub skin: [f64; 3],
    /// Additive brightness ramp on the patch, channel units per second.
    pub drift_per_s: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            fps: 30.0,
            duration: 20.0,
            hr_bpm: 69.0,
            pulse_amplitude: 2.0 / 255.0,
            patch: Patch::Rect {
                top: 20,
                left: 20,
                height: 24,
                width: 24,
            },
            motion: [0.0, 0.0],
            motion_extent: None,
            noise_std: 1.0 / 255.0,
            noise_on_background: false,
            background: [0.25, 0.30, 0.35],
            skin: [0.78, 0.57, 0.44],
            drift_per_s: 0.0,
        }
    }
}

fn bounce(travel: f64, extent: u32) -> f64 {
    if extent == 0 {
        return 0.0;
    }
    let e = extent as f64;
    let x = travel.rem_euclid(2.0 * e);
    if x > e {
        2.0 * e - x
    } else {
        x
    }
}

impl SynthSpec {
    pub fn n_frames(&self) -> usize {
        (self.duration * self.fps).round() as usize
    }

    /// Integer (row, col) displacement of the patch at `frame`.
    pub fn offset(&self, frame: usize) -> (i64, i64) {
        let k = frame as f64;
        let axis = |m: f64| -> i64 {
            let d = match self.motion_extent {
                None => m * k,
                Some(e) => m.signum() * bounce(m.abs() * k, e),
            };
            d.round() as i64
        };
        (axis(self.motion[0]), axis(self.motion[1]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidInput(
                "frame dimensions must be positive".into(),
            ));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::MissingFps);
        }
        if !(self.duration.is_finite() && self.duration > 0.0) || self.n_frames() == 0 {
            return Err(Error::InvalidInput(
                "duration must give at least one frame".into(),
            ));
        }
        if !(42.0..=150.0).contains(&self.hr_bpm) {
            return Err(Error::InvalidInput(format!(
                "hr_bpm must lie in [42, 150], got {}",
                self.hr_bpm
            )));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.pulse_amplitude) || !finite_nonneg(self.noise_std) {
            return Err(Error::InvalidInput(
                "amplitude and noise must be non-negative".into(),
            ));
        }
        if self
            .background
            .iter()
            .chain(&self.skin)
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::InvalidInput("colours must lie in [0, 1]".into()));
        }
        if self.motion.iter().any(|m| !m.is_finite()) || !self.drift_per_s.is_finite() {
            return Err(Error::InvalidInput(
                "motion and drift must be finite".into(),
            ));
        }
        for k in 0..self.n_frames() {
            let (dy, dx) = self.offset(k);
            let (r0, r1, c0, c1) = self.patch.bounds(dy, dx);
            if r0 < 0.0 || c0 < 0.0 || r1 > self.height as f64 || c1 > self.width as f64 {
                return Err(Error::PatchOutOfBounds { frame: k });
            }
        }
        Ok(())
    }
}

pub fn ground_truth_mask(spec: &SynthSpec, frame_index: usize) -> Result<Mask> {
    let n = spec.n_frames();
    if frame_index >= n {
        return Err(Error::OutOfRange {
            index: frame_index,
            count: n,
        });
    }
    let (dy, dx) = spec.offset(frame_index);
    let (r0, r1, c0, c1) = spec.patch.bounds(dy, dx);
    if r0 < 0.0 || c0 < 0.0 || r1 > spec.height as f64 || c1 > spec.width as f64 {
        return Err(Error::PatchOutOfBounds { frame: frame_index });
    }
    let mut m = Mask::new(spec.height, spec.width, false);
    for r in 0..spec.height {
        for c in 0..spec.width {
            m.set(r, c, spec.patch.contains(r as i64, c as i64, dy, dx));
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub frames: FrameSequence,
    pub masks: Vec<Mask>,
    pub hr_bpm: f64,
}

fn quantize(v: f64) -> f32 {
    from_u8(to_u8(v as f32))
}

/// Frame `k` draws its noise from stream `k` of a ChaCha generator seeded
/// with `seed`, so frames can be built in any order.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthVideo> {
    spec.validate()?;
    let n = spec.n_frames();
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let built: Vec<(RgbFrame, Mask)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mask = ground_truth_mask(spec, k)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let t = k as f64 / spec.fps;
            let pulse =
                spec.pulse_amplitude * (2.0 * std::f64::consts::PI * spec.hr_bpm / 60.0 * t).sin();
            let drift = spec.drift_per_s * t;
            let skin = [
                spec.skin[0] + 0.5 * pulse + drift,
                spec.skin[1] + pulse + drift,
                spec.skin[2] + drift,
            ];
            let mut frame = RgbFrame::black(spec.height, spec.width);
            for (idx, px) in frame.data.chunks_exact_mut(3).enumerate() {
                let on = mask.data[idx];
                let base = if on { skin } else { spec.background };
                let noisy = on || spec.noise_on_background;
                for ch in 0..3 {
                    let e = if noisy && spec.noise_std > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    px[ch] = quantize(base[ch] + e);
                }
            }
            Ok((frame, mask))
        })
        .collect::<Result<_>>()?;
    let (frames, masks): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    Ok(SynthVideo {
        frames: FrameSequence::new(spec.height, spec.width, spec.fps, frames)?,
        masks,
        hr_bpm: spec.hr_bpm,
    })
}
