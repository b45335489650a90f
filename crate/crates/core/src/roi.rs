//! Phase 1: slide a 3-frame window over the video, encode every pixel's
//! I-channel neighbourhood with the coupled lattice, transform the encoder
//! output with the short CWT and keep the pixels whose real sum is positive.
//!
//! The encoder output of a pixel is never constant even when the pixel is:
//! the reset lattice has its own transient. By default the CWT therefore
//! sees the negated distance between the window's trajectory and the
//! trajectory the same neurons would follow had the window's first frame
//! simply been held. A still neighbourhood gives exactly zero, any change
//! gives a positive real sum under the odd complex-Gaussian wavelet.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccnn::{encode_window, run_lattice, CcnnParams, Neighborhood};
use crate::colorspace::i_plane;
use crate::cwt::{classify_pixel, CwtKernel, RoiDecision, WaveletSpec};
use crate::error::{Error, Result};
use crate::frame::{FrameSequence, Mask, Plane, RgbFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiEncoding {
    /// `-|Y(n) - Y_held(n)|`, where `Y_held` replays the first frame.
    StaticReference,
    /// The encoder output itself.
    RawOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiScope {
    /// Each pixel is encoded by its own reset 3×3 lattice; pixels outside
    /// the image read as zero.
    Patch,
    /// One reset lattice spans the whole frame for each window.
    Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoiOptions {
    pub encoding: RoiEncoding,
    pub scope: RoiScope,
    pub threshold: f64,
    /// 3×3 morphological opening of every mask.
    pub cleanup: bool,
}

impl Default for RoiOptions {
    fn default() -> Self {
        Self {
            encoding: RoiEncoding::StaticReference,
            scope: RoiScope::Patch,
            threshold: 0.0,
            cleanup: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    pub mask: Mask,
    pub window_index: usize,
}

/// The input video with every non-ROI pixel set to black, plus the mask
/// that produced each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSyntheticVideo {
    pub frames: FrameSequence,
    pub masks: Vec<Mask>,
}

fn neighbourhood(plane: &Plane, row: usize, col: usize) -> Neighborhood {
    let mut out = [0.0; 9];
    for dr in 0..3 {
        for dc in 0..3 {
            let (r, c) = (row + dr, col + dc);
            if r >= 1 && c >= 1 && r - 1 < plane.height && c - 1 < plane.width {
                out[dr * 3 + dc] = plane.get(r - 1, c - 1);
            }
        }
    }
    out
}

fn feature(encoding: RoiEncoding, y: [f64; 3], held: [f64; 3]) -> [f64; 3] {
    match encoding {
        RoiEncoding::RawOutput => y,
        RoiEncoding::StaticReference => [
            -(y[0] - held[0]).abs(),
            -(y[1] - held[1]).abs(),
            -(y[2] - held[2]).abs(),
        ],
    }
}

fn classify(kernel: &CwtKernel, series: &[f64; 3], threshold: f64) -> Result<bool> {
    Ok(classify_pixel(&kernel.transform(series)?, threshold) == RoiDecision::Roi)
}

fn window_mask_patch(
    planes: &[Plane; 3],
    params: &CcnnParams,
    kernel: &CwtKernel,
    opts: &RoiOptions,
) -> Result<Mask> {
    let (h, w) = planes[0].dims();
    let mut mask = Mask::new(h, w, false);
    for r in 0..h {
        for c in 0..w {
            let win = [
                neighbourhood(&planes[0], r, c),
                neighbourhood(&planes[1], r, c),
                neighbourhood(&planes[2], r, c),
            ];
            let series = if opts.encoding == RoiEncoding::StaticReference
                && win[1] == win[0]
                && win[2] == win[0]
            {
                [0.0; 3]
            } else {
                let y = encode_window(&win, params)?;
                let held = if opts.encoding == RoiEncoding::StaticReference {
                    encode_window(&[win[0]; 3], params)?
                } else {
                    y
                };
                feature(opts.encoding, y, held)
            };
            mask.set(r, c, classify(kernel, &series, opts.threshold)?);
        }
    }
    Ok(mask)
}

fn window_mask_frame(
    planes: &[Plane; 3],
    params: &CcnnParams,
    kernel: &CwtKernel,
    opts: &RoiOptions,
) -> Result<Mask> {
    let (h, w) = planes[0].dims();
    let y = run_lattice(planes, params)?;
    let held = match opts.encoding {
        RoiEncoding::StaticReference => run_lattice(
            &[planes[0].clone(), planes[0].clone(), planes[0].clone()],
            params,
        )?,
        RoiEncoding::RawOutput => y.clone(),
    };
    let mut mask = Mask::new(h, w, false);
    for k in 0..h * w {
        let series = feature(
            opts.encoding,
            [y[0].data[k], y[1].data[k], y[2].data[k]],
            [held[0].data[k], held[1].data[k], held[2].data[k]],
        );
        mask.data[k] = classify(kernel, &series, opts.threshold)?;
    }
    Ok(mask)
}

fn erode_or_dilate(mask: &Mask, erode: bool) -> Mask {
    let (h, w) = mask.dims();
    let mut out = Mask::new(h, w, false);
    for r in 0..h {
        for c in 0..w {
            let mut acc = erode;
            for rr in r.saturating_sub(1)..(r + 2).min(h) {
                for cc in c.saturating_sub(1)..(c + 2).min(w) {
                    if erode {
                        acc &= mask.get(rr, cc);
                    } else {
                        acc |= mask.get(rr, cc);
                    }
                }
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// Erosion followed by dilation with a 3×3 square.
pub fn open_mask(mask: &Mask) -> Mask {
    erode_or_dilate(&erode_or_dilate(mask, true), false)
}

/// Mask for the window starting at `start`.
pub fn window_mask(
    seq: &FrameSequence,
    start: usize,
    params: &CcnnParams,
    kernel: &CwtKernel,
    opts: &RoiOptions,
) -> Result<Mask> {
    let frames = seq.frames();
    if start + 3 > frames.len() {
        return Err(Error::OutOfRange {
            index: start + 2,
            count: frames.len(),
        });
    }
    let planes = [
        i_plane(&frames[start]),
        i_plane(&frames[start + 1]),
        i_plane(&frames[start + 2]),
    ];
    let mask = match opts.scope {
        RoiScope::Patch => window_mask_patch(&planes, params, kernel, opts)?,
        RoiScope::Frame => window_mask_frame(&planes, params, kernel, opts)?,
    };
    Ok(if opts.cleanup { open_mask(&mask) } else { mask })
}

/// One mask per frame. Frame `k` takes the mask of window `(k, k+1, k+2)`;
/// the last two frames reuse the final window's mask.
pub fn extract_roi_masks(
    seq: &FrameSequence,
    params: &CcnnParams,
    wavelet: &WaveletSpec,
) -> Result<Vec<RoiMask>> {
    extract_roi_masks_with(seq, params, wavelet, &RoiOptions::default())
}

pub fn extract_roi_masks_with(
    seq: &FrameSequence,
    params: &CcnnParams,
    wavelet: &WaveletSpec,
    opts: &RoiOptions,
) -> Result<Vec<RoiMask>> {
    if seq.len() < 3 {
        return Err(Error::TooFewFrames(seq.len()));
    }
    params.validate()?;
    let kernel = CwtKernel::new(wavelet)?;
    let n_windows = seq.len() - 2;
    let masks = (0..n_windows)
        .into_par_iter()
        .map(|k| window_mask(seq, k, params, &kernel, opts))
        .collect::<Result<Vec<_>>>()?;
    let last = n_windows - 1;
    let mut out: Vec<RoiMask> = masks
        .into_iter()
        .enumerate()
        .map(|(window_index, mask)| RoiMask { mask, window_index })
        .collect();
    for _ in 0..2 {
        let tail = out[last].clone();
        out.push(tail);
    }
    Ok(out)
}

/// Black out every pixel whose mask entry is false.
pub fn apply_masks(seq: &FrameSequence, masks: &[Mask]) -> Result<RoiSyntheticVideo> {
    if masks.len() != seq.len() {
        return Err(Error::LengthMismatch {
            expected: seq.len(),
            got: masks.len(),
        });
    }
    let dims = seq.dims();
    let mut frames = Vec::with_capacity(seq.len());
    for (frame, mask) in seq.frames().iter().zip(masks) {
        if mask.dims() != dims || mask.data.len() != dims.0 * dims.1 {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: mask.dims(),
            });
        }
        let mut out = frame.clone();
        for (k, &keep) in mask.data.iter().enumerate() {
            if !keep {
                out.data[3 * k..3 * k + 3].fill(0.0);
            }
        }
        frames.push(out);
    }
    Ok(RoiSyntheticVideo {
        frames: FrameSequence::new(dims.0, dims.1, seq.fps(), frames)?,
        masks: masks.to_vec(),
    })
}

/// Per-pixel fraction of frames in which the pixel is exactly black.
pub fn masked_fraction(frames: &[RgbFrame]) -> Vec<f64> {
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let n = first.height * first.width;
    let mut counts = vec![0usize; n];
    for f in frames {
        for (k, px) in f.data.chunks_exact(3).enumerate() {
            if px == [0.0; 3] {
                counts[k] += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|c| c as f64 / frames.len() as f64)
        .collect()
}
