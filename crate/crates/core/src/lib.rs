//! Remote heart-rate estimation from ordinary RGB video.
//!
//! A coupled neural lattice encodes the I chroma plane, a short continuous
//! wavelet transform over each pixel's encoder output picks skin pixels,
//! and every surviving pixel gets its own band-passed green trace and Welch
//! spectrum. The final rate is the mode of the per-pixel estimates.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod ccnn;
pub mod colorspace;
pub mod cwt;
pub mod error;
pub mod frame;
pub mod io;
pub mod pipeline;
pub mod roi;
pub mod signal;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use frame::{FrameSequence, Mask, Plane, RgbFrame};
pub use pipeline::{run_estimate_phase, run_full, run_roi_phase, PipelineConfig};
