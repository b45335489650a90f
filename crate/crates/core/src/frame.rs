//! In-memory video representation.
//!
//! Frames are stored as interleaved RGB `f32` in `[0, 1]`. Values loaded from
//! 8-bit sources are exactly `v as f32 / 255.0`, so re-quantising with
//! [`to_u8`] recovers the original byte.

use crate::error::{Error, Result};

/// Map a unit-interval channel value back onto the 8-bit grid.
#[inline]
pub fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn from_u8(v: u8) -> f32 {
    v as f32 / 255.0
}

/// Row-major H×W grid of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                got: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Row-major H×W boolean image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Intersection over union; two empty masks score 1.
    pub fn iou(&self, other: &Mask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.data.iter().zip(&other.data) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Mean (row, col) of the set pixels.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut n, mut sr, mut sc) = (0usize, 0.0, 0.0);
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    n += 1;
                    sr += r as f64;
                    sc += c as f64;
                }
            }
        }
        (n > 0).then(|| (sr / n as f64, sc / n as f64))
    }
}

/// One H×W×3 image, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbFrame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl RgbFrame {
    pub fn black(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width * 3],
        }
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return Err(Error::LengthMismatch {
                expected: height * width * 3,
                got: bytes.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data: bytes.iter().map(|&b| from_u8(b)).collect(),
        })
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    #[inline]
    pub fn is_black(&self, row: usize, col: usize) -> bool {
        self.pixel(row, col) == [0.0; 3]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Ordered frames sharing one size, plus the sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    height: usize,
    width: usize,
    fps: f64,
    frames: Vec<RgbFrame>,
}

impl FrameSequence {
    /// Validates shared dimensions, `fps > 0` and the unit-interval range.
    pub fn new(height: usize, width: usize, fps: f64, frames: Vec<RgbFrame>) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::MissingFps);
        }
        for f in &frames {
            if f.dims() != (height, width) || f.data.len() != height * width * 3 {
                return Err(Error::DimensionMismatch {
                    expected: (height, width),
                    got: f.dims(),
                });
            }
            if f.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput(
                    "channel values must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(Self {
            height,
            width,
            fps,
            frames,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[RgbFrame] {
        &self.frames
    }

    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn into_frames(self) -> Vec<RgbFrame> {
        self.frames
    }
}
