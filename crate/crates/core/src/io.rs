//! Lossless frame sequences on disk, mask images and report artifacts.
//!
//! A sequence is a directory of frame files plus `manifest.json`:
//!
//! ```json
//! {"fps": 30.0, "dims": [64, 64], "pixel_format": "png8",
//!  "frames": ["frame_00000.png", "frame_00001.png"]}
//! ```
//!
//! Frame paths are relative to the manifest's directory.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::{heatmap_levels, Histogram, HrReport};
use crate::error::{Error, Result};
use crate::frame::{FrameSequence, Mask, RgbFrame};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PixelFormat {
    #[default]
    Png8,
    RawRgb24,
}

impl PixelFormat {
    fn extension(self) -> &'static str {
        match self {
            PixelFormat::Png8 => "png",
            PixelFormat::RawRgb24 => "rgb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub fps: Option<f64>,
    pub dims: [usize; 2],
    pub pixel_format: PixelFormat,
    pub frames: Vec<PathBuf>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png(format!("{}: {e}", path.display()))
}

/// Decode a PNG to 8-bit samples; returns `(height, width, channels, data)`.
fn decode_png(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND);
    let mut reader = dec.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(png_err(path, "only 8-bit samples are supported"));
    }
    let channels = info.color_type.samples();
    buf.truncate(info.buffer_size());
    Ok((info.height as usize, info.width as usize, channels, buf))
}

fn encode_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut w = enc.write_header().map_err(|e| png_err(path, e))?;
        w.write_image_data(data).map_err(|e| png_err(path, e))?;
    }
    fs::write(path, out)?;
    Ok(())
}

fn load_frame(path: &Path, format: PixelFormat, dims: (usize, usize)) -> Result<RgbFrame> {
    let (h, w) = dims;
    match format {
        PixelFormat::RawRgb24 => {
            let bytes = read_bytes(path)?;
            if bytes.len() != h * w * 3 {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: (bytes.len() / 3 / w.max(1), w),
                });
            }
            RgbFrame::from_rgb8(h, w, &bytes)
        }
        PixelFormat::Png8 => {
            let (ph, pw, ch, data) = decode_png(path)?;
            if (ph, pw) != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: (ph, pw),
                });
            }
            let rgb: Vec<u8> = match ch {
                3 => data,
                4 => data
                    .chunks_exact(4)
                    .flat_map(|p| [p[0], p[1], p[2]])
                    .collect(),
                1 => data.iter().flat_map(|&g| [g, g, g]).collect(),
                2 => data
                    .chunks_exact(2)
                    .flat_map(|p| [p[0], p[0], p[0]])
                    .collect(),
                _ => return Err(png_err(path, "unsupported colour type")),
            };
            RgbFrame::from_rgb8(h, w, &rgb)
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = read_bytes(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn load_frames(manifest_path: &Path) -> Result<FrameSequence> {
    let manifest = read_manifest(manifest_path)?;
    let fps = match manifest.fps {
        Some(f) if f.is_finite() && f > 0.0 => f,
        _ => return Err(Error::MissingFps),
    };
    if manifest.frames.is_empty() {
        return Err(Error::InvalidInput("manifest lists no frames".into()));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let dims = (manifest.dims[0], manifest.dims[1]);
    let frames = manifest
        .frames
        .iter()
        .map(|rel| load_frame(&base.join(rel), manifest.pixel_format, dims))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(dims.0, dims.1, fps, frames)
}

/// Write every frame plus `manifest.json` into `dir`, creating it.
pub fn write_frames(seq: &FrameSequence, dir: &Path, format: PixelFormat) -> Result<Manifest> {
    if seq.is_empty() {
        return Err(Error::InvalidInput("cannot write an empty sequence".into()));
    }
    fs::create_dir_all(dir)?;
    let (h, w) = seq.dims();
    let mut names = Vec::with_capacity(seq.len());
    for (k, frame) in seq.frames().iter().enumerate() {
        let name = PathBuf::from(format!("frame_{k:05}.{}", format.extension()));
        let path = dir.join(&name);
        let bytes = frame.to_rgb8();
        match format {
            PixelFormat::RawRgb24 => fs::write(&path, &bytes)?,
            PixelFormat::Png8 => encode_png(
                &path,
                w,
                h,
                png::ColorType::Rgb,
                png::BitDepth::Eight,
                &bytes,
            )?,
        }
        names.push(name);
    }
    let manifest = Manifest {
        fps: Some(seq.fps()),
        dims: [h, w],
        pixel_format: format,
        frames: names,
    };
    fs::write(
        dir.join(MANIFEST_NAME),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// 1-bit greyscale PNG, set pixels white.
pub fn write_mask_png(mask: &Mask, path: &Path) -> Result<()> {
    let (h, w) = mask.dims();
    let stride = w.div_ceil(8);
    let mut packed = vec![0u8; stride * h];
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) {
                packed[r * stride + c / 8] |= 0x80 >> (c % 8);
            }
        }
    }
    encode_png(
        path,
        w,
        h,
        png::ColorType::Grayscale,
        png::BitDepth::One,
        &packed,
    )
}

/// Any greyscale PNG; non-zero pixels are set.
pub fn read_mask_png(path: &Path) -> Result<Mask> {
    let (h, w, ch, data) = decode_png(path)?;
    let mut m = Mask::new(h, w, false);
    for (k, px) in data.chunks_exact(ch).enumerate() {
        m.data[k] = px[0] != 0;
    }
    Ok(m)
}

pub fn write_masks(masks: &[Mask], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    masks
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let name = PathBuf::from(format!("mask_{k:05}.png"));
            write_mask_png(m, &dir.join(&name))?;
            Ok(name)
        })
        .collect()
}

pub fn read_masks(dir: &Path, count: usize) -> Result<Vec<Mask>> {
    (0..count)
        .map(|k| read_mask_png(&dir.join(format!("mask_{k:05}.png"))))
        .collect()
}

pub const REPORT_NAME: &str = "report.json";
pub const HISTOGRAM_NAME: &str = "histogram.csv";
pub const HEATMAP_NAME: &str = "heatmap.png";

/// `report.json`, `histogram.csv` and, when the report carries its field,
/// `heatmap.png`, all inside `dir`.
pub fn write_report(report: &HrReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join(REPORT_NAME), json)?;
    let hist = Histogram {
        lo: report.range[0],
        counts: report.histogram.counts.clone(),
    };
    fs::write(dir.join(HISTOGRAM_NAME), hist.to_csv())?;
    if let Some(field) = &report.heatmap {
        let levels = heatmap_levels(field, report.range);
        encode_png(
            &dir.join(HEATMAP_NAME),
            field.width,
            field.height,
            png::ColorType::Grayscale,
            png::BitDepth::Eight,
            &levels,
        )?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<HrReport> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}
