//! The three phases chained: ROI extraction, per-pixel estimation, mode.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{build_field, summarize, AggregateConfig, HrField, HrReport};
use crate::ccnn::CcnnParams;
use crate::cwt::WaveletSpec;
use crate::error::{Error, Result};
use crate::frame::FrameSequence;
use crate::roi::{
    apply_masks, extract_roi_masks_with, masked_fraction, RoiOptions, RoiSyntheticVideo,
};
use crate::signal::{design_bandpass, BandpassFilter, FilterMode};
use crate::spectral::{WelchConfig, WelchEstimator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Pass band in Hz; also fixes the reported bpm range.
    pub band: [f64; 2],
    pub order: usize,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            band: [0.7, 2.5],
            order: 3,
            mode: FilterMode::ZeroPhase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub ccnn: CcnnParams,
    pub wavelet: WaveletSpec,
    pub roi: RoiOptions,
    pub filter: FilterConfig,
    pub welch: WelchConfig,
    pub aggregate: AggregateConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.ccnn.validate()?;
        self.wavelet.validate()?;
        let [lo, hi] = self.filter.band;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::InvalidBand {
                lo,
                hi,
                fs: f64::NAN,
            });
        }
        if self.filter.order == 0 {
            return Err(Error::InvalidInput(
                "filter order must be at least 1".into(),
            ));
        }
        let a = &self.aggregate;
        if !(0.0..=1.0).contains(&a.max_masked_fraction)
            || !(0.0..=1.0).contains(&a.min_mode_fraction)
        {
            return Err(Error::InvalidInput(
                "aggregate fractions must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Integer bpm range covered by the pass band.
    pub fn hr_range(&self) -> [u32; 2] {
        let [lo, hi] = self.filter.band;
        [
            (60.0 * lo - 1e-9).ceil() as u32,
            (60.0 * hi + 1e-9).floor() as u32,
        ]
    }
}

pub fn run_roi_phase(seq: &FrameSequence, config: &PipelineConfig) -> Result<RoiSyntheticVideo> {
    config.validate()?;
    let masks = extract_roi_masks_with(seq, &config.ccnn, &config.wavelet, &config.roi)?;
    let masks: Vec<_> = masks.into_iter().map(|m| m.mask).collect();
    apply_masks(seq, &masks)
}

struct Estimator {
    filter: BandpassFilter,
    welch: WelchEstimator,
    band: [f64; 2],
    mode: FilterMode,
}

impl Estimator {
    fn new(config: &PipelineConfig, n: usize, fs: f64) -> Result<Self> {
        Ok(Self {
            filter: design_bandpass(fs, config.filter.band, config.filter.order)?,
            welch: WelchEstimator::new(&config.welch, n, fs)?,
            band: config.filter.band,
            mode: config.filter.mode,
        })
    }

    fn pixel(&self, series: &[f64]) -> Result<Option<f64>> {
        let y = self.filter.apply(series, self.mode)?;
        match self.welch.estimate_hr(&y, self.band) {
            Ok(hr) => Ok(Some(hr)),
            Err(Error::NoPeak) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Heart rate of every pixel of an ROI video; pixels black in more than
/// the configured fraction of frames, or without an in-band peak, are
/// excluded.
pub fn estimate_field(video: &FrameSequence, config: &PipelineConfig) -> Result<HrField> {
    config.validate()?;
    let (h, w) = video.dims();
    let n = video.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let est = Estimator::new(config, n, video.fps())?;
    let coverage = masked_fraction(video.frames());
    let limit = config.aggregate.max_masked_fraction;
    let rows: Vec<Vec<Option<f64>>> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut out = vec![None; w];
            let mut series = vec![0.0; n];
            for (c, slot) in out.iter_mut().enumerate() {
                if coverage[r * w + c] > limit {
                    continue;
                }
                let idx = (r * w + c) * 3 + 1;
                for (s, f) in series.iter_mut().zip(video.frames()) {
                    *s = f.data[idx] as f64;
                }
                *slot = est.pixel(&series)?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let per_pixel: Vec<Option<f64>> = rows.into_iter().flatten().collect();
    build_field(h, w, &per_pixel, &coverage, limit)
}

pub fn run_estimate_phase(video: &FrameSequence, config: &PipelineConfig) -> Result<HrReport> {
    let field = estimate_field(video, config)?;
    summarize(field, config.hr_range(), &config.aggregate)
}

pub fn run_full(
    seq: &FrameSequence,
    config: &PipelineConfig,
) -> Result<(RoiSyntheticVideo, HrReport)> {
    let roi = run_roi_phase(seq, config)?;
    let report = run_estimate_phase(&roi.frames, config)?;
    Ok((roi, report))
}
