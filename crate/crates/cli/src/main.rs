use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use hrrst_core::aggregate::{error_metrics, HrReport};
use hrrst_core::ccnn::{
    calibrate_dichotomy, check_dichotomy, default_grid, CcnnParams, DichotomyProbe,
};
use hrrst_core::io::{
    load_frames, read_masks, write_frames, write_masks, write_report, PixelFormat, MANIFEST_NAME,
};
use hrrst_core::roi::RoiSyntheticVideo;
use hrrst_core::signal::FilterMode;
use hrrst_core::spectral::WindowKind;
use hrrst_core::synth::{generate, SynthSpec};
use hrrst_core::{Error, FrameSequence, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "hrrst",
    version,
    about = "Heart rate from skin video without face detection"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline configuration JSON; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Encoder parameter JSON, overriding the config's.
    #[arg(long, global = true)]
    ccnn_params: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Keep the ROI video written by `full`.
    #[arg(long, global = true)]
    keep_intermediates: bool,
    /// Pass band in Hz.
    #[arg(long, global = true, num_args = 2, value_names = ["LO", "HI"])]
    band: Option<Vec<f64>>,
    /// Butterworth prototype order.
    #[arg(long, global = true)]
    order: Option<usize>,
    #[arg(long, global = true, value_enum)]
    window: Option<WindowArg>,
    #[arg(long, global = true, value_enum)]
    filter_mode: Option<FilterModeArg>,
    /// Welch segment count.
    #[arg(long, global = true)]
    segments: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Rectangular,
    Hamming,
    Hann,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterModeArg {
    ZeroPhase,
    SinglePass,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Png8,
    RawRgb24,
}

impl From<FormatArg> for PixelFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Png8 => PixelFormat::Png8,
            FormatArg::RawRgb24 => PixelFormat::RawRgb24,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pulsing-patch video with ground truth.
    Synth {
        /// Spec JSON; missing fields take defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "png8")]
        format: FormatArg,
    },
    /// Extract skin masks and write the ROI video.
    Roi {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory of ground-truth mask PNGs for IoU logging.
        #[arg(long)]
        truth_masks: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "png8")]
        format: FormatArg,
    },
    /// Estimate heart rate from an ROI video.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_bpm: Option<f64>,
    },
    /// ROI extraction followed by estimation.
    Full {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_bpm: Option<f64>,
        #[arg(long)]
        truth_masks: Option<PathBuf>,
    },
    /// SD, MAE and RMSE of estimates against ground truth.
    Metrics {
        /// JSON file `{"estimates": [...], "truths": [...]}`.
        #[arg(long, conflicts_with_all = ["estimates", "truths"])]
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        estimates: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        truths: Option<Vec<f64>>,
    },
    /// Search the encoder parameter grid for the periodic/aperiodic split.
    Calibrate {
        #[arg(long, default_value_t = 2000)]
        steps: usize,
    },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn load_config(g: &Global) -> Result<PipelineConfig, Error> {
    let mut cfg: PipelineConfig = match &g.config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = &g.ccnn_params {
        cfg.ccnn = read_json::<CcnnParams>(p)?;
    }
    if let Some(b) = &g.band {
        cfg.filter.band = [b[0], b[1]];
    }
    if let Some(o) = g.order {
        cfg.filter.order = o;
    }
    if let Some(w) = g.window {
        cfg.welch.window = match w {
            WindowArg::Rectangular => WindowKind::Rectangular,
            WindowArg::Hamming => WindowKind::Hamming,
            WindowArg::Hann => WindowKind::Hann,
        };
    }
    if let Some(m) = g.filter_mode {
        cfg.filter.mode = match m {
            FilterModeArg::ZeroPhase => FilterMode::ZeroPhase,
            FilterModeArg::SinglePass => FilterMode::SinglePass,
        };
    }
    if let Some(l) = g.segments {
        cfg.welch.n_segments = Some(l);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_NAME)
    } else {
        p.to_path_buf()
    }
}

fn roi_summary(roi: &RoiSyntheticVideo, truth_masks: Option<&Path>) -> Result<Value, Error> {
    let (h, w) = roi.frames.dims();
    let total = (h * w * roi.masks.len()).max(1) as f64;
    let selected: usize = roi.masks.iter().map(|m| m.count()).sum();
    let empty = roi.masks.iter().filter(|m| m.count() == 0).count();
    let mut s = json!({
        "n_frames": roi.masks.len(),
        "dims": [h, w],
        "mean_mask_fraction": selected as f64 / total,
        "empty_masks": empty,
    });
    if empty == roi.masks.len() {
        eprintln!("warning: no ROI pixels found; the ROI video is entirely black");
        s["warning"] = json!("no ROI pixels found");
    }
    if let Some(dir) = truth_masks {
        let truth = read_masks(dir, roi.masks.len())?;
        let iou = roi
            .masks
            .iter()
            .zip(&truth)
            .map(|(a, b)| a.iou(b))
            .sum::<f64>()
            / roi.masks.len() as f64;
        eprintln!("mean mask IoU vs truth: {iou:.4}");
        s["mean_iou"] = json!(iou);
    }
    Ok(s)
}

fn finish_report(
    report: &mut HrReport,
    truth_bpm: Option<f64>,
    out: &Path,
) -> Result<Value, Error> {
    if let Some(t) = truth_bpm {
        report.metrics = Some(error_metrics(&[report.hr_bpm as f64], &[t])?);
    }
    write_report(report, out)?;
    Ok(json!({
        "hr_bpm": report.hr_bpm,
        "n_pixels_used": report.n_pixels_used,
        "n_excluded": report.n_excluded,
        "mode_fraction": report.mode_fraction,
        "metrics": report.metrics,
        "out": out,
    }))
}

fn load(input: &Path) -> Result<FrameSequence, Error> {
    load_frames(&manifest_path(input))
}

fn run(cli: Cli) -> Result<Value, Error> {
    let g = &cli.global;
    match cli.command {
        Command::Synth {
            spec,
            seed,
            out,
            format,
        } => {
            let spec: SynthSpec = match spec {
                Some(p) => read_json(&p)?,
                None => SynthSpec::default(),
            };
            let video = generate(&spec, seed)?;
            write_frames(&video.frames, &out, format.into())?;
            write_masks(&video.masks, &out.join("truth_masks"))?;
            let truth = json!({ "hr_bpm": video.hr_bpm, "seed": seed, "spec": spec });
            fs::write(
                out.join("truth.json"),
                serde_json::to_string_pretty(&truth)?,
            )?;
            Ok(json!({
                "command": "synth",
                "n_frames": video.frames.len(),
                "hr_bpm": video.hr_bpm,
                "out": out,
            }))
        }
        Command::Roi {
            input,
            out,
            truth_masks,
            format,
        } => {
            let cfg = load_config(g)?;
            let seq = load(&input)?;
            let roi = hrrst_core::run_roi_phase(&seq, &cfg)?;
            write_frames(&roi.frames, &out, format.into())?;
            write_masks(&roi.masks, &out.join("masks"))?;
            let mut s = roi_summary(&roi, truth_masks.as_deref())?;
            s["command"] = json!("roi");
            s["out"] = json!(out);
            Ok(s)
        }
        Command::Estimate {
            input,
            out,
            truth_bpm,
        } => {
            let cfg = load_config(g)?;
            let seq = load(&input)?;
            let mut report = hrrst_core::run_estimate_phase(&seq, &cfg)?;
            let mut s = finish_report(&mut report, truth_bpm, &out)?;
            s["command"] = json!("estimate");
            Ok(s)
        }
        Command::Full {
            input,
            out,
            truth_bpm,
            truth_masks,
        } => {
            let cfg = load_config(g)?;
            let seq = load(&input)?;
            let roi = hrrst_core::run_roi_phase(&seq, &cfg)?;
            let roi_info = roi_summary(&roi, truth_masks.as_deref())?;
            if g.keep_intermediates {
                let dir = out.join("roi");
                write_frames(&roi.frames, &dir, PixelFormat::Png8)?;
                write_masks(&roi.masks, &dir.join("masks"))?;
            }
            let mut report = hrrst_core::run_estimate_phase(&roi.frames, &cfg)?;
            let mut s = finish_report(&mut report, truth_bpm, &out)?;
            s["command"] = json!("full");
            s["roi"] = roi_info;
            Ok(s)
        }
        Command::Metrics {
            input,
            estimates,
            truths,
        } => {
            #[derive(Deserialize)]
            struct Pairs {
                estimates: Vec<f64>,
                truths: Vec<f64>,
            }
            let pairs = match input {
                Some(p) => read_json::<Pairs>(&p)?,
                None => Pairs {
                    estimates: estimates.unwrap_or_default(),
                    truths: truths.unwrap_or_default(),
                },
            };
            let m = error_metrics(&pairs.estimates, &pairs.truths)?;
            Ok(json!({ "command": "metrics", "n": m.n, "sd": m.sd, "mae": m.mae, "rmse": m.rmse }))
        }
        Command::Calibrate { steps } => {
            let params = calibrate_dichotomy(&default_grid(), steps)?;
            let report = check_dichotomy(&params, &DichotomyProbe::default(), steps);
            Ok(json!({ "command": "calibrate", "params": params, "report": report }))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_no_signal() {
        3
    } else {
        match e {
            Error::Io(_) | Error::BadWindowLength(_) => 4,
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.global.threads;
    let outcome = std::panic::catch_unwind(move || {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n.max(1));
        }
        match builder.build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(Error::InvalidInput(format!("thread pool: {e}"))),
        }
    });
    match outcome {
        Ok(Ok(summary)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("{}", json!({ "error": e.name(), "message": e.to_string() }));
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!(
                "{}",
                json!({ "error": "Internal", "message": "unexpected panic" })
            );
            ExitCode::from(4)
        }
    }
}
