//! Exit gate. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hrrst_core::aggregate::error_metrics;
use hrrst_core::ccnn::{detect_period, probe_trajectory, CcnnParams, DichotomyProbe};
use hrrst_core::io::{read_masks, write_frames, PixelFormat};
use hrrst_core::signal::design_bandpass;
use hrrst_core::spectral::{estimate_hr, welch_psd, WelchConfig, WindowKind};
use hrrst_core::synth::{generate, SynthSpec};
use hrrst_core::Mask;
use serde_json::Value;

const HR_TRUTH: f64 = 69.0;
const STATIC_TOL_BPM: f64 = 2.0;
const MOTION_TOL_BPM: f64 = 3.0;
const RUNTIME_LIMIT: Duration = Duration::from_secs(60);
const CENTROID_TOL_PX: f64 = 2.0;
const IOU_MIN: f64 = 0.6;
const EDGE_DB_TOL: f64 = 0.5;
const STOP_DB: f64 = -20.0;
const WELCH_BPM_TOL: f64 = 0.5;
const DFT_REL_TOL: f64 = 1e-9;
const METRIC_TOL: f64 = 0.01;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hrrst"))
}

struct Run {
    code: i32,
    stdout: Value,
}

fn hrrst(args: &[&str]) -> Run {
    let out = bin().args(args).output().expect("spawn hrrst");
    let stdout = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout,
    }
}

fn synth_to(dir: &Path, spec: &SynthSpec, seed: u64) -> (String, Vec<Mask>) {
    let v = generate(spec, seed).unwrap();
    write_frames(&v.frames, dir, PixelFormat::Png8).unwrap();
    (dir.join("manifest.json").display().to_string(), v.masks)
}

fn centroid_error(got: &[Mask], truth: &[Mask]) -> f64 {
    got.iter()
        .zip(truth)
        .map(|(a, b)| match (a.centroid(), b.centroid()) {
            (Some((ar, ac)), Some((br, bc))) => (ar - br).hypot(ac - bc),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id}. {name}: {detail}");
        if !ok {
            self.failures.push(format!("{id}. {name}"));
        }
    }
}

fn criterion_1_3_static(gate: &mut Gate, root: &Path) {
    let (manifest, truth) = synth_to(&root.join("static"), &SynthSpec::default(), 1);
    let out = root.join("static_out");
    let t0 = Instant::now();
    let r = hrrst(&[
        "--threads",
        "1",
        "--keep-intermediates",
        "full",
        "--input",
        &manifest,
        "--out",
        out.to_str().unwrap(),
    ]);
    let elapsed = t0.elapsed();
    let hr = r.stdout["hr_bpm"].as_f64().unwrap_or(f64::NAN);
    gate.check(
        1,
        "static recovery",
        r.code == 0 && (hr - HR_TRUTH).abs() <= STATIC_TOL_BPM && elapsed <= RUNTIME_LIMIT,
        format!(
            "hr {hr} bpm (truth {HR_TRUTH} ± {STATIC_TOL_BPM}), single worker {:.1} s (limit {} s)",
            elapsed.as_secs_f64(),
            RUNTIME_LIMIT.as_secs()
        ),
    );

    let masks = read_masks(&out.join("roi/masks"), truth.len()).unwrap_or_default();
    let iou = if masks.len() == truth.len() {
        masks.iter().zip(&truth).map(|(a, b)| a.iou(b)).sum::<f64>() / truth.len() as f64
    } else {
        0.0
    };

    let still = SynthSpec {
        pulse_amplitude: 0.0,
        noise_std: 0.0,
        duration: 2.0,
        ..SynthSpec::default()
    };
    let (still_manifest, _) = synth_to(&root.join("still"), &still, 0);
    let still_out = root.join("still_out");
    let rs = hrrst(&[
        "roi",
        "--input",
        &still_manifest,
        "--out",
        still_out.to_str().unwrap(),
    ]);
    let still_masks = read_masks(&still_out.join("masks"), still.n_frames()).unwrap_or_default();
    let all_false = rs.code == 0
        && still_masks.len() == still.n_frames()
        && still_masks.iter().all(|m| m.count() == 0);
    gate.check(
        3,
        "ROI quality",
        iou >= IOU_MIN && all_false,
        format!("mean IoU {iou:.3} (min {IOU_MIN}); static video all-false masks: {all_false}"),
    );
}

fn criterion_2_motion(gate: &mut Gate, root: &Path) {
    let spec = SynthSpec {
        motion: [1.0, 0.0],
        motion_extent: Some(4),
        ..SynthSpec::default()
    };
    let (manifest, truth) = synth_to(&root.join("motion"), &spec, 2);
    let out = root.join("motion_out");
    let r = hrrst(&[
        "--keep-intermediates",
        "full",
        "--input",
        &manifest,
        "--out",
        out.to_str().unwrap(),
    ]);
    let hr = r.stdout["hr_bpm"].as_f64().unwrap_or(f64::NAN);
    let masks = read_masks(&out.join("roi/masks"), truth.len()).unwrap_or_default();
    let err = if masks.len() == truth.len() {
        centroid_error(&masks, &truth)
    } else {
        f64::INFINITY
    };
    gate.check(
        2,
        "motion robustness",
        r.code == 0 && (hr - HR_TRUTH).abs() <= MOTION_TOL_BPM && err <= CENTROID_TOL_PX,
        format!(
            "hr {hr} bpm (truth {HR_TRUTH} ± {MOTION_TOL_BPM}), worst centroid error {err:.2} px (limit {CENTROID_TOL_PX})"
        ),
    );
}

fn criterion_4_dichotomy(gate: &mut Gate) {
    let params = CcnnParams::default();
    let probe = DichotomyProbe::default();
    let n = 2000;
    let still = probe_trajectory(&params, &probe, false, n);
    let driven = probe_trajectory(&params, &probe, true, n);
    // period must hold over every step from 500 on
    let tail = n - 500 - 50;
    let p_still = detect_period(&still[500..], 50, tail, 1e-6);
    let p_driven = detect_period(&driven, 500, n - 500, 1e-6);
    gate.check(
        4,
        "encoder dichotomy",
        p_still.is_some() && p_driven.is_none(),
        format!(
            "constant-input period {p_still:?} (≤ 50), driven period {p_driven:?} (none ≤ 500)"
        ),
    );
}

/// Expand the section cascade into one numerator/denominator pair and
/// evaluate it on the unit circle term by term.
fn transfer_db(sections: &[([f64; 3], [f64; 3])], f: f64, fs: f64) -> f64 {
    let mul = |p: &[f64], q: &[f64]| {
        let mut r = vec![0.0; p.len() + q.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                r[i + j] += a * b;
            }
        }
        r
    };
    let (mut num, mut den) = (vec![1.0], vec![1.0]);
    for (b, a) in sections {
        num = mul(&num, b);
        den = mul(&den, a);
    }
    let w = 2.0 * PI * f / fs;
    let eval = |c: &[f64]| {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in c.iter().enumerate() {
            re += v * (k as f64 * w).cos();
            im -= v * (k as f64 * w).sin();
        }
        re.hypot(im)
    };
    20.0 * (eval(&num) / eval(&den)).log10()
}

fn criterion_5_filter(gate: &mut Gate) {
    let fs = 30.0;
    let filt = design_bandpass(fs, [0.7, 2.5], 3).unwrap();
    let secs: Vec<([f64; 3], [f64; 3])> = filt
        .sections
        .iter()
        .map(|s| (s.b, [1.0, s.a[0], s.a[1]]))
        .collect();
    let db = |f| transfer_db(&secs, f, fs);
    let (lo, hi, s1, s2) = (db(0.7), db(2.5), db(0.1), db(5.0));
    let ok = (lo + 3.0).abs() <= EDGE_DB_TOL
        && (hi + 3.0).abs() <= EDGE_DB_TOL
        && s1 <= STOP_DB
        && s2 <= STOP_DB;
    gate.check(
        5,
        "band-pass response",
        ok,
        format!(
            "0.7 Hz {lo:.3} dB, 2.5 Hz {hi:.3} dB (−3 ± {EDGE_DB_TOL}); 0.1 Hz {s1:.1} dB, 5 Hz {s2:.1} dB (≤ {STOP_DB})"
        ),
    );
}

fn criterion_6_welch(gate: &mut Gate) {
    let fs = 30.0;
    let x: Vec<f64> = (0..450)
        .map(|k| (2.0 * PI * 1.2 * k as f64 / fs).sin())
        .collect();
    let psd = welch_psd(&x, fs, &WelchConfig::default()).unwrap();
    let hr = estimate_hr(&psd, [0.7, 2.5]).unwrap_or(f64::NAN);

    let m = 64;
    let seg: Vec<f64> = (0..m)
        .map(|k| (2.0 * PI * 7.0 * k as f64 / m as f64).sin() + 0.3)
        .collect();
    let cfg = WelchConfig {
        n_segments: Some(1),
        window: WindowKind::Rectangular,
        fft_length: Some(m),
        overlap: 0.0,
    };
    let got = welch_psd(&seg, fs, &cfg).unwrap().power;
    let mut worst = 0.0f64;
    for (k, g) in got.iter().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in seg.iter().enumerate() {
            let a = -2.0 * PI * ((k * n) % m) as f64 / m as f64;
            re += v * a.cos();
            im += v * a.sin();
        }
        let want = (re * re + im * im) / m as f64;
        let peak = got.iter().cloned().fold(0.0, f64::max);
        worst = worst.max((g - want).abs() / peak);
    }
    gate.check(
        6,
        "Welch estimate",
        (hr - 72.0).abs() <= WELCH_BPM_TOL && worst <= DFT_REL_TOL,
        format!("1.2 Hz tone → {hr:.3} bpm (72 ± {WELCH_BPM_TOL}); direct-DFT max relative deviation {worst:.2e} (≤ {DFT_REL_TOL:e})"),
    );
}

fn criterion_7_metrics(gate: &mut Gate) {
    let r = hrrst(&[
        "metrics",
        "--estimates",
        "43,30,43,43,43,43",
        "--truths",
        "65,65,65,65,65,65",
    ]);
    let mae = r.stdout["mae"].as_f64().unwrap_or(f64::NAN);
    let rmse = r.stdout["rmse"].as_f64().unwrap_or(f64::NAN);
    let lib = error_metrics(&[43.0, 30.0, 43.0, 43.0, 43.0, 43.0], &[65.0; 6]).unwrap();
    gate.check(
        7,
        "error metrics",
        r.code == 0
            && (mae - 24.17).abs() <= METRIC_TOL
            && (rmse - 24.65).abs() <= METRIC_TOL
            && lib.mae == mae
            && lib.rmse == rmse,
        format!("MAE {mae:.4} (24.17 ± {METRIC_TOL}), RMSE {rmse:.4} (24.65 ± {METRIC_TOL})"),
    );
}

fn criterion_8_determinism(gate: &mut Gate, root: &Path) {
    let spec = SynthSpec {
        duration: 12.0,
        motion: [0.0, 1.0],
        motion_extent: Some(4),
        ..SynthSpec::default()
    };
    let (manifest, _) = synth_to(&root.join("det"), &spec, 5);
    let mut reports = Vec::new();
    let mut masks = Vec::new();
    for (k, threads) in ["2", "2", "1", "4"].iter().enumerate() {
        let out = root.join(format!("det_out_{k}"));
        let r = hrrst(&[
            "--threads",
            threads,
            "--keep-intermediates",
            "full",
            "--input",
            &manifest,
            "--out",
            out.to_str().unwrap(),
        ]);
        let files: Vec<Vec<u8>> = ["report.json", "histogram.csv", "heatmap.png"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap_or_default())
            .collect();
        reports.push((r.code, files));
        masks.push(read_masks(&out.join("roi/masks"), spec.n_frames()).unwrap_or_default());
    }
    let same_runs = reports[0] == reports[1] && masks[0] == masks[1];
    let same_workers =
        reports.iter().all(|r| *r == reports[0]) && masks.iter().all(|m| *m == masks[0]);
    gate.check(
        8,
        "determinism",
        reports[0].0 == 0 && same_runs && same_workers,
        format!("repeat runs identical: {same_runs}; 1/2/4 workers identical: {same_workers}"),
    );
}

fn criterion_9_negative(gate: &mut Gate, root: &Path) {
    let spec = SynthSpec {
        pulse_amplitude: 0.0,
        ..SynthSpec::default()
    };
    let (manifest, _) = synth_to(&root.join("null"), &spec, 9);
    let out = root.join("null_out");
    let r = hrrst(&["full", "--input", &manifest, "--out", out.to_str().unwrap()]);
    gate.check(
        9,
        "negative control",
        r.code == 3 && !out.join("report.json").exists(),
        format!("amplitude-0 video exit code {} (want 3)", r.code),
    );
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut gate = Gate {
        failures: Vec::new(),
    };
    println!("\nacceptance criteria");
    criterion_1_3_static(&mut gate, root);
    criterion_2_motion(&mut gate, root);
    criterion_4_dichotomy(&mut gate);
    criterion_5_filter(&mut gate);
    criterion_6_welch(&mut gate);
    criterion_7_metrics(&mut gate);
    criterion_8_determinism(&mut gate, root);
    criterion_9_negative(&mut gate, root);
    assert!(gate.failures.is_empty(), "failed: {:?}", gate.failures);
}
