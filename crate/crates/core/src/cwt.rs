//! Continuous wavelet transform of 3-sample encoder outputs and the
//! sum-of-real-parts ROI rule.
//!
//! Two families are available. `Gaussian` is the scaled, shifted Gaussian
//! `ψ_{a,b}(t) = 1/(√(2πa) σ) · exp(-(t-b)² / (2a²σ²))`. It has non-zero mean,
//! so any positive series gets a positive real sum. `ComplexGaussian1` is the
//! first derivative of `exp(-ix) exp(-x²)`, unit-energy normalised. Its real
//! part is odd, so with shifts placed on the sample grid the real parts of a
//! constant series cancel exactly. That cancellation is what lets static
//! background fall out of the ROI, hence it is the default.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFamily {
    Gaussian,
    ComplexGaussian1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub sigma: f64,
    pub scales: Vec<f64>,
    /// Translation values `b`, in samples.
    pub shifts: Vec<f64>,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self {
            family: WaveletFamily::ComplexGaussian1,
            sigma: 1.0,
            scales: vec![1.0, 2.0, 4.0],
            shifts: vec![0.0, 1.0, 2.0],
        }
    }
}

impl WaveletSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidInput("wavelet sigma must be positive".into()));
        }
        if let Some(&a) = self.scales.iter().find(|&&a| !(a.is_finite() && a > 0.0)) {
            return Err(Error::NonPositiveScale(a));
        }
        if self.scales.is_empty() || self.shifts.is_empty() {
            return Err(Error::InvalidInput(
                "wavelet needs at least one scale and one shift".into(),
            ));
        }
        if self.shifts.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("wavelet shifts must be finite".into()));
        }
        Ok(())
    }
}

/// (2π)^(-1/4): unit L² norm for the first-derivative complex Gaussian.
const CGAU1_NORM: f64 = 0.631_618_777_746_844_4;

fn cgau1(x: f64) -> Complex64 {
    let g = (-x * x).exp() * CGAU1_NORM;
    let (s, c) = x.sin_cos();
    // d/dx [e^{-ix} e^{-x²}] = (-2x - i) (cos x - i sin x) e^{-x²}
    Complex64::new((-2.0 * x * c - s) * g, (2.0 * x * s - c) * g)
}

/// `ψ_{a,b}(t)` for the chosen family.
pub fn wavelet_eval(spec: &WaveletSpec, a: f64, b: f64, t: f64) -> Result<Complex64> {
    if !(a > 0.0) {
        return Err(Error::NonPositiveScale(a));
    }
    let sigma = spec.sigma;
    Ok(match spec.family {
        WaveletFamily::Gaussian => {
            let d = t - b;
            let norm = 1.0 / ((std::f64::consts::TAU * a).sqrt() * sigma);
            Complex64::new(norm * (-(d * d) / (2.0 * a * a * sigma * sigma)).exp(), 0.0)
        }
        WaveletFamily::ComplexGaussian1 => cgau1((t - b) / (a * sigma)) / a.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwtResult {
    /// `coefficients[s][n]` for scale `s` and shift `n`.
    pub coefficients: Vec<Vec<Complex64>>,
    pub real_sum: f64,
}

/// Precomputed conjugated wavelet samples for a fixed spec, so per-pixel
/// transforms are plain multiply-adds.
#[derive(Debug, Clone)]
pub struct CwtKernel {
    // [scale][shift][t]
    taps: Vec<Vec<[Complex64; 3]>>,
}

impl CwtKernel {
    pub fn new(spec: &WaveletSpec) -> Result<Self> {
        spec.validate()?;
        let mut taps = Vec::with_capacity(spec.scales.len());
        for &a in &spec.scales {
            let mut row = Vec::with_capacity(spec.shifts.len());
            for &b in &spec.shifts {
                let mut t3 = [Complex64::new(0.0, 0.0); 3];
                for (t, slot) in t3.iter_mut().enumerate() {
                    *slot = wavelet_eval(spec, a, b, t as f64)?.conj();
                }
                row.push(t3);
            }
            taps.push(row);
        }
        Ok(Self { taps })
    }

    pub fn transform(&self, series: &[f64]) -> Result<CwtResult> {
        let x: &[f64; 3] = series
            .try_into()
            .map_err(|_| Error::BadWindowLength(series.len()))?;
        let mut real_sum = 0.0;
        let coefficients = self
            .taps
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t3| {
                        let c = t3[0] * x[0] + t3[1] * x[1] + t3[2] * x[2];
                        real_sum += c.re;
                        c
                    })
                    .collect()
            })
            .collect();
        Ok(CwtResult {
            coefficients,
            real_sum,
        })
    }
}

/// `coefficients[s][n] = Σ_t x(t) · conj(ψ_{a_s, b_n}(t))` for `t ∈ {0, 1, 2}`.
pub fn cwt(series: &[f64], spec: &WaveletSpec) -> Result<CwtResult> {
    CwtKernel::new(spec)?.transform(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoiDecision {
    Roi,
    NonRoi,
}

/// ROI iff the real sum strictly exceeds `threshold`.
pub fn classify_pixel(result: &CwtResult, threshold: f64) -> RoiDecision {
    if result.real_sum > threshold {
        RoiDecision::Roi
    } else {
        RoiDecision::NonRoi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(sigma: f64) -> WaveletSpec {
        WaveletSpec {
            family: WaveletFamily::Gaussian,
            sigma,
            ..WaveletSpec::default()
        }
    }

    fn result_with_sum(real_sum: f64) -> CwtResult {
        CwtResult {
            coefficients: vec![],
            real_sum,
        }
    }

    #[test]
    fn gaussian_peak_and_symmetry() {
        let v = wavelet_eval(&gaussian(1.0), 1.0, 0.0, 0.0).unwrap();
        assert!((v.re - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert_eq!(v.im, 0.0);
        for d in [0.3, 1.0, 2.7] {
            let l = wavelet_eval(&gaussian(0.8), 2.0, 1.5, 1.5 - d).unwrap();
            let r = wavelet_eval(&gaussian(0.8), 2.0, 1.5, 1.5 + d).unwrap();
            assert_eq!(l, r);
        }
    }

    #[test]
    fn gaussian_integral_is_sqrt_scale() {
        // composite Simpson over ±12 widths
        for (a, sigma) in [(1.0, 1.0), (2.0, 1.0), (4.0, 0.5), (0.5, 2.0)] {
            let spec = gaussian(sigma);
            let half = 12.0 * a * sigma;
            let n = 20_000;
            let h = 2.0 * half / n as f64;
            let f = |t: f64| wavelet_eval(&spec, a, 0.3, t).unwrap().re;
            let mut acc = f(0.3 - half) + f(0.3 + half);
            for k in 1..n {
                let t = 0.3 - half + k as f64 * h;
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(t);
            }
            let integral = acc * h / 3.0;
            assert!((integral - a.sqrt()).abs() < 1e-9, "a={a} got {integral}");
        }
    }

    #[test]
    fn cgau1_has_unit_energy_and_zero_mean() {
        let spec = WaveletSpec::default();
        let (n, half) = (40_000, 10.0);
        let h = 2.0 * half / n as f64;
        let (mut energy, mut mean) = (0.0, Complex64::new(0.0, 0.0));
        for k in 0..=n {
            let t = -half + k as f64 * h;
            let v = wavelet_eval(&spec, 1.0, 0.0, t).unwrap();
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            energy += w * v.norm_sqr() * h;
            mean += v * (w * h);
        }
        assert!((energy - 1.0).abs() < 1e-9);
        assert!(mean.norm() < 1e-9);
    }

    #[test]
    fn non_positive_scale() {
        let spec = WaveletSpec::default();
        assert!(matches!(
            wavelet_eval(&spec, 0.0, 0.0, 0.0),
            Err(Error::NonPositiveScale(_))
        ));
        let bad = WaveletSpec {
            scales: vec![1.0, -2.0, 4.0],
            ..WaveletSpec::default()
        };
        assert!(matches!(
            cwt(&[0.0; 3], &bad),
            Err(Error::NonPositiveScale(_))
        ));
    }

    #[test]
    fn zero_series() {
        let r = cwt(&[0.0; 3], &WaveletSpec::default()).unwrap();
        assert_eq!(r.coefficients.len(), 3);
        assert!(r.coefficients.iter().flatten().all(|c| c.norm() == 0.0));
        assert_eq!(r.real_sum, 0.0);
    }

    #[test]
    fn window_length_enforced() {
        assert!(matches!(
            cwt(&[1.0, 2.0], &WaveletSpec::default()),
            Err(Error::BadWindowLength(2))
        ));
    }

    #[test]
    fn constants_cancel_under_complex_gaussian() {
        for c in [1e-6, 0.37, 0.5, 1.0, -3.0, 123.0] {
            let r = cwt(&[c; 3], &WaveletSpec::default()).unwrap();
            assert!(r.real_sum.abs() < 1e-9 * c.abs(), "c={c}: {}", r.real_sum);
            assert_eq!(classify_pixel(&r, 0.0), RoiDecision::NonRoi);
        }
    }

    #[test]
    fn positive_series_is_roi_under_plain_gaussian() {
        let r = cwt(&[0.4, 0.4, 0.4], &gaussian(1.0)).unwrap();
        assert!(r.real_sum > 0.0);
    }

    #[test]
    fn ramp_against_direct_summation() {
        // independent transcription: real and imaginary parts written out
        // from the derivative of exp(-ix - x²), normalised by (2π)^(-1/4)
        let x = [0.2, 0.5, 0.8];
        let norm = (2.0 * std::f64::consts::PI).powf(-0.25);
        let spec = WaveletSpec::default();
        let r = cwt(&x, &spec).unwrap();
        let mut sum = 0.0;
        for (si, &a) in [1.0f64, 2.0, 4.0].iter().enumerate() {
            for (bi, &b) in [0.0f64, 1.0, 2.0].iter().enumerate() {
                let (mut re, mut im) = (0.0, 0.0);
                for t in 0..3 {
                    let u = (t as f64 - b) / a;
                    let env = norm * (-u * u).exp() / a.sqrt();
                    let psi_re = (-2.0 * u * u.cos() - u.sin()) * env;
                    let psi_im = (2.0 * u * u.sin() - u.cos()) * env;
                    // x · conj(ψ)
                    re += x[t] * psi_re;
                    im -= x[t] * psi_im;
                }
                let c = r.coefficients[si][bi];
                assert!((c.re - re).abs() < 1e-12 && (c.im - im).abs() < 1e-12);
                sum += re;
            }
        }
        assert!((r.real_sum - sum).abs() < 1e-11);
        // a rising ramp correlates negatively with the odd real part
        assert!(r.real_sum < 0.0);
    }

    #[test]
    fn classification_boundary() {
        assert_eq!(classify_pixel(&result_with_sum(0.3), 0.0), RoiDecision::Roi);
        assert_eq!(
            classify_pixel(&result_with_sum(0.0), 0.0),
            RoiDecision::NonRoi
        );
        assert_eq!(
            classify_pixel(&result_with_sum(-0.2), 0.0),
            RoiDecision::NonRoi
        );
    }

    proptest! {
        #[test]
        fn transform_is_linear(
            x in proptest::array::uniform3(-1.0f64..1.0),
            y in proptest::array::uniform3(-1.0f64..1.0),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let spec = WaveletSpec::default();
            let mix: Vec<f64> = (0..3).map(|t| alpha * x[t] + beta * y[t]).collect();
            let (rx, ry, rm) = (cwt(&x, &spec).unwrap(), cwt(&y, &spec).unwrap(), cwt(&mix, &spec).unwrap());
            for s in 0..3 {
                for n in 0..3 {
                    let want = rx.coefficients[s][n] * alpha + ry.coefficients[s][n] * beta;
                    prop_assert!((rm.coefficients[s][n] - want).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn classification_is_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0, th in -1.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if classify_pixel(&result_with_sum(lo), th) == RoiDecision::Roi {
                prop_assert_eq!(classify_pixel(&result_with_sum(hi), th), RoiDecision::Roi);
            }
        }

        #[test]
        fn every_constant_is_background(c in -10.0f64..10.0) {
            let r = cwt(&[c; 3], &WaveletSpec::default()).unwrap();
            prop_assert_eq!(classify_pixel(&r, 0.0), RoiDecision::NonRoi);
        }
    }
}
