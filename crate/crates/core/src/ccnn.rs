//! Continuous coupled neural network: one neuron per pixel.
//!
//! Each neuron carries feeding `F`, linking `L`, modulation `U`, dynamic
//! threshold `E` and a sigmoid output `Y`. One step computes, in order,
//!
//! ```text
//! F(n) = e^-αf F(n-1) + V_F (M ⋆ Y(n-1)) + S
//! L(n) = e^-αl L(n-1) + V_L (W ⋆ Y(n-1))
//! U(n) = F(n) (1 + β L(n))
//! E(n) = e^-αe E(n-1) + V_E Y(n-1)
//! Y(n) = 1 / (1 + e^-(U(n) - E(n)))
//! ```
//!
//! where `⋆` is a 3×3 correlation with zero padding at the lattice border.
//! `E(n)` only reads step `n-1`, so `Y(n)` sees the threshold built from the
//! previous output.
//!
//! Under a constant stimulus the output settles onto a periodic orbit; under
//! a drive that never repeats it does not. [`calibrate_dichotomy`] searches a
//! parameter grid for that behaviour, and the shipped defaults in
//! `config/ccnn_defaults.json` are the first grid point it accepts.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Plane;

/// 3×3 synaptic weights, row-major, centre at `[1][1]`.
pub type Kernel = [[f64; 3]; 3];

/// A 3×3 patch of stimulus values around one pixel, row-major.
pub type Neighborhood = [f64; 9];

/// Inverse-square-distance weights with a zero centre.
pub const INVERSE_SQUARE_KERNEL: Kernel = [[0.5, 1.0, 0.5], [1.0, 0.0, 1.0], [0.5, 1.0, 0.5]];

fn inverse_square() -> Kernel {
    INVERSE_SQUARE_KERNEL
}

/// Affine map from I-channel values to the stimulus `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub gain: f64,
    pub offset: f64,
}

impl Default for InputScaling {
    fn default() -> Self {
        Self {
            gain: 1.0,
            offset: 0.0,
        }
    }
}

impl InputScaling {
    #[inline]
    pub fn apply(&self, i: f64) -> f64 {
        self.gain * i + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcnnParams {
    pub alpha_f: f64,
    pub alpha_l: f64,
    pub alpha_e: f64,
    pub v_f: f64,
    pub v_l: f64,
    pub v_e: f64,
    pub beta: f64,
    #[serde(default = "inverse_square")]
    pub m_kernel: Kernel,
    #[serde(default = "inverse_square")]
    pub w_kernel: Kernel,
    #[serde(default)]
    pub input: InputScaling,
}

#[derive(Deserialize)]
struct ShippedConfig {
    params: CcnnParams,
    probe: DichotomyProbe,
}

fn shipped() -> &'static ShippedConfig {
    static CFG: OnceLock<ShippedConfig> = OnceLock::new();
    CFG.get_or_init(|| {
        serde_json::from_str(include_str!("../config/ccnn_defaults.json"))
            .expect("embedded ccnn_defaults.json is valid")
    })
}

impl Default for CcnnParams {
    fn default() -> Self {
        shipped().params.clone()
    }
}

impl CcnnParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.alpha_f,
            self.alpha_l,
            self.alpha_e,
            self.v_f,
            self.v_l,
            self.v_e,
            self.beta,
            self.input.gain,
            self.input.offset,
        ];
        if scalars.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("CCNN parameters must be finite".into()));
        }
        if self.alpha_f <= 0.0 || self.alpha_l <= 0.0 || self.alpha_e <= 0.0 {
            return Err(Error::InvalidInput(
                "CCNN decay factors must be positive".into(),
            ));
        }
        for k in [&self.m_kernel, &self.w_kernel] {
            if k[1][1] != 0.0 || k.iter().flatten().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput(
                    "CCNN kernels must be non-negative with a zero centre".into(),
                ));
            }
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Decay {
    f: f64,
    l: f64,
    e: f64,
}

impl Decay {
    fn of(p: &CcnnParams) -> Self {
        Self {
            f: (-p.alpha_f).exp(),
            l: (-p.alpha_l).exp(),
            e: (-p.alpha_e).exp(),
        }
    }
}

#[inline]
fn correlate_at(y: &[f64], h: usize, w: usize, r: usize, c: usize, k: &Kernel) -> f64 {
    let mut acc = 0.0;
    for (dr, krow) in k.iter().enumerate() {
        let rr = r as isize + dr as isize - 1;
        if rr < 0 || rr >= h as isize {
            continue;
        }
        for (dc, &kv) in krow.iter().enumerate() {
            let cc = c as isize + dc as isize - 1;
            if cc < 0 || cc >= w as isize {
                continue;
            }
            acc += kv * y[rr as usize * w + cc as usize];
        }
    }
    acc
}

struct Prev<'a> {
    f: &'a [f64],
    l: &'a [f64],
    e: &'a [f64],
    y: &'a [f64],
}

struct Next<'a> {
    f: &'a mut [f64],
    l: &'a mut [f64],
    u: &'a mut [f64],
    e: &'a mut [f64],
    y: &'a mut [f64],
}

/// One lattice update; `next` must not alias `prev` (double buffering).
fn step_slices(
    h: usize,
    w: usize,
    p: &CcnnParams,
    d: &Decay,
    prev: Prev<'_>,
    s: &[f64],
    next: Next<'_>,
) {
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let my = correlate_at(prev.y, h, w, r, c, &p.m_kernel);
            let wy = correlate_at(prev.y, h, w, r, c, &p.w_kernel);
            let f = d.f * prev.f[i] + p.v_f * my + s[i];
            let l = d.l * prev.l[i] + p.v_l * wy;
            let u = f * (1.0 + p.beta * l);
            let e = d.e * prev.e[i] + p.v_e * prev.y[i];
            next.f[i] = f;
            next.l[i] = l;
            next.u[i] = u;
            next.e[i] = e;
            next.y[i] = sigmoid(u - e);
        }
    }
}

/// Full lattice state. A freshly reset state is all zeros (including `Y`);
/// after any step every `Y` lies in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcnnState {
    pub height: usize,
    pub width: usize,
    pub f: Vec<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub y: Vec<f64>,
}

impl CcnnState {
    pub fn zeros(height: usize, width: usize) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            f: vec![0.0; n],
            l: vec![0.0; n],
            u: vec![0.0; n],
            e: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Advance every neuron by one step under stimulus `s`.
pub fn ccnn_step(state: &CcnnState, s: &Plane, params: &CcnnParams) -> Result<CcnnState> {
    if state.dims() != s.dims() {
        return Err(Error::DimensionMismatch {
            expected: state.dims(),
            got: s.dims(),
        });
    }
    let mut next = CcnnState::zeros(state.height, state.width);
    step_slices(
        state.height,
        state.width,
        params,
        &Decay::of(params),
        Prev {
            f: &state.f,
            l: &state.l,
            e: &state.e,
            y: &state.y,
        },
        &s.data,
        Next {
            f: &mut next.f,
            l: &mut next.l,
            u: &mut next.u,
            e: &mut next.e,
            y: &mut next.y,
        },
    );
    Ok(next)
}

/// Run the lattice from a reset state through `stimuli`, returning the
/// output plane after every step.
pub fn run_lattice(stimuli: &[Plane], params: &CcnnParams) -> Result<Vec<Plane>> {
    let Some(first) = stimuli.first() else {
        return Ok(Vec::new());
    };
    let (h, w) = first.dims();
    let mut state = CcnnState::zeros(h, w);
    let mut out = Vec::with_capacity(stimuli.len());
    for s in stimuli {
        state = ccnn_step(&state, s, params)?;
        out.push(Plane {
            height: h,
            width: w,
            data: state.y.clone(),
        });
    }
    Ok(out)
}

/// Encode one pixel over a 3-frame window.
///
/// `window[n]` is the 3×3 I-channel neighbourhood at frame `n`, centred on
/// the pixel. The 9 neurons start from a reset state and take one step per
/// frame; the centre neuron's output after each step is returned.
pub fn encode_window(window: &[Neighborhood], params: &CcnnParams) -> Result<[f64; 3]> {
    if window.len() != 3 {
        return Err(Error::BadWindowLength(window.len()));
    }
    let d = Decay::of(params);
    let mut cur = [[0.0f64; 9]; 5];
    let mut nxt = [[0.0f64; 9]; 5];
    let mut out = [0.0; 3];
    let mut s = [0.0; 9];
    for (n, patch) in window.iter().enumerate() {
        for (dst, &src) in s.iter_mut().zip(patch) {
            *dst = params.input.apply(src);
        }
        {
            let [f, l, _, e, y] = &cur;
            let [nf, nl, nu, ne, ny] = &mut nxt;
            step_slices(
                3,
                3,
                params,
                &d,
                Prev { f, l, e, y },
                &s,
                Next {
                    f: nf,
                    l: nl,
                    u: nu,
                    e: ne,
                    y: ny,
                },
            );
        }
        std::mem::swap(&mut cur, &mut nxt);
        out[n] = cur[4][4];
    }
    Ok(out)
}

/// Window for a pixel whose neighbours all share its value.
pub fn uniform_window(pixel_i: &[f64]) -> Vec<Neighborhood> {
    pixel_i.iter().map(|&v| [v; 9]).collect()
}

/// Stimulus used to certify the periodic/aperiodic behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyProbe {
    /// Constant stimulus level, also the mean of the driven run.
    pub level: f64,
    /// Amplitude of the sinusoidal drive.
    pub amplitude: f64,
    /// Drive frequency; irrational so the drive itself never repeats.
    pub cycles_per_step: f64,
    /// Side of the uniformly driven lattice; the centre neuron is observed.
    pub lattice: usize,
    pub tail: usize,
    pub tolerance: f64,
    pub max_static_period: usize,
    pub max_driven_period: usize,
}

impl Default for DichotomyProbe {
    fn default() -> Self {
        shipped().probe.clone()
    }
}

/// Smallest `p ≤ max_period` with `|y[n] - y[n-p]| < tol` over the last
/// `tail` samples.
pub fn detect_period(series: &[f64], max_period: usize, tail: usize, tol: f64) -> Option<usize> {
    let n = series.len();
    (1..=max_period)
        .take_while(|&p| tail + p <= n)
        .find(|&p| ((n - tail)..n).all(|k| (series[k] - series[k - p]).abs() < tol))
}

/// Centre-neuron output of a uniformly stimulated lattice.
pub fn probe_trajectory(
    params: &CcnnParams,
    probe: &DichotomyProbe,
    driven: bool,
    n_steps: usize,
) -> Vec<f64> {
    let side = probe.lattice.max(1);
    let centre = (side / 2) * side + side / 2;
    let mut state = CcnnState::zeros(side, side);
    let mut out = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let level = if driven {
            probe.level
                + probe.amplitude * (std::f64::consts::TAU * probe.cycles_per_step * n as f64).sin()
        } else {
            probe.level
        };
        let s = Plane::filled(side, side, level);
        state = ccnn_step(&state, &s, params).expect("probe lattice dims agree");
        out.push(state.y[centre]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DichotomyReport {
    pub static_period: Option<usize>,
    pub driven_period: Option<usize>,
}

impl DichotomyReport {
    pub fn passes(&self) -> bool {
        self.static_period.is_some() && self.driven_period.is_none()
    }
}

pub fn check_dichotomy(
    params: &CcnnParams,
    probe: &DichotomyProbe,
    n_steps: usize,
) -> DichotomyReport {
    let still = probe_trajectory(params, probe, false, n_steps);
    let driven = probe_trajectory(params, probe, true, n_steps);
    DichotomyReport {
        static_period: detect_period(&still, probe.max_static_period, probe.tail, probe.tolerance),
        driven_period: detect_period(
            &driven,
            probe.max_driven_period,
            probe.tail,
            probe.tolerance,
        ),
    }
}

/// First grid point whose constant-input run is periodic and whose driven
/// run is not, using the shipped probe.
pub fn calibrate_dichotomy(grid: &[CcnnParams], n_steps: usize) -> Result<CcnnParams> {
    calibrate_dichotomy_with(grid, n_steps, &DichotomyProbe::default())
}

pub fn calibrate_dichotomy_with(
    grid: &[CcnnParams],
    n_steps: usize,
    probe: &DichotomyProbe,
) -> Result<CcnnParams> {
    if n_steps < 1000 {
        return Err(Error::InvalidInput(format!(
            "calibration needs at least 1000 steps, got {n_steps}"
        )));
    }
    grid.iter()
        .find(|p| p.validate().is_ok() && check_dichotomy(p, probe, n_steps).passes())
        .cloned()
        .ok_or(Error::NoParamsFound)
}

/// The coarse sweep the shipped defaults were drawn from, in search order.
pub fn default_grid() -> Vec<CcnnParams> {
    let mut grid = Vec::new();
    for alpha_f in [0.5, 1.0, 0.1] {
        for alpha_l in [1.0, 0.5] {
            for alpha_e in [1.0, 0.3, 0.1] {
                for v_f in [0.5, 0.1] {
                    for v_l in [0.1, 0.5] {
                        for v_e in [20.0, 5.0, 1.0] {
                            for beta in [0.5, 1.0, 0.1] {
                                grid.push(CcnnParams {
                                    alpha_f,
                                    alpha_l,
                                    alpha_e,
                                    v_f,
                                    v_l,
                                    v_e,
                                    beta,
                                    m_kernel: INVERSE_SQUARE_KERNEL,
                                    w_kernel: INVERSE_SQUARE_KERNEL,
                                    input: InputScaling::default(),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn isolated(alpha_f: f64, alpha_l: f64) -> CcnnParams {
        CcnnParams {
            alpha_f,
            alpha_l,
            alpha_e: 1.0,
            v_f: 0.0,
            v_l: 0.0,
            v_e: 0.0,
            beta: 0.0,
            m_kernel: [[0.0; 3]; 3],
            w_kernel: [[0.0; 3]; 3],
            input: InputScaling::default(),
        }
    }

    #[test]
    fn zero_state_zero_input() {
        let s = ccnn_step(
            &CcnnState::zeros(4, 5),
            &Plane::zeros(4, 5),
            &CcnnParams::default(),
        )
        .unwrap();
        assert!(s
            .f
            .iter()
            .chain(&s.l)
            .chain(&s.u)
            .chain(&s.e)
            .all(|&v| v == 0.0));
        assert!(s.y.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn dimension_mismatch() {
        let err = ccnn_step(
            &CcnnState::zeros(3, 3),
            &Plane::zeros(3, 4),
            &CcnnParams::default(),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn feeding_converges_to_geometric_limit() {
        let p = isolated(0.7, 1.0);
        let s = Plane::filled(1, 1, 0.3);
        let mut st = CcnnState::zeros(1, 1);
        for _ in 0..200 {
            st = ccnn_step(&st, &s, &p).unwrap();
        }
        let limit = 0.3 / (1.0 - (-0.7f64).exp());
        assert!((st.f[0] - limit).abs() < 1e-12);
    }

    #[test]
    fn decay_ratios_are_exact() {
        let p = isolated(0.4, 0.9);
        let mut st = CcnnState::zeros(2, 2);
        st.f.fill(1.0);
        st.l.fill(2.0);
        let zero = Plane::zeros(2, 2);
        for _ in 0..20 {
            let next = ccnn_step(&st, &zero, &p).unwrap();
            for i in 0..4 {
                assert_eq!(next.f[i], st.f[i] * (-0.4f64).exp());
                assert_eq!(next.l[i], st.l[i] * (-0.9f64).exp());
            }
            st = next;
        }
    }

    #[test]
    fn uncoupled_neurons_are_local() {
        let p = isolated(0.5, 0.5);
        let mut a = Plane::filled(5, 5, 0.2);
        let b = a.clone();
        a.set(4, 4, 0.9);
        let (mut sa, mut sb) = (CcnnState::zeros(5, 5), CcnnState::zeros(5, 5));
        for _ in 0..10 {
            sa = ccnn_step(&sa, &a, &p).unwrap();
            sb = ccnn_step(&sb, &b, &p).unwrap();
        }
        assert_eq!(sa.y[0], sb.y[0]);
        assert_eq!(sa.y[12], sb.y[12]);
        assert_ne!(sa.y[24], sb.y[24]);
    }

    #[test]
    fn encode_window_requires_three_frames() {
        let p = CcnnParams::default();
        assert!(matches!(
            encode_window(&uniform_window(&[0.1, 0.2]), &p),
            Err(Error::BadWindowLength(2))
        ));
        assert!(matches!(
            encode_window(&uniform_window(&[0.1; 4]), &p),
            Err(Error::BadWindowLength(4))
        ));
    }

    #[test]
    fn encode_window_zero_and_determinism() {
        let p = CcnnParams::default();
        let y = encode_window(&uniform_window(&[0.0; 3]), &p).unwrap();
        assert_eq!(y[0], 0.5);
        let w = uniform_window(&[0.2, 0.3, 0.4]);
        assert_eq!(
            encode_window(&w, &p).unwrap(),
            encode_window(&w, &p).unwrap()
        );
    }

    #[test]
    fn encode_window_matches_lattice_stepping() {
        let p = CcnnParams::default();
        let window: Vec<Neighborhood> = (0..3)
            .map(|n| std::array::from_fn(|k| 0.05 * k as f64 - 0.1 * n as f64))
            .collect();
        let planes: Vec<Plane> = window
            .iter()
            .map(|nb| Plane::from_vec(3, 3, nb.to_vec()).unwrap())
            .collect();
        let ys = run_lattice(&planes, &p).unwrap();
        let enc = encode_window(&window, &p).unwrap();
        for n in 0..3 {
            assert_eq!(enc[n], ys[n].get(1, 1));
        }
    }

    #[test]
    fn validate_rejects_bad_params() {
        let p = CcnnParams {
            alpha_e: 0.0,
            ..CcnnParams::default()
        };
        assert!(p.validate().is_err());
        let mut p = CcnnParams::default();
        p.m_kernel[1][1] = 1.0;
        assert!(p.validate().is_err());
        let mut p = CcnnParams::default();
        p.w_kernel[0][0] = -0.5;
        assert!(p.validate().is_err());
        assert!(CcnnParams::default().validate().is_ok());
    }

    #[test]
    fn detect_period_basics() {
        let alt: Vec<f64> = (0..400).map(|n| (n % 3) as f64).collect();
        assert_eq!(detect_period(&alt, 50, 200, 1e-6), Some(3));
        let ramp: Vec<f64> = (0..400).map(|n| n as f64).collect();
        assert_eq!(detect_period(&ramp, 50, 200, 1e-6), None);
        // not enough history to test any period
        assert_eq!(detect_period(&[1.0; 10], 5, 20, 1e-6), None);
    }

    #[test]
    fn calibration_needs_long_runs() {
        assert!(matches!(
            calibrate_dichotomy(&default_grid(), 999),
            Err(Error::InvalidInput(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn outputs_stay_in_open_unit_interval(
            stim in proptest::collection::vec(-0.6f64..0.6, 3 * 9),
        ) {
            let p = CcnnParams::default();
            let window: Vec<Neighborhood> =
                stim.chunks(9).map(|c| c.try_into().unwrap()).collect();
            let y = encode_window(&window, &p).unwrap();
            prop_assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
        }

        #[test]
        fn step_is_deterministic(stim in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let p = CcnnParams::default();
            let s = Plane::from_vec(4, 4, stim).unwrap();
            let a = ccnn_step(&CcnnState::zeros(4, 4), &s, &p).unwrap();
            let a2 = ccnn_step(&a, &s, &p).unwrap();
            let b = ccnn_step(&CcnnState::zeros(4, 4), &s, &p).unwrap();
            let b2 = ccnn_step(&b, &s, &p).unwrap();
            prop_assert_eq!(a2, b2);
        }
    }
}
