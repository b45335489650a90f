//! RGB ⇄ YIQ conversion with the NTSC (FCC) matrix.
//!
//! The I plane is the stimulus for the coupled neural encoder.

use std::sync::OnceLock;

use crate::frame::{Plane, RgbFrame};

/// Rows produce Y, I and Q from (R, G, B).
pub const RGB_TO_YIQ: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.5959, -0.2746, -0.3213],
    [0.2115, -0.5227, 0.3112],
];

fn inverse3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            // cofactor of (c, r), i.e. the adjugate entry
            let (r0, r1) = match c {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match r {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * minor / det;
        }
    }
    inv
}

pub fn yiq_to_rgb_matrix() -> &'static [[f64; 3]; 3] {
    static INV: OnceLock<[[f64; 3]; 3]> = OnceLock::new();
    INV.get_or_init(|| inverse3(&RGB_TO_YIQ))
}

#[inline]
fn apply(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn rgb_to_yiq_pixel(rgb: [f64; 3]) -> [f64; 3] {
    apply(&RGB_TO_YIQ, rgb)
}

#[inline]
pub fn yiq_to_rgb_pixel(yiq: [f64; 3]) -> [f64; 3] {
    apply(yiq_to_rgb_matrix(), yiq)
}

/// In-phase chroma of one pixel; the only plane the encoder needs.
#[inline]
pub fn i_component(rgb: [f32; 3]) -> f64 {
    let m = &RGB_TO_YIQ[1];
    m[0] * rgb[0] as f64 + m[1] * rgb[1] as f64 + m[2] * rgb[2] as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct YiqFrame {
    pub y: Plane,
    pub i: Plane,
    pub q: Plane,
}

pub fn rgb_to_yiq(frame: &RgbFrame) -> YiqFrame {
    let (h, w) = frame.dims();
    let mut y = Plane::zeros(h, w);
    let mut i = Plane::zeros(h, w);
    let mut q = Plane::zeros(h, w);
    for (k, px) in frame.data.chunks_exact(3).enumerate() {
        let out = rgb_to_yiq_pixel([px[0] as f64, px[1] as f64, px[2] as f64]);
        y.data[k] = out[0];
        i.data[k] = out[1];
        q.data[k] = out[2];
    }
    YiqFrame { y, i, q }
}

/// Inverse map. Values are not clamped, so the output is only a valid
/// [`RgbFrame`] when the input came from [`rgb_to_yiq`].
pub fn yiq_to_rgb(frame: &YiqFrame) -> RgbFrame {
    let (h, w) = frame.y.dims();
    let mut out = RgbFrame::black(h, w);
    for k in 0..h * w {
        let rgb = yiq_to_rgb_pixel([frame.y.data[k], frame.i.data[k], frame.q.data[k]]);
        out.data[3 * k] = rgb[0] as f32;
        out.data[3 * k + 1] = rgb[1] as f32;
        out.data[3 * k + 2] = rgb[2] as f32;
    }
    out
}

pub fn i_plane(frame: &RgbFrame) -> Plane {
    let (h, w) = frame.dims();
    let data = frame
        .data
        .chunks_exact(3)
        .map(|px| i_component([px[0], px[1], px[2]]))
        .collect();
    Plane {
        height: h,
        width: w,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn white_black_red() {
        assert!(close(
            rgb_to_yiq_pixel([1.0, 1.0, 1.0]),
            [1.0, 0.0, 0.0],
            1e-12
        ));
        assert_eq!(rgb_to_yiq_pixel([0.0; 3]), [0.0; 3]);
        assert!(close(
            rgb_to_yiq_pixel([1.0, 0.0, 0.0]),
            [0.299, 0.5959, 0.2115],
            1e-15
        ));
    }

    #[test]
    fn inverse_examples() {
        assert!(close(
            yiq_to_rgb_pixel([1.0, 0.0, 0.0]),
            [1.0, 1.0, 1.0],
            1e-12
        ));
        assert_eq!(yiq_to_rgb_pixel([0.0; 3]), [0.0; 3]);
    }

    #[test]
    fn inverse_matrix_is_inverse() {
        let inv = yiq_to_rgb_matrix();
        for r in 0..3 {
            for c in 0..3 {
                let v: f64 = (0..3).map(|k| RGB_TO_YIQ[r][k] * inv[k][c]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frame_level_matches_pixel_level() {
        let mut f = RgbFrame::black(2, 1);
        f.set_pixel(0, 0, [0.2, 0.4, 0.6]);
        f.set_pixel(1, 0, [1.0, 0.5, 0.0]);
        let yiq = rgb_to_yiq(&f);
        let want = rgb_to_yiq_pixel([0.2f32 as f64, 0.4f32 as f64, 0.6f32 as f64]);
        assert_eq!(yiq.i.get(0, 0), want[1]);
        assert_eq!(i_plane(&f), yiq.i);
        let back = yiq_to_rgb(&yiq);
        for (a, b) in back.data.iter().zip(&f.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = yiq_to_rgb_pixel(rgb_to_yiq_pixel([r, g, b]));
            prop_assert!(close(back, [r, g, b], 1e-6));
        }

        #[test]
        fn linear(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0, a in -4.0f64..4.0) {
            let x = rgb_to_yiq_pixel([r, g, b]);
            let ax = rgb_to_yiq_pixel([a * r, a * g, a * b]);
            prop_assert!(close(ax, [a * x[0], a * x[1], a * x[2]], 1e-12));
        }
    }
}
