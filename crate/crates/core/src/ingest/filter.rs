//! Zero-phase low-pass filtering.
//!
//! A fourth-order Butterworth low-pass is realised as two cascaded biquad
//! sections (bilinear transform) and applied forward and backward with
//! odd-reflection edge padding, so the pass is zero-phase and the effective
//! attenuation is the squared magnitude response.

use crate::error::{PipelineError, Result};
use crate::ingest::EegRecording;

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Low-pass section with the given quality factor via the bilinear
    /// transform. DC gain is exactly 1.
    fn lowpass(cutoff_hz: f64, sampling_rate: f64, q: f64) -> Self {
        let k = (std::f64::consts::PI * cutoff_hz / sampling_rate).tan();
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Biquad {
            b0,
            b1: 2.0 * b0,
            b2: b0,
            a1: 2.0 * (k * k - 1.0) * norm,
            a2: (1.0 - k / q + k * k) * norm,
        }
    }

    /// Run with the state pre-loaded to the steady-state response of a
    /// step at the first sample, so constant inputs pass through exactly
    /// and edge transients stay within the reflection padding.
    fn run(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        y.reserve(x.len());
        let x0 = x.first().copied().unwrap_or(0.0);
        let (mut x1, mut x2, mut y1, mut y2) = (x0, x0, x0, x0);
        for &xn in x {
            let yn = self.b0 * xn + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = xn;
            y2 = y1;
            y1 = yn;
            y.push(yn);
        }
    }
}

/// Butterworth pole pair quality factors for order 4: poles at 22.5 and
/// 67.5 degrees from the negative real axis.
fn butterworth4(cutoff_hz: f64, sampling_rate: f64) -> [Biquad; 2] {
    let q1 = 1.0 / (2.0 * (std::f64::consts::PI / 8.0).cos());
    let q2 = 1.0 / (2.0 * (3.0 * std::f64::consts::PI / 8.0).cos());
    [
        Biquad::lowpass(cutoff_hz, sampling_rate, q1),
        Biquad::lowpass(cutoff_hz, sampling_rate, q2),
    ]
}

fn forward(sections: &[Biquad; 2], x: &[f64]) -> Vec<f64> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    sections[0].run(x, &mut a);
    sections[1].run(&a, &mut b);
    b
}

/// Forward-backward pass over one channel with odd-reflection padding of
/// `min(15, n - 1)` samples at each end.
fn filtfilt(sections: &[Biquad; 2], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = 15.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in 0..pad {
        ext.push(2.0 * x[0] - x[pad - i]);
    }
    ext.extend_from_slice(x);
    for i in 0..pad {
        ext.push(2.0 * x[n - 1] - x[n - 2 - i]);
    }

    let mut y = forward(sections, &ext);
    y.reverse();
    let mut z = forward(sections, &y);
    z.reverse();
    z[pad..pad + n].to_vec()
}

/// Apply a zero-phase fourth-order Butterworth low-pass to every channel.
///
/// A cutoff at or above the Nyquist frequency returns the recording
/// unchanged. A non-positive cutoff is an error.
pub fn lowpass_filter(rec: &EegRecording, cutoff_hz: f64) -> Result<EegRecording> {
    if !(cutoff_hz > 0.0) {
        return Err(PipelineError::InvalidParameter(format!(
            "low-pass cutoff {cutoff_hz} Hz must be positive"
        )));
    }
    let nyquist = rec.sampling_rate as f64 / 2.0;
    if cutoff_hz >= nyquist {
        return Ok(rec.clone());
    }

    let sections = butterworth4(cutoff_hz, rec.sampling_rate as f64);
    let mut out = rec.clone();
    for mut row in out.samples.rows_mut() {
        let x: Vec<f64> = row.iter().copied().collect();
        let y = filtfilt(&sections, &x);
        for (dst, v) in row.iter_mut().zip(y) {
            *dst = v;
        }
    }
    Ok(out)
}
