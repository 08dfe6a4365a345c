//! Seeded synthetic scalp EEG with staged dynamics: pink background
//! noise and a 10 Hz rhythm between seizures, a ramping theta rhythm
//! ahead of an onset, and a high-amplitude 3 Hz rhythm after it.

use crate::error::{PipelineError, Result};
use crate::ingest::{EegRecording, MontageSpec};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SynthSpec {
    pub id: String,
    pub channels: usize,
    pub sampling_rate: u32,
    /// Whole seconds.
    pub duration_s: f64,
    pub onset_s: Option<f64>,
    /// Start of the preictal ramp; defaults to 600 s before the onset.
    pub transition_s: Option<f64>,
    pub seed: u64,
    pub noise_rms_uv: f64,
    pub alpha_amplitude_uv: f64,
    pub theta_amplitude_uv: f64,
    pub ictal_amplitude_uv: f64,
}

impl SynthSpec {
    pub fn new(id: &str, duration_s: f64, onset_s: Option<f64>, seed: u64) -> Self {
        Self {
            id: id.to_string(),
            channels: 22,
            sampling_rate: 256,
            duration_s,
            onset_s,
            transition_s: None,
            seed,
            noise_rms_uv: 20.0,
            alpha_amplitude_uv: 30.0,
            theta_amplitude_uv: 40.0,
            ictal_amplitude_uv: 300.0,
        }
    }

    /// Ramp start: explicit, else 600 s before the onset, floored at 0.
    pub fn transition(&self) -> Option<f64> {
        self.onset_s.map(|onset| {
            self.transition_s.unwrap_or((onset - 600.0).max(0.0))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(PipelineError::InvalidParameter("at least one channel".into()));
        }
        if self.sampling_rate == 0 {
            return Err(PipelineError::InvalidParameter("sampling rate must be positive".into()));
        }
        if !(self.duration_s >= 1.0) || self.duration_s.fract() != 0.0 {
            return Err(PipelineError::InvalidParameter(format!(
                "duration {} must be a whole positive number of seconds",
                self.duration_s
            )));
        }
        if let Some(onset) = self.onset_s {
            if !(onset > 0.0 && onset <= self.duration_s) {
                return Err(PipelineError::InvalidParameter(format!(
                    "onset {onset} outside the {} s recording",
                    self.duration_s
                )));
            }
            if let Some(tr) = self.transition_s {
                if !(tr >= 0.0 && tr <= onset) {
                    return Err(PipelineError::InvalidParameter(format!(
                        "transition {tr} must lie in [0, onset {onset}]"
                    )));
                }
            }
        } else if self.transition_s.is_some() {
            return Err(PipelineError::InvalidParameter(
                "transition given without an onset".into(),
            ));
        }
        for (name, v) in [
            ("noise", self.noise_rms_uv),
            ("alpha", self.alpha_amplitude_uv),
            ("theta", self.theta_amplitude_uv),
            ("ictal", self.ictal_amplitude_uv),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(PipelineError::InvalidParameter(format!(
                    "{name} amplitude {v} must be nonnegative"
                )));
            }
        }
        Ok(())
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization")
    }

    pub fn generate(&self) -> Result<EegRecording> {
        self.validate()?;
        let n = (self.duration_s * self.sampling_rate as f64).round() as usize;
        let rate = self.sampling_rate as f64;
        let transition = self.transition();

        let labels = if self.channels == 22 {
            MontageSpec::standard_22().derivation_labels()
        } else {
            (1..=self.channels).map(|i| format!("CH{i}")).collect()
        };

        let mut planner = FftPlanner::<f64>::new();
        let ifft = planner.plan_fft_inverse(n);

        let mut samples = Array2::<f64>::zeros((self.channels, n));
        for ch in 0..self.channels {
            let mut rng = channel_rng(self.seed, ch);
            let theta_hz = rng.gen_range(4.0..8.0);
            let alpha_phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let theta_phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let ictal_phase = rng.gen_range(0.0..std::f64::consts::TAU);

            let noise = pink_noise(n, rate, self.noise_rms_uv, &mut rng, ifft.as_ref());
            for i in 0..n {
                let t = i as f64 / rate;
                let ictal = self.onset_s.map_or(false, |o| t >= o);
                let mut v = noise[i];
                if ictal {
                    v += self.ictal_amplitude_uv
                        * (std::f64::consts::TAU * 3.0 * t + ictal_phase).sin();
                } else {
                    v += self.alpha_amplitude_uv
                        * (std::f64::consts::TAU * 10.0 * t + alpha_phase).sin();
                    if let (Some(onset), Some(tr)) = (self.onset_s, transition) {
                        if t >= tr && onset > tr {
                            // High floor: the theta rhythm switches on at the
                            // transition and ramps modestly, so the regime
                            // boundary itself stays learnable and localizable.
                            let ramp = 0.8 + 0.2 * (t - tr) / (onset - tr);
                            v += self.theta_amplitude_uv
                                * ramp
                                * (std::f64::consts::TAU * theta_hz * t + theta_phase).sin();
                        }
                    }
                }
                samples[[ch, i]] = v;
            }
        }

        EegRecording::new(&self.id, samples, self.sampling_rate, labels, self.onset_s)
    }
}

fn channel_rng(seed: u64, channel: usize) -> ChaCha8Rng {
    // Distinct stream per channel; the multiplier spreads small indices.
    let mixed = seed ^ (channel as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Noise with power falling as 1/f, shaped in the frequency domain and
/// scaled to the requested RMS.
fn pink_noise(
    n: usize,
    rate: f64,
    rms: f64,
    rng: &mut ChaCha8Rng,
    ifft: &dyn rustfft::Fft<f64>,
) -> Vec<f64> {
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let f = k as f64 * rate / n as f64;
        let scale = 1.0 / f.sqrt();
        let re = randn(rng) * scale;
        let im = randn(rng) * scale;
        let value = if k == half && n % 2 == 0 {
            Complex64::new(re, 0.0)
        } else {
            Complex64::new(re, im)
        };
        spectrum[k] = value;
        if k != n - k {
            spectrum[n - k] = value.conj();
        }
    }
    ifft.process(&mut spectrum);

    let mut out: Vec<f64> = spectrum.iter().map(|c| c.re / n as f64).collect();
    let raw_rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if raw_rms > 0.0 && rms > 0.0 {
        let gain = rms / raw_rms;
        for v in &mut out {
            *v *= gain;
        }
    } else {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    out
}
