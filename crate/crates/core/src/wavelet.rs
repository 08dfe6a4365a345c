//! Continuous wavelet transform with the Mexican hat wavelet.
//!
//! Each channel is convolved with a discretely sampled Mexican hat at dyadic
//! scales. Convolution runs in the frequency domain (zero-padded linear
//! convolution), coefficients are computed in f64 and stored as f32.

use crate::error::{PipelineError, Result};
use crate::ingest::EegRecording;
use ndarray::{Array2, Array3};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

/// The ten dyadic scales 1, 2, 4, ..., 512.
pub fn dyadic_scales() -> Vec<f64> {
    (0..10).map(|i| f64::from(1u32 << i)).collect()
}

/// Kernel half-width: five scale units, rounded up.
pub fn default_support(scale: f64) -> usize {
    (5.0 * scale).ceil() as usize
}

/// Mexican hat sampled at integer offsets -support..=support:
/// `(2 / (sqrt(3) * pi^(1/4))) * (1 - (n/a)^2) * exp(-n^2 / (2 a^2)) / sqrt(a)`.
pub fn mexican_hat_kernel(scale: f64, support: usize) -> Result<Vec<f64>> {
    if !(scale > 0.0) {
        return Err(PipelineError::InvalidParameter(format!(
            "wavelet scale {scale} must be positive"
        )));
    }
    let norm = 2.0 / (3.0f64.sqrt() * std::f64::consts::PI.powf(0.25)) / scale.sqrt();
    let mut kernel = Vec::with_capacity(2 * support + 1);
    for i in 0..=2 * support {
        let n = i as f64 - support as f64;
        let u = n / scale;
        kernel.push(norm * (1.0 - u * u) * (-0.5 * u * u).exp());
    }
    Ok(kernel)
}

/// Dominant response frequency of the scale-`a` kernel at `sampling_rate`:
/// `sqrt(2) * rate / (2 * pi * a)`.
pub fn scale_peak_frequency(scale: f64, sampling_rate: f64) -> f64 {
    std::f64::consts::SQRT_2 * sampling_rate / (2.0 * std::f64::consts::PI * scale)
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Transform one channel. Returns time x scale coefficients; the signal is
/// zero-padded at the edges, so the first and last `default_support(scale)`
/// samples of each column carry boundary effects.
pub fn cwt_channel(signal: &[f64], scales: &[f64]) -> Result<Array2<f64>> {
    if scales.is_empty() {
        return Err(PipelineError::InvalidParameter("no wavelet scales".into()));
    }
    let n = signal.len();
    if n == 0 {
        return Err(PipelineError::InvalidParameter("empty signal".into()));
    }

    let mut planner = FftPlanner::<f64>::new();
    let mut signal_spectra: HashMap<usize, Vec<Complex64>> = HashMap::new();
    let mut out = Array2::<f64>::zeros((n, scales.len()));

    for (si, &scale) in scales.iter().enumerate() {
        let support = default_support(scale);
        let kernel = mexican_hat_kernel(scale, support)?;
        let klen = kernel.len();
        let size = next_pow2(n + klen - 1);

        let sig_fft = signal_spectra.entry(size).or_insert_with(|| {
            let mut buf: Vec<Complex64> =
                signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            buf.resize(size, Complex64::new(0.0, 0.0));
            planner.plan_fft_forward(size).process(&mut buf);
            buf
        });

        let mut kbuf: Vec<Complex64> =
            kernel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        kbuf.resize(size, Complex64::new(0.0, 0.0));
        planner.plan_fft_forward(size).process(&mut kbuf);

        for (k, s) in kbuf.iter_mut().zip(sig_fft.iter()) {
            *k *= s;
        }
        planner.plan_fft_inverse(size).process(&mut kbuf);

        // Full convolution index t + support is the centre-aligned sample t.
        let inv = 1.0 / size as f64;
        for t in 0..n {
            out[[t, si]] = kbuf[t + support].re * inv;
        }
    }
    Ok(out)
}

/// CWT coefficients for a whole recording, time x scale x channel.
#[derive(Debug, Clone)]
pub struct WaveletTensor {
    pub coefficients: Array3<f32>,
    pub scales: Vec<f64>,
    pub sampling_rate: u32,
    pub onset_time: Option<f64>,
    pub id: String,
}

impl WaveletTensor {
    pub fn time_steps(&self) -> usize {
        self.coefficients.dim().0
    }

    pub fn n_scales(&self) -> usize {
        self.coefficients.dim().1
    }

    pub fn channels(&self) -> usize {
        self.coefficients.dim().2
    }
}

/// Transform every channel of a recording at the given scales.
pub fn build_wavelet_tensor(rec: &EegRecording, scales: &[f64]) -> Result<WaveletTensor> {
    rec.validate()?;
    let n = rec.samples_per_channel();
    let mut coefficients = Array3::<f32>::zeros((n, scales.len(), rec.channels()));
    for ch in 0..rec.channels() {
        let signal: Vec<f64> = rec.samples.row(ch).iter().copied().collect();
        let plane = cwt_channel(&signal, scales)?;
        for t in 0..n {
            for si in 0..scales.len() {
                coefficients[[t, si, ch]] = plane[[t, si]] as f32;
            }
        }
    }
    Ok(WaveletTensor {
        coefficients,
        scales: scales.to_vec(),
        sampling_rate: rec.sampling_rate,
        onset_time: rec.onset_time,
        id: rec.id.clone(),
    })
}

const CACHE_MAGIC: &[u8; 4] = b"WTC1";

impl WaveletTensor {
    /// Serialize to a little-endian binary cache.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let (t, s, c) = self.coefficients.dim();
        let mut out = Vec::with_capacity(64 + t * s * c * 4);
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&(t as u64).to_le_bytes());
        out.extend_from_slice(&(s as u64).to_le_bytes());
        out.extend_from_slice(&(c as u64).to_le_bytes());
        out.extend_from_slice(&self.sampling_rate.to_le_bytes());
        out.push(self.onset_time.is_some() as u8);
        out.extend_from_slice(&self.onset_time.unwrap_or(0.0).to_le_bytes());
        out.extend_from_slice(&(self.id.len() as u32).to_le_bytes());
        out.extend_from_slice(self.id.as_bytes());
        for &scale in &self.scales {
            out.extend_from_slice(&scale.to_le_bytes());
        }
        for &v in self.coefficients.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }

    /// Read a cache written by [`WaveletTensor::write_cache`].
    pub fn read_cache(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut at = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let slice = bytes.get(at..at + n).ok_or_else(|| {
                PipelineError::Truncated(format!("cache ends inside field at {at}"))
            })?;
            at += n;
            Ok(slice)
        };

        if take(4)? != CACHE_MAGIC {
            return Err(PipelineError::MalformedHeader("not a wavelet cache".into()));
        }
        let t = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let s = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let c = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let sampling_rate = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let has_onset = take(1)?[0] != 0;
        let onset = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let id_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let id = String::from_utf8(take(id_len)?.to_vec())
            .map_err(|_| PipelineError::MalformedHeader("cache id is not utf-8".into()))?;
        let mut scales = Vec::with_capacity(s);
        for _ in 0..s {
            scales.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        let mut flat = Vec::with_capacity(t * s * c);
        for _ in 0..t * s * c {
            flat.push(f32::from_le_bytes(take(4)?.try_into().unwrap()));
        }
        let coefficients = Array3::from_shape_vec((t, s, c), flat)
            .map_err(|e| PipelineError::ShapeMismatch(e.to_string()))?;
        Ok(Self {
            coefficients,
            scales,
            sampling_rate,
            onset_time: has_onset.then_some(onset),
            id,
        })
    }
}
