//! EDF parsing, bipolar montage derivation, and low-pass filtering.

mod edf;
mod filter;

pub use edf::{read_edf, write_edf};
pub use filter::lowpass_filter;

use crate::error::{PipelineError, Result};
use ndarray::Array2;

/// A multichannel EEG recording in microvolts, channel x time.
#[derive(Debug, Clone)]
pub struct EegRecording {
    pub id: String,
    /// channel x time
    pub samples: Array2<f64>,
    pub sampling_rate: u32,
    pub channel_labels: Vec<String>,
    /// Seizure onset in seconds from recording start, if any.
    pub onset_time: Option<f64>,
}

impl EegRecording {
    pub fn new(
        id: impl Into<String>,
        samples: Array2<f64>,
        sampling_rate: u32,
        channel_labels: Vec<String>,
        onset_time: Option<f64>,
    ) -> Result<Self> {
        let rec = Self { id: id.into(), samples, sampling_rate, channel_labels, onset_time };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sampling_rate == 0 {
            return Err(PipelineError::InvalidParameter("sampling rate must be positive".into()));
        }
        if self.channel_labels.len() != self.samples.nrows() {
            return Err(PipelineError::ShapeMismatch(format!(
                "{} labels for {} channels",
                self.channel_labels.len(),
                self.samples.nrows()
            )));
        }
        if let Some(onset) = self.onset_time {
            if !(0.0..self.duration()).contains(&onset) {
                return Err(PipelineError::InvalidParameter(format!(
                    "onset {onset} outside [0, {})",
                    self.duration()
                )));
            }
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn samples_per_channel(&self) -> usize {
        self.samples.ncols()
    }

    /// Recording length in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.ncols() as f64 / self.sampling_rate as f64
    }
}

/// Ordered bipolar derivations (positive electrode, negative electrode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MontageSpec {
    pub derivations: Vec<(String, String)>,
    pub expected_channels: usize,
}

impl MontageSpec {
    pub fn from_pairs(derivations: Vec<(String, String)>) -> Self {
        let expected_channels = derivations.len();
        Self { derivations, expected_channels }
    }

    /// Parse derivations written as "POS-NEG" labels.
    pub fn parse(names: &[&str]) -> Result<Self> {
        let mut derivations = Vec::with_capacity(names.len());
        for name in names {
            let (pos, neg) = name.split_once('-').ok_or_else(|| {
                PipelineError::InvalidParameter(format!("derivation {name} is not POS-NEG"))
            })?;
            if pos.is_empty() || neg.is_empty() {
                return Err(PipelineError::InvalidParameter(format!(
                    "derivation {name} is not POS-NEG"
                )));
            }
            derivations.push((pos.to_string(), neg.to_string()));
        }
        Ok(Self::from_pairs(derivations))
    }

    pub fn derivation_labels(&self) -> Vec<String> {
        self.derivations.iter().map(|(p, n)| format!("{p}-{n}")).collect()
    }

    /// The 22-channel longitudinal bipolar chain used by the CHB-MIT files:
    /// the standard double banana plus the four temporal-chain derivations.
    pub fn standard_22() -> Self {
        const NAMES: [&str; 22] = [
            "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3", "C3-P3", "P3-O1", "FP2-F4",
            "F4-C4", "C4-P4", "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ",
            "P7-T7", "T7-FT9", "FT9-FT10", "FT10-T8",
        ];
        Self::parse(&NAMES).expect("static derivation list")
    }
}

/// Derive bipolar channels: output i = positive_i - negative_i sample-wise.
///
/// Recordings whose labels already equal the derivation names pass through
/// unchanged. A channel count differing from `expected_channels` is an
/// error; [`apply_montage_coerced`] pads or drops instead.
pub fn apply_montage(rec: &EegRecording, montage: &MontageSpec) -> Result<EegRecording> {
    montage_impl(rec, montage, false)
}

/// Like [`apply_montage`] but zero-pads (or drops) derived channels to the
/// expected count instead of erroring.
pub fn apply_montage_coerced(rec: &EegRecording, montage: &MontageSpec) -> Result<EegRecording> {
    montage_impl(rec, montage, true)
}

fn montage_impl(rec: &EegRecording, montage: &MontageSpec, coerce: bool) -> Result<EegRecording> {
    let derived_labels = montage.derivation_labels();
    if rec.channel_labels == derived_labels {
        if !coerce && rec.channels() != montage.expected_channels {
            return Err(PipelineError::ChannelMismatch {
                got: rec.channels(),
                expected: montage.expected_channels,
            });
        }
        return Ok(rec.clone());
    }

    let index: std::collections::HashMap<&str, usize> = rec
        .channel_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let n_time = rec.samples_per_channel();
    let mut out = Array2::<f64>::zeros((montage.derivations.len(), n_time));
    for (row, (pos, neg)) in montage.derivations.iter().enumerate() {
        let pi = *index
            .get(pos.as_str())
            .ok_or_else(|| PipelineError::MissingElectrode(pos.clone()))?;
        let ni = *index
            .get(neg.as_str())
            .ok_or_else(|| PipelineError::MissingElectrode(neg.clone()))?;
        for t in 0..n_time {
            out[[row, t]] = rec.samples[[pi, t]] - rec.samples[[ni, t]];
        }
    }

    let mut labels = derived_labels;
    if out.nrows() != montage.expected_channels {
        if !coerce {
            return Err(PipelineError::ChannelMismatch {
                got: out.nrows(),
                expected: montage.expected_channels,
            });
        }
        let expected = montage.expected_channels;
        if out.nrows() > expected {
            out = out.slice_move(ndarray::s![..expected, ..]);
            labels.truncate(expected);
        } else {
            let mut padded = Array2::<f64>::zeros((expected, n_time));
            padded.slice_mut(ndarray::s![..out.nrows(), ..]).assign(&out);
            for i in out.nrows()..expected {
                labels.push(format!("PAD{i}"));
            }
            out = padded;
        }
    }

    EegRecording::new(rec.id.clone(), out, rec.sampling_rate, labels, rec.onset_time)
}
