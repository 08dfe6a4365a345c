//! EDF reading and writing.
//!
//! Layout: a 256-byte fixed header, then 256 bytes per signal of
//! field-grouped signal headers (all labels, then all transducer fields,
//! and so on), then data records of little-endian i16 samples interleaved
//! record by record. Physical values are reconstructed per signal as
//! `phys_min + (digital - dig_min) * (phys_max - phys_min) / (dig_max - dig_min)`.

use super::EegRecording;
use crate::error::{PipelineError, Result};
use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;

const HEADER_LEN: usize = 256;
const SIGNAL_HEADER_LEN: usize = 256;
const ANNOTATION_LABEL: &str = "EDF Annotations";

/// Writer quantization: 0.1 uV per digital unit.
const PHYS_MIN: f64 = -3276.8;
const PHYS_MAX: f64 = 3276.7;
const DIG_MIN: i32 = -32768;
const DIG_MAX: i32 = 32767;

struct SignalHeader {
    label: String,
    phys_min: f64,
    phys_max: f64,
    dig_min: i32,
    dig_max: i32,
    samples_per_record: usize,
}

impl SignalHeader {
    fn gain(&self) -> f64 {
        (self.phys_max - self.phys_min) / (self.dig_max - self.dig_min) as f64
    }

    fn physical(&self, digital: i16) -> f64 {
        self.phys_min + (digital as i32 - self.dig_min) as f64 * self.gain()
    }
}

fn field(bytes: &[u8], start: usize, len: usize) -> Result<String> {
    let raw = bytes.get(start..start + len).ok_or_else(|| {
        PipelineError::MalformedHeader(format!("field at {start}+{len} out of bounds"))
    })?;
    let text = std::str::from_utf8(raw)
        .map_err(|_| PipelineError::MalformedHeader(format!("non-ascii field at {start}")))?;
    Ok(text.trim().to_string())
}

fn numeric<T: std::str::FromStr>(bytes: &[u8], start: usize, len: usize, name: &str) -> Result<T> {
    let text = field(bytes, start, len)?;
    text.parse::<T>()
        .map_err(|_| PipelineError::MalformedHeader(format!("{name} is not numeric: {text:?}")))
}

/// Read an EDF file. Annotation signals are dropped; the remaining signals
/// must share one integral sampling rate. Onset time is not carried by the
/// format and is always `None`.
pub fn read_edf(path: &Path) -> Result<EegRecording> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(PipelineError::MalformedHeader(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }

    let ns: usize = numeric(&bytes, 252, 4, "signal count")?;
    if ns == 0 {
        return Err(PipelineError::MalformedHeader("zero signals".into()));
    }
    let header_bytes: usize = numeric(&bytes, 184, 8, "header byte count")?;
    let expected_header = HEADER_LEN + SIGNAL_HEADER_LEN * ns;
    if header_bytes != expected_header {
        return Err(PipelineError::MalformedHeader(format!(
            "header byte count {header_bytes} does not match {expected_header} for {ns} signals"
        )));
    }
    if bytes.len() < expected_header {
        return Err(PipelineError::MalformedHeader(format!(
            "file is {} bytes, shorter than the declared {expected_header}-byte header",
            bytes.len()
        )));
    }
    let n_records: i64 = numeric(&bytes, 236, 8, "record count")?;
    if n_records < 0 {
        return Err(PipelineError::MalformedHeader(format!(
            "record count {n_records} is negative"
        )));
    }
    let n_records = n_records as usize;
    let record_duration: f64 = numeric(&bytes, 244, 8, "record duration")?;
    if !(record_duration > 0.0) {
        return Err(PipelineError::MalformedHeader(format!(
            "record duration {record_duration} is not positive"
        )));
    }

    // Signal headers are grouped by field: ns labels, then ns transducer
    // fields, and so on.
    let mut offset = HEADER_LEN;
    let labels: Vec<String> = (0..ns)
        .map(|i| field(&bytes, offset + 16 * i, 16))
        .collect::<Result<_>>()?;
    offset += ns * 16; // label
    offset += ns * 80; // transducer type
    offset += ns * 8; // physical dimension
    let phys_min_at = offset;
    offset += ns * 8;
    let phys_max_at = offset;
    offset += ns * 8;
    let dig_min_at = offset;
    offset += ns * 8;
    let dig_max_at = offset;
    offset += ns * 8;
    offset += ns * 80; // prefiltering
    let spr_at = offset;

    let mut headers = Vec::with_capacity(ns);
    for i in 0..ns {
        headers.push(SignalHeader {
            label: labels[i].clone(),
            phys_min: numeric(&bytes, phys_min_at + 8 * i, 8, "physical minimum")?,
            phys_max: numeric(&bytes, phys_max_at + 8 * i, 8, "physical maximum")?,
            dig_min: numeric(&bytes, dig_min_at + 8 * i, 8, "digital minimum")?,
            dig_max: numeric(&bytes, dig_max_at + 8 * i, 8, "digital maximum")?,
            samples_per_record: numeric(&bytes, spr_at + 8 * i, 8, "samples per record")?,
        });
    }

    let record_stride: usize = headers.iter().map(|h| h.samples_per_record).sum();
    let data_len = n_records * record_stride * 2;
    let data = bytes.get(expected_header..expected_header + data_len).ok_or_else(|| {
        PipelineError::Truncated(format!(
            "data section holds {} bytes, header promises {data_len}",
            bytes.len() - expected_header
        ))
    })?;

    let kept: Vec<usize> = (0..ns).filter(|&i| headers[i].label != ANNOTATION_LABEL).collect();
    if kept.is_empty() {
        return Err(PipelineError::MalformedHeader("no data signals".into()));
    }
    for &i in &kept {
        let h = &headers[i];
        if h.dig_max <= h.dig_min {
            return Err(PipelineError::MalformedHeader(format!(
                "signal {:?} digital range [{}, {}]",
                h.label, h.dig_min, h.dig_max
            )));
        }
        if h.phys_max == h.phys_min {
            return Err(PipelineError::MalformedHeader(format!(
                "signal {:?} has an empty physical range",
                h.label
            )));
        }
    }

    let mut rate = 0u32;
    for &i in &kept {
        let r = headers[i].samples_per_record as f64 / record_duration;
        if r <= 0.0 || (r - r.round()).abs() > 1e-9 {
            return Err(PipelineError::InvalidParameter(format!(
                "signal {:?} rate {r} is not a whole number of samples per second",
                headers[i].label
            )));
        }
        let r = r.round() as u32;
        if rate == 0 {
            rate = r;
        } else if r != rate {
            return Err(PipelineError::InvalidParameter(format!(
                "signals have inconsistent sampling rates ({rate} and {r})"
            )));
        }
    }

    let samples_per_channel = n_records * headers[kept[0]].samples_per_record;
    let mut samples = Array2::<f64>::zeros((kept.len(), samples_per_channel));
    let mut cursor = 0usize;
    for record in 0..n_records {
        for (i, h) in headers.iter().enumerate() {
            let n = h.samples_per_record;
            if let Some(row) = kept.iter().position(|&k| k == i) {
                let base = record * n;
                for s in 0..n {
                    let lo = data[(cursor + s) * 2];
                    let hi = data[(cursor + s) * 2 + 1];
                    let digital = i16::from_le_bytes([lo, hi]);
                    samples[[row, base + s]] = h.physical(digital);
                }
            }
            cursor += n;
        }
    }

    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recording".to_string());
    let channel_labels = kept.iter().map(|&i| headers[i].label.clone()).collect();
    EegRecording::new(id, samples, rate, channel_labels, None)
}

fn push_field(out: &mut Vec<u8>, text: &str, len: usize) -> Result<()> {
    if text.len() > len {
        return Err(PipelineError::InvalidParameter(format!(
            "header field {text:?} exceeds {len} bytes"
        )));
    }
    out.extend_from_slice(text.as_bytes());
    out.resize(out.len() + (len - text.len()), b' ');
    Ok(())
}

/// Write a recording as EDF with one-second records and a fixed physical
/// range of [-3276.8, 3276.7] uV (0.1 uV per digital unit). Samples are
/// clamped to that range and rounded to the nearest digital value. The
/// recording length must be a whole number of seconds.
pub fn write_edf(rec: &EegRecording, path: &Path) -> Result<()> {
    rec.validate()?;
    if rec.channels() == 0 {
        return Err(PipelineError::InvalidParameter("no channels to write".into()));
    }
    let rate = rec.sampling_rate as usize;
    if rec.samples_per_channel() % rate != 0 {
        return Err(PipelineError::InvalidParameter(format!(
            "{} samples at {rate} Hz is not a whole number of one-second records",
            rec.samples_per_channel()
        )));
    }
    let n_records = rec.samples_per_channel() / rate;
    let ns = rec.channels();

    let mut out = Vec::with_capacity(HEADER_LEN + SIGNAL_HEADER_LEN * ns + ns * rec.samples_per_channel() * 2);
    push_field(&mut out, "0", 8)?; // version
    push_field(&mut out, "X", 80)?; // patient identification
    push_field(&mut out, &rec.id, 80)?; // recording identification
    push_field(&mut out, "01.01.00", 8)?;
    push_field(&mut out, "00.00.00", 8)?;
    push_field(&mut out, &(HEADER_LEN + SIGNAL_HEADER_LEN * ns).to_string(), 8)?;
    push_field(&mut out, "", 44)?; // reserved
    push_field(&mut out, &n_records.to_string(), 8)?;
    push_field(&mut out, "1", 8)?; // record duration, seconds
    push_field(&mut out, &ns.to_string(), 4)?;

    for label in &rec.channel_labels {
        push_field(&mut out, label, 16)?;
    }
    for _ in 0..ns {
        push_field(&mut out, "", 80)?; // transducer type
    }
    for _ in 0..ns {
        push_field(&mut out, "uV", 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &PHYS_MIN.to_string(), 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &PHYS_MAX.to_string(), 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &DIG_MIN.to_string(), 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &DIG_MAX.to_string(), 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, "", 80)?; // prefiltering
    }
    for _ in 0..ns {
        push_field(&mut out, &rate.to_string(), 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, "", 32)?; // reserved
    }

    let scale = (DIG_MAX - DIG_MIN) as f64 / (PHYS_MAX - PHYS_MIN);
    for record in 0..n_records {
        for ch in 0..ns {
            for s in 0..rate {
                let phys = rec.samples[[ch, record * rate + s]];
                let q = ((phys - PHYS_MIN) * scale).round() as i64 + DIG_MIN as i64;
                let digital = q.clamp(DIG_MIN as i64, DIG_MAX as i64) as i16;
                out.extend_from_slice(&digital.to_le_bytes());
            }
        }
    }

    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}
