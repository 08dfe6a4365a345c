//! Turning per-epoch class probabilities into alarms and per-recording
//! prediction outcomes.

use crate::dataset::{Label, PipelineConfig};
use crate::error::{PipelineError, Result};
use ndarray::Array2;
use std::io::Write;
use std::path::Path;

/// Probability that a seizure is oncoming: one minus the interictal
/// probability. The row must be a distribution over at least two classes.
pub fn oncoming_probability(class_probs: &[f64]) -> Result<f64> {
    if class_probs.len() < 2 {
        return Err(PipelineError::InvalidParameter(format!(
            "{} classes cannot express an oncoming state",
            class_probs.len()
        )));
    }
    if class_probs.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan()) {
        return Err(PipelineError::InvalidParameter(
            "class probabilities outside [0, 1]".into(),
        ));
    }
    let sum: f64 = class_probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(PipelineError::InvalidParameter(format!(
            "class probabilities sum to {sum}"
        )));
    }
    Ok(1.0 - class_probs[Label::Interictal.class_index()])
}

/// Exponential smoothing: `s(0) = p(0)`, then
/// `s(t) = alpha * p(t) + (1 - alpha) * s(t - 1)`.
pub fn smooth(p: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.len());
    let mut prev = match p.first() {
        Some(&first) => first,
        None => return out,
    };
    out.push(prev);
    for &v in &p[1..] {
        prev = alpha * v + (1.0 - alpha) * prev;
        out.push(prev);
    }
    out
}

/// Alarm times: a run of at least `sustain` consecutive smoothed values at
/// or above `threshold` raises one alarm, stamped at the run's first epoch.
/// An alarm whose stamp falls within `refractory_s` of the previously
/// emitted one is suppressed.
pub fn detect_alarms(
    smoothed: &[f64],
    times: &[f64],
    threshold: f64,
    sustain: usize,
    refractory_s: f64,
) -> Result<Vec<f64>> {
    if smoothed.len() != times.len() {
        return Err(PipelineError::ShapeMismatch(format!(
            "{} smoothed values for {} epoch times",
            smoothed.len(),
            times.len()
        )));
    }
    if sustain == 0 {
        return Err(PipelineError::InvalidParameter("sustain must be at least 1".into()));
    }
    let mut alarms = Vec::new();
    let mut run = 0usize;
    let mut run_start = 0usize;
    let mut last_emitted: Option<f64> = None;
    for (i, &s) in smoothed.iter().enumerate() {
        if s >= threshold {
            if run == 0 {
                run_start = i;
            }
            run += 1;
            if run == sustain {
                let at = times[run_start];
                let clear = match last_emitted {
                    Some(prev) => at - prev >= refractory_s,
                    None => true,
                };
                if clear {
                    alarms.push(at);
                    last_emitted = Some(at);
                }
            }
        } else {
            run = 0;
        }
    }
    Ok(alarms)
}

/// Per-epoch record of the prediction pipeline over one recording.
#[derive(Debug, Clone)]
pub struct PredictionTrace {
    pub recording_id: String,
    pub times: Vec<f64>,
    /// Raw oncoming probability per epoch.
    pub p: Vec<f64>,
    /// Smoothed probability per epoch.
    pub s: Vec<f64>,
    /// True at epochs where an alarm was stamped.
    pub alarm_flags: Vec<bool>,
    pub labels: Vec<Label>,
}

impl PredictionTrace {
    /// CSV with one row per epoch: time_s,p,s,alarm_flag,label
    /// (label is the class index).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("time_s,p,s,alarm_flag,label\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.times[i],
                self.p[i],
                self.s[i],
                u8::from(self.alarm_flags[i]),
                self.labels[i].class_index()
            ));
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Outcome of one recording. `predicted` is `None` for onset-free
/// recordings; alarms at or after onset count neither as predictions nor as
/// false alarms.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RecordingScore {
    pub recording_id: String,
    pub predicted: Option<bool>,
    /// Seconds from the predicting alarm to onset.
    pub prediction_time_s: Option<f64>,
    pub false_alarm_times: Vec<f64>,
    /// Interictal exposure: everything before the preictal horizon, or the
    /// whole duration when there is no onset.
    pub interictal_hours: f64,
}

/// Score one recording from its per-epoch class probabilities.
pub fn score_recording(
    recording_id: &str,
    times: &[f64],
    class_probs: &Array2<f64>,
    labels: &[Label],
    onset_time: Option<f64>,
    duration_s: f64,
    config: &PipelineConfig,
) -> Result<(RecordingScore, PredictionTrace)> {
    config.validate()?;
    if times.len() != class_probs.nrows() || times.len() != labels.len() {
        return Err(PipelineError::ShapeMismatch(format!(
            "{} times, {} probability rows, {} labels",
            times.len(),
            class_probs.nrows(),
            labels.len()
        )));
    }

    let mut p = Vec::with_capacity(times.len());
    for row in class_probs.rows() {
        p.push(oncoming_probability(row.as_slice().unwrap())?);
    }
    let s = smooth(&p, config.smoothing_alpha);
    let alarms = detect_alarms(&s, times, config.threshold, config.sustain, config.refractory_s)?;

    let horizon = config.preictal_seconds();
    let (predicted, prediction_time_s, false_alarm_times, interictal_s) = match onset_time {
        Some(onset) => {
            let window_start = onset - horizon;
            let hit = alarms
                .iter()
                .find(|&&a| a >= window_start && a < onset)
                .copied();
            let false_alarms: Vec<f64> =
                alarms.iter().filter(|&&a| a < window_start).copied().collect();
            (
                Some(hit.is_some()),
                hit.map(|a| onset - a),
                false_alarms,
                (onset - horizon).max(0.0),
            )
        }
        None => (None, None, alarms.clone(), duration_s),
    };

    let alarm_flags: Vec<bool> = times
        .iter()
        .map(|t| alarms.iter().any(|a| a == t))
        .collect();

    let score = RecordingScore {
        recording_id: recording_id.to_string(),
        predicted,
        prediction_time_s,
        false_alarm_times,
        interictal_hours: interictal_s / 3600.0,
    };
    let trace = PredictionTrace {
        recording_id: recording_id.to_string(),
        times: times.to_vec(),
        p,
        s,
        alarm_flags,
        labels: labels.to_vec(),
    };
    Ok((score, trace))
}
