//! Flat `key=value` run configuration shared by the pipeline subcommands.
//!
//! One file configures segmentation, training, ingest filtering, the
//! network architecture widths, significance testing, and the divergence
//! scan. Unknown keys are rejected so typos fail loudly.

use eegpred_core::analysis::ChangePointConfig;
use eegpred_core::{PipelineConfig, TrainConfig};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    /// Ingest low-pass cutoff in Hz.
    pub lowpass_hz: f64,
    /// Significance level for the random-predictor bounds.
    pub significance: f64,
    /// Bonferroni comparison count for the upper bound.
    pub comparisons: usize,
    /// Widths of the six convolution layers, stack order.
    pub conv_filters: Vec<usize>,
    /// Widths of the two hidden dense layers.
    pub dense_units: Vec<usize>,
    pub conv_dropout: f64,
    pub dense_dropout: f64,
    /// Rows of the divergence-scan reference span.
    pub kl_baseline_epochs: usize,
    /// Divergence-scan window length in rows.
    pub kl_window: usize,
    pub kl_sustain_s: f64,
    pub kl_k_keep: usize,
    pub kl_mad_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scan = ChangePointConfig::default();
        Self {
            pipeline: PipelineConfig::default(),
            train: TrainConfig::default(),
            lowpass_hz: 120.0,
            significance: 0.05,
            comparisons: 100,
            conv_filters: vec![64, 64, 50, 40, 32, 20],
            dense_units: vec![250, 100],
            conv_dropout: 0.25,
            dense_dropout: 0.5,
            kl_baseline_epochs: scan.baseline_epochs,
            kl_window: scan.window,
            kl_sustain_s: scan.sustain_seconds,
            kl_k_keep: scan.k_keep,
            kl_mad_scale: scan.mad_scale,
        }
    }
}

impl RunConfig {
    /// Apply one file of `key=value` lines on top of the defaults. Blank
    /// lines and `#` comments are skipped; anything else must parse.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut run = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value, got {line:?}", lineno + 1))?;
            run.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        run.validate()?;
        Ok(run)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "epoch_length_s" => self.pipeline.epoch_length_s = number(key, value)?,
            "overlap_s" => self.pipeline.overlap_s = number(key, value)?,
            "preictal_minutes" => self.pipeline.preictal_minutes = number(key, value)?,
            "smoothing_alpha" => self.pipeline.smoothing_alpha = number(key, value)?,
            "threshold" => self.pipeline.threshold = number(key, value)?,
            "sustain" => self.pipeline.sustain = integer(key, value)?,
            "refractory_s" => self.pipeline.refractory_s = number(key, value)?,
            "folds" => self.pipeline.folds = integer(key, value)?,
            "seed" => {
                let seed: u64 = value
                    .parse()
                    .map_err(|_| format!("{key} needs an unsigned integer, got {value:?}"))?;
                self.set_seed(seed);
            }
            "input_mode" => {
                self.pipeline.input_mode = value.parse().map_err(|e| format!("{e}"))?;
            }
            "batch_size" => self.train.batch_size = integer(key, value)?,
            "max_passes" => self.train.max_passes = integer(key, value)?,
            "patience" => self.train.patience = integer(key, value)?,
            "rho" => self.train.rho = number(key, value)?,
            "epsilon" => self.train.epsilon = number(key, value)?,
            "lowpass_hz" => self.lowpass_hz = number(key, value)?,
            "significance" => self.significance = number(key, value)?,
            "comparisons" => self.comparisons = integer(key, value)?,
            "conv_filters" => self.conv_filters = width_list(key, value, 6)?,
            "dense_units" => self.dense_units = width_list(key, value, 2)?,
            "conv_dropout" => self.conv_dropout = number(key, value)?,
            "dense_dropout" => self.dense_dropout = number(key, value)?,
            "kl_baseline_epochs" => self.kl_baseline_epochs = integer(key, value)?,
            "kl_window" => self.kl_window = integer(key, value)?,
            "kl_sustain_s" => self.kl_sustain_s = number(key, value)?,
            "kl_k_keep" => self.kl_k_keep = integer(key, value)?,
            "kl_mad_scale" => self.kl_mad_scale = number(key, value)?,
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    /// One seed feeds both the pipeline (splits, balancing, weight init)
    /// and the training batch shuffle.
    pub fn set_seed(&mut self, seed: u64) {
        self.pipeline.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<(), String> {
        self.pipeline.validate().map_err(|e| e.to_string())?;
        self.train.validate().map_err(|e| e.to_string())?;
        if !(self.lowpass_hz > 0.0) {
            return Err("lowpass_hz must be positive".into());
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(format!("significance {} must lie in (0, 1)", self.significance));
        }
        if self.comparisons == 0 {
            return Err("comparisons must be at least 1".into());
        }
        for dropout in [self.conv_dropout, self.dense_dropout] {
            if !(0.0..1.0).contains(&dropout) {
                return Err(format!("dropout {dropout} must lie in [0, 1)"));
            }
        }
        if self.kl_baseline_epochs < 2 || self.kl_window < 2 {
            return Err("divergence scan needs at least two baseline rows and a window of two".into());
        }
        if !(self.kl_sustain_s >= 0.0) {
            return Err("kl_sustain_s must be nonnegative".into());
        }
        if self.kl_k_keep == 0 {
            return Err("kl_k_keep must be at least 1".into());
        }
        if !(self.kl_mad_scale > 0.0) {
            return Err("kl_mad_scale must be positive".into());
        }
        Ok(())
    }

    /// Divergence-scan parameters for feature rows spaced `stride_s` apart.
    pub fn scan_config(&self, stride_s: f64) -> ChangePointConfig {
        ChangePointConfig {
            epoch_seconds: stride_s,
            baseline_epochs: self.kl_baseline_epochs,
            window: self.kl_window,
            sustain_seconds: self.kl_sustain_s,
            k_keep: self.kl_k_keep,
            mad_scale: self.kl_mad_scale,
        }
    }

    /// Resolved values in declaration order, for the run manifest.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mode = match self.pipeline.input_mode {
            eegpred_core::dataset::InputMode::Wavelet => "wavelet",
            eegpred_core::dataset::InputMode::Raw => "raw",
        };
        let list = |v: &[usize]| {
            v.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(",")
        };
        vec![
            ("epoch_length_s".into(), self.pipeline.epoch_length_s.to_string()),
            ("overlap_s".into(), self.pipeline.overlap_s.to_string()),
            ("preictal_minutes".into(), self.pipeline.preictal_minutes.to_string()),
            ("smoothing_alpha".into(), self.pipeline.smoothing_alpha.to_string()),
            ("threshold".into(), self.pipeline.threshold.to_string()),
            ("sustain".into(), self.pipeline.sustain.to_string()),
            ("refractory_s".into(), self.pipeline.refractory_s.to_string()),
            ("folds".into(), self.pipeline.folds.to_string()),
            ("seed".into(), self.pipeline.seed.to_string()),
            ("input_mode".into(), mode.into()),
            ("batch_size".into(), self.train.batch_size.to_string()),
            ("max_passes".into(), self.train.max_passes.to_string()),
            ("patience".into(), self.train.patience.to_string()),
            ("rho".into(), self.train.rho.to_string()),
            ("epsilon".into(), self.train.epsilon.to_string()),
            ("lowpass_hz".into(), self.lowpass_hz.to_string()),
            ("significance".into(), self.significance.to_string()),
            ("comparisons".into(), self.comparisons.to_string()),
            ("conv_filters".into(), list(&self.conv_filters)),
            ("dense_units".into(), list(&self.dense_units)),
            ("conv_dropout".into(), self.conv_dropout.to_string()),
            ("dense_dropout".into(), self.dense_dropout.to_string()),
            ("kl_baseline_epochs".into(), self.kl_baseline_epochs.to_string()),
            ("kl_window".into(), self.kl_window.to_string()),
            ("kl_sustain_s".into(), self.kl_sustain_s.to_string()),
            ("kl_k_keep".into(), self.kl_k_keep.to_string()),
            ("kl_mad_scale".into(), self.kl_mad_scale.to_string()),
        ]
    }
}

fn number(key: &str, value: &str) -> Result<f64, String> {
    value.parse().map_err(|_| format!("{key} needs a number, got {value:?}"))
}

fn integer(key: &str, value: &str) -> Result<usize, String> {
    value.parse().map_err(|_| format!("{key} needs an unsigned integer, got {value:?}"))
}

fn width_list(key: &str, value: &str, expected: usize) -> Result<Vec<usize>, String> {
    let widths: Vec<usize> = value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| format!("{key} needs comma-separated widths, got {value:?}"))
        })
        .collect::<Result<_, _>>()?;
    if widths.len() != expected {
        return Err(format!("{key} needs exactly {expected} widths, got {}", widths.len()));
    }
    if widths.contains(&0) {
        return Err(format!("{key} widths must be positive"));
    }
    Ok(widths)
}
