//! Epoch extraction, labeling, normalization, class balancing, and
//! recording-grouped cross-validation splits.

use crate::error::{PipelineError, Result};
use crate::ingest::EegRecording;
use crate::wavelet::WaveletTensor;
use ndarray::{Array3, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Epoch class. The discriminant is the network's class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Interictal = 0,
    Preictal = 1,
    Ictal = 2,
}

impl Label {
    pub fn class_index(self) -> usize {
        self as usize
    }

    pub fn from_class_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Label::Interictal),
            1 => Ok(Label::Preictal),
            2 => Ok(Label::Ictal),
            other => Err(PipelineError::InvalidParameter(format!(
                "class index {other} out of range"
            ))),
        }
    }
}

/// One training example: a time x scale x channel block plus its label.
#[derive(Debug, Clone)]
pub struct LabeledEpoch {
    pub data: Array3<f32>,
    pub label: Label,
    /// Epoch start in seconds from recording start.
    pub start_time: f64,
    pub recording_id: String,
}

/// Network input representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputMode {
    Wavelet,
    Raw,
}

impl std::str::FromStr for InputMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wavelet" => Ok(InputMode::Wavelet),
            "raw" => Ok(InputMode::Raw),
            other => Err(PipelineError::InvalidParameter(format!(
                "input mode {other:?} is neither \"wavelet\" nor \"raw\""
            ))),
        }
    }
}

/// Segmentation, labeling, smoothing, and split parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Epoch length in seconds.
    pub epoch_length_s: f64,
    /// Overlap between consecutive epochs in seconds.
    pub overlap_s: f64,
    /// Preictal horizon in minutes before onset.
    pub preictal_minutes: f64,
    /// Exponential smoothing weight on the newest probability.
    pub smoothing_alpha: f64,
    /// Alarm threshold on the smoothed probability.
    pub threshold: f64,
    /// Consecutive epochs at or above threshold required for an alarm.
    pub sustain: usize,
    /// Minimum spacing between alarms in seconds.
    pub refractory_s: f64,
    /// Cross-validation fold count.
    pub folds: usize,
    pub seed: u64,
    pub input_mode: InputMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epoch_length_s: 1.0,
            overlap_s: 0.0,
            preictal_minutes: 10.0,
            smoothing_alpha: 0.7,
            threshold: 0.6,
            sustain: 5,
            refractory_s: 600.0,
            folds: 10,
            seed: 0,
            input_mode: InputMode::Wavelet,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epoch_length_s > 0.0) {
            return Err(PipelineError::InvalidParameter("epoch length must be positive".into()));
        }
        if !(0.0..self.epoch_length_s).contains(&self.overlap_s) {
            return Err(PipelineError::InvalidParameter(format!(
                "overlap {} must lie in [0, epoch length)",
                self.overlap_s
            )));
        }
        if !(self.preictal_minutes > 0.0) {
            return Err(PipelineError::InvalidParameter(
                "preictal horizon must be positive".into(),
            ));
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha <= 1.0) {
            return Err(PipelineError::InvalidParameter(format!(
                "smoothing alpha {} must lie in (0, 1]",
                self.smoothing_alpha
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(PipelineError::InvalidParameter(format!(
                "threshold {} must lie in (0, 1)",
                self.threshold
            )));
        }
        if self.sustain == 0 {
            return Err(PipelineError::InvalidParameter("sustain must be at least 1".into()));
        }
        if self.refractory_s < 0.0 {
            return Err(PipelineError::InvalidParameter("refractory must be nonnegative".into()));
        }
        if self.folds < 2 {
            return Err(PipelineError::InvalidParameter("fold count must be at least 2".into()));
        }
        Ok(())
    }

    pub fn preictal_seconds(&self) -> f64 {
        self.preictal_minutes * 60.0
    }
}

/// Wrap a raw recording as a single-plane tensor (time x 1 x channel) so the
/// same segmentation path serves both input modes.
pub fn raw_tensor(rec: &EegRecording) -> Result<WaveletTensor> {
    rec.validate()?;
    let n = rec.samples_per_channel();
    let mut coefficients = Array3::<f32>::zeros((n, 1, rec.channels()));
    for ch in 0..rec.channels() {
        for t in 0..n {
            coefficients[[t, 0, ch]] = rec.samples[[ch, t]] as f32;
        }
    }
    Ok(WaveletTensor {
        coefficients,
        scales: vec![1.0],
        sampling_rate: rec.sampling_rate,
        onset_time: rec.onset_time,
        id: rec.id.clone(),
    })
}

/// Split a tensor into epochs and label each by its start time: at or after
/// onset is ictal, within the preictal horizon before onset is preictal,
/// everything else (and all of an onset-free recording) is interictal.
pub fn segment(tensor: &WaveletTensor, config: &PipelineConfig) -> Result<Vec<LabeledEpoch>> {
    config.validate()?;
    let rate = tensor.sampling_rate as f64;
    let epoch_samples = (config.epoch_length_s * rate).round() as usize;
    let overlap_samples = (config.overlap_s * rate).round() as usize;
    if epoch_samples == 0 {
        return Err(PipelineError::InvalidParameter(format!(
            "epoch of {} s holds no samples at {} Hz",
            config.epoch_length_s, tensor.sampling_rate
        )));
    }
    if overlap_samples >= epoch_samples {
        return Err(PipelineError::InvalidParameter(
            "overlap leaves an empty epoch step".into(),
        ));
    }
    let step = epoch_samples - overlap_samples;
    let n = tensor.time_steps();
    let horizon = config.preictal_seconds();

    let mut epochs = Vec::new();
    let mut start = 0usize;
    while start + epoch_samples <= n {
        let t0 = start as f64 / rate;
        let label = match tensor.onset_time {
            Some(onset) if t0 >= onset => Label::Ictal,
            Some(onset) if t0 >= onset - horizon => Label::Preictal,
            _ => Label::Interictal,
        };
        let data = tensor
            .coefficients
            .slice_axis(Axis(0), (start..start + epoch_samples).into())
            .to_owned();
        epochs.push(LabeledEpoch {
            data,
            label,
            start_time: t0,
            recording_id: tensor.id.clone(),
        });
        start += step;
    }
    Ok(epochs)
}

/// Standardize each channel of an epoch to zero mean and unit variance
/// (population variance, floored at 1e-8) over its time x scale plane.
pub fn normalize_epoch(epoch: &mut LabeledEpoch) {
    let (t, s, channels) = epoch.data.dim();
    let plane = (t * s) as f64;
    for ch in 0..channels {
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for ti in 0..t {
            for si in 0..s {
                let v = epoch.data[[ti, si, ch]] as f64;
                sum += v;
                sum_sq += v * v;
            }
        }
        let mean = sum / plane;
        let var = (sum_sq / plane - mean * mean).max(0.0);
        let std = var.sqrt().max(1e-8);
        for ti in 0..t {
            for si in 0..s {
                let v = epoch.data[[ti, si, ch]] as f64;
                epoch.data[[ti, si, ch]] = ((v - mean) / std) as f32;
            }
        }
    }
}

/// Downsample the interictal class to `round((preictal + ictal) / 2)`
/// epochs, chosen uniformly at random, then shuffle the result. Counts at
/// or below the target are left alone. Deterministic per seed.
pub fn balance(epochs: Vec<LabeledEpoch>, seed: u64) -> Result<Vec<LabeledEpoch>> {
    let n_pre = epochs.iter().filter(|e| e.label == Label::Preictal).count();
    let n_ict = epochs.iter().filter(|e| e.label == Label::Ictal).count();
    if n_pre + n_ict == 0 {
        return Err(PipelineError::CannotBalance(
            "no preictal or ictal epochs to balance against".into(),
        ));
    }
    let target = ((n_pre + n_ict) as f64 / 2.0).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interictal: Vec<usize> = epochs
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == Label::Interictal)
        .map(|(i, _)| i)
        .collect();

    let keep: std::collections::HashSet<usize> = if interictal.len() > target {
        for i in 0..target {
            let j = rng.gen_range(i..interictal.len());
            interictal.swap(i, j);
        }
        interictal[..target].iter().copied().collect()
    } else {
        interictal.iter().copied().collect()
    };

    let mut out: Vec<LabeledEpoch> = epochs
        .into_iter()
        .enumerate()
        .filter(|(i, e)| e.label != Label::Interictal || keep.contains(i))
        .map(|(_, e)| e)
        .collect();
    for i in (1..out.len()).rev() {
        let j = rng.gen_range(0..=i);
        out.swap(i, j);
    }
    Ok(out)
}

/// Leave-recordings-out folds: unique recording ids (in first-appearance
/// order) are divided into `k` contiguous groups whose sizes differ by at
/// most one, and each fold tests on one group. Returns per-fold
/// (train indices, test indices) into the epoch list.
pub fn kfold_split(recording_ids: &[String], k: usize) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(PipelineError::InvalidParameter("fold count must be at least 2".into()));
    }
    let mut unique: Vec<&String> = Vec::new();
    for id in recording_ids {
        if !unique.contains(&id) {
            unique.push(id);
        }
    }
    if unique.len() < k {
        return Err(PipelineError::InvalidParameter(format!(
            "{} recordings cannot fill {k} folds",
            unique.len()
        )));
    }

    let n = unique.len();
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0usize;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let group: std::collections::HashSet<&String> =
            unique[at..at + size].iter().copied().collect();
        at += size;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, id) in recording_ids.iter().enumerate() {
            if group.contains(id) {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        folds.push((train, test));
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3 as Nd3;

    fn tensor(id: &str, seconds: usize, rate: u32, onset: Option<f64>) -> WaveletTensor {
        let n = seconds * rate as usize;
        WaveletTensor {
            coefficients: Nd3::from_shape_fn((n, 2, 3), |(t, s, c)| {
                (t + 2 * s + 3 * c) as f32 * 0.1
            }),
            scales: vec![1.0, 2.0],
            sampling_rate: rate,
            onset_time: onset,
            id: id.into(),
        }
    }

    fn config() -> PipelineConfig {
        PipelineConfig::default()
    }

    #[test]
    fn epoch_counts_follow_length_and_overlap() {
        let t = tensor("c", 10, 4, None);
        assert_eq!(segment(&t, &config()).unwrap().len(), 10);

        let mut two = config();
        two.epoch_length_s = 2.0;
        two.overlap_s = 1.0;
        assert_eq!(segment(&t, &two).unwrap().len(), 9);

        two.overlap_s = 0.0;
        assert_eq!(segment(&t, &two).unwrap().len(), 5);
    }

    #[test]
    fn epoch_shape_and_start_times() {
        let t = tensor("c", 4, 8, None);
        let epochs = segment(&t, &config()).unwrap();
        assert_eq!(epochs.len(), 4);
        assert_eq!(epochs[0].data.dim(), (8, 2, 3));
        assert_eq!(epochs[2].start_time, 2.0);
        assert_eq!(epochs[2].recording_id, "c");
        assert_eq!(epochs[0].data[[3, 1, 2]], t.coefficients[[3, 1, 2]]);
        assert_eq!(epochs[2].data[[0, 0, 0]], t.coefficients[[16, 0, 0]]);
    }

    #[test]
    fn labels_split_at_onset_and_horizon() {
        // Onset at 3000 s with a 10-minute horizon: preictal starts at 2400 s.
        let t = tensor("lbl", 3010, 1, Some(3000.0));
        let epochs = segment(&t, &config()).unwrap();
        let label_at = |sec: usize| epochs[sec].label;
        assert_eq!(label_at(3000), Label::Ictal);
        assert_eq!(label_at(2999), Label::Preictal);
        assert_eq!(label_at(2400), Label::Preictal);
        assert_eq!(label_at(2399), Label::Interictal);
        assert_eq!(label_at(0), Label::Interictal);
    }

    #[test]
    fn onset_free_recording_is_all_interictal() {
        let t = tensor("free", 30, 2, None);
        let epochs = segment(&t, &config()).unwrap();
        assert!(epochs.iter().all(|e| e.label == Label::Interictal));
    }

    #[test]
    fn seizure_recording_layout_yields_600_preictal_epochs() {
        // 85 minutes with onset at 75 minutes: 10 minutes of preictal and
        // 10 of ictal at one epoch per second.
        let t = tensor("mssm", 85 * 60, 1, Some(75.0 * 60.0));
        let epochs = segment(&t, &config()).unwrap();
        let count = |l: Label| epochs.iter().filter(|e| e.label == l).count();
        assert_eq!(count(Label::Preictal), 600);
        assert_eq!(count(Label::Ictal), 600);
        assert_eq!(count(Label::Interictal), 85 * 60 - 1200);
    }

    #[test]
    fn normalization_maps_two_point_channel_to_unit_deviation() {
        let mut epoch = LabeledEpoch {
            data: Nd3::from_shape_vec((2, 1, 1), vec![1.0, 3.0]).unwrap(),
            label: Label::Interictal,
            start_time: 0.0,
            recording_id: "n".into(),
        };
        normalize_epoch(&mut epoch);
        assert_eq!(epoch.data[[0, 0, 0]], -1.0);
        assert_eq!(epoch.data[[1, 0, 0]], 1.0);
    }

    #[test]
    fn normalization_is_idempotent() {
        let mut epoch = LabeledEpoch {
            data: Nd3::from_shape_fn((8, 2, 2), |(t, s, c)| {
                ((t * 7 + s * 3 + c) % 11) as f32 - 4.0
            }),
            label: Label::Preictal,
            start_time: 0.0,
            recording_id: "n".into(),
        };
        normalize_epoch(&mut epoch);
        let once = epoch.data.clone();
        normalize_epoch(&mut epoch);
        for (a, b) in once.iter().zip(epoch.data.iter()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_channel_survives_normalization() {
        let mut epoch = LabeledEpoch {
            data: Nd3::from_elem((4, 1, 1), 2.5),
            label: Label::Interictal,
            start_time: 0.0,
            recording_id: "n".into(),
        };
        normalize_epoch(&mut epoch);
        assert!(epoch.data.iter().all(|v| v.is_finite()));
        assert!(epoch.data.iter().all(|&v| v == 0.0));
    }

    fn epoch_with(label: Label, tag: usize) -> LabeledEpoch {
        LabeledEpoch {
            data: Nd3::from_elem((1, 1, 1), tag as f32),
            label,
            start_time: tag as f64,
            recording_id: "b".into(),
        }
    }

    #[test]
    fn balance_downsamples_interictal_to_mean_of_other_classes() {
        let mut epochs = Vec::new();
        for i in 0..800 {
            epochs.push(epoch_with(Label::Interictal, i));
        }
        for i in 0..100 {
            epochs.push(epoch_with(Label::Preictal, 800 + i));
        }
        for i in 0..100 {
            epochs.push(epoch_with(Label::Ictal, 900 + i));
        }
        let out = balance(epochs, 7).unwrap();
        let count = |l: Label| out.iter().filter(|e| e.label == l).count();
        assert_eq!(count(Label::Interictal), 100);
        assert_eq!(count(Label::Preictal), 100);
        assert_eq!(count(Label::Ictal), 100);
    }

    #[test]
    fn balance_below_target_changes_no_counts() {
        let mut epochs = Vec::new();
        for i in 0..50 {
            epochs.push(epoch_with(Label::Interictal, i));
        }
        for i in 0..100 {
            epochs.push(epoch_with(Label::Preictal, 50 + i));
        }
        for i in 0..100 {
            epochs.push(epoch_with(Label::Ictal, 150 + i));
        }
        let out = balance(epochs, 0).unwrap();
        let count = |l: Label| out.iter().filter(|e| e.label == l).count();
        assert_eq!(count(Label::Interictal), 50);
        assert_eq!(count(Label::Preictal), 100);
        assert_eq!(count(Label::Ictal), 100);
    }

    #[test]
    fn balance_is_deterministic_per_seed() {
        let make = || {
            (0..60)
                .map(|i| {
                    epoch_with(
                        match i % 3 {
                            0 => Label::Interictal,
                            1 => Label::Preictal,
                            _ => Label::Ictal,
                        },
                        i,
                    )
                })
                .collect::<Vec<_>>()
        };
        let a = balance(make(), 42).unwrap();
        let b = balance(make(), 42).unwrap();
        let times = |v: &[LabeledEpoch]| v.iter().map(|e| e.start_time).collect::<Vec<_>>();
        assert_eq!(times(&a), times(&b));
        let c = balance(make(), 43).unwrap();
        assert_ne!(times(&a), times(&c));
    }

    #[test]
    fn balance_without_positive_classes_fails() {
        let epochs = vec![epoch_with(Label::Interictal, 0)];
        assert!(matches!(balance(epochs, 0), Err(PipelineError::CannotBalance(_))));
    }

    #[test]
    fn folds_group_whole_recordings() {
        let ids: Vec<String> = (0..23)
            .flat_map(|r| std::iter::repeat(format!("rec{r:02}")).take(4))
            .collect();
        let folds = kfold_split(&ids, 10).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen = std::collections::HashSet::new();
        for (train, test) in &folds {
            assert_eq!(train.len() + test.len(), ids.len());
            let test_recs: std::collections::HashSet<&String> =
                test.iter().map(|&i| &ids[i]).collect();
            assert!(test_recs.len() == 2 || test_recs.len() == 3);
            for &i in train {
                assert!(!test_recs.contains(&ids[i]));
            }
            for &i in test {
                assert!(seen.insert(i), "index {i} tested twice");
            }
        }
        assert_eq!(seen.len(), ids.len());
    }

    #[test]
    fn too_few_recordings_cannot_fold() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(kfold_split(&ids, 3).is_err());
    }

    mod dataset_properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(proptest::test_runner::Config::with_cases(32))]
            // Balancing never touches preictal or ictal epochs and never
            // grows the interictal class.
            #[test]
            fn balance_preserves_positive_classes(
                n_int in 0usize..40,
                n_pre in 0usize..20,
                n_ict in 0usize..20,
                seed in 0u64..1000,
            ) {
                prop_assume!(n_pre + n_ict > 0);
                let mut epochs = Vec::new();
                let mut tag = 0;
                for _ in 0..n_int { epochs.push(epoch_with(Label::Interictal, tag)); tag += 1; }
                for _ in 0..n_pre { epochs.push(epoch_with(Label::Preictal, tag)); tag += 1; }
                for _ in 0..n_ict { epochs.push(epoch_with(Label::Ictal, tag)); tag += 1; }
                let out = balance(epochs, seed).unwrap();
                let count = |l: Label| out.iter().filter(|e| e.label == l).count();
                prop_assert_eq!(count(Label::Preictal), n_pre);
                prop_assert_eq!(count(Label::Ictal), n_ict);
                let target = ((n_pre + n_ict) as f64 / 2.0).round() as usize;
                prop_assert_eq!(count(Label::Interictal), n_int.min(target));
            }

            // Every epoch index lands in exactly one test fold.
            #[test]
            fn folds_partition_epochs(
                recs in 2usize..12,
                per in 1usize..5,
                k in 2usize..6,
            ) {
                prop_assume!(recs >= k);
                let ids: Vec<String> = (0..recs)
                    .flat_map(|r| std::iter::repeat(format!("r{r}")).take(per))
                    .collect();
                let folds = kfold_split(&ids, k).unwrap();
                let mut seen = vec![0usize; ids.len()];
                for (train, test) in &folds {
                    prop_assert_eq!(train.len() + test.len(), ids.len());
                    for &i in test { seen[i] += 1; }
                }
                prop_assert!(seen.iter().all(|&c| c == 1));
            }
        }
    }
}
