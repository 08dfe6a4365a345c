//! Outcome statistics: sensitivity, false prediction rate, ROC-AUC,
//! Matthews correlation, and the analytic bounds an unspecific random
//! predictor would reach at the same false prediction rate.

use crate::dataset::Label;
use crate::error::{PipelineError, Result};
use crate::predictor::{PredictionTrace, RecordingScore};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Fraction of seizures predicted.
pub fn sensitivity(predicted: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(PipelineError::InvalidParameter("no seizures to predict".into()));
    }
    if predicted > total {
        return Err(PipelineError::InvalidParameter(format!(
            "{predicted} predictions out of {total} seizures"
        )));
    }
    Ok(predicted as f64 / total as f64)
}

/// False alarms per interictal hour.
pub fn false_prediction_rate(false_alarms: usize, interictal_hours: f64) -> Result<f64> {
    if !(interictal_hours > 0.0) {
        return Err(PipelineError::InvalidParameter(format!(
            "false prediction rate over {interictal_hours} interictal hours"
        )));
    }
    Ok(false_alarms as f64 / interictal_hours)
}

/// Rank-based ROC-AUC (the Mann-Whitney statistic): tied scores share
/// average rank. Needs at least one positive and one negative.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(PipelineError::ShapeMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            positive.len()
        )));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(PipelineError::InvalidParameter(format!(
            "ROC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(PipelineError::InvalidParameter("NaN score".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their average.
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if positive[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let auc =
        (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64);
    Ok(auc)
}

/// ROC-AUC of one trace's smoothed probability against its preictal
/// labels; `None` when the trace lacks either class.
pub fn trace_auc(trace: &PredictionTrace) -> Option<f64> {
    let positive: Vec<bool> = trace.labels.iter().map(|&l| l == Label::Preictal).collect();
    roc_auc(&trace.s, &positive).ok()
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(tp: usize, fp: usize, tn: usize, fn_: usize) -> f64 {
    let (tp, fp, tn, fn_) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// Epoch-level confusion counts over traces: positive is the preictal
/// label, a positive call is a smoothed probability at or above the
/// threshold. Returns (tp, fp, tn, fn).
pub fn epoch_confusion(
    traces: &[PredictionTrace],
    threshold: f64,
) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for trace in traces {
        for (s, &label) in trace.s.iter().zip(&trace.labels) {
            let called = *s >= threshold;
            let actual = label == Label::Preictal;
            match (actual, called) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fn_ += 1,
            }
        }
    }
    (tp, fp, tn, fn_)
}

/// Inputs for the unspecific-random-predictor significance bounds.
#[derive(Debug, Clone)]
pub struct RandomPredictorParams {
    /// Seizure occurrence period in minutes.
    pub sop_minutes: f64,
    pub fpr_per_hour: f64,
    /// Number of seizures the method was scored on.
    pub seizure_count: usize,
    /// Significance level.
    pub alpha: f64,
    /// Independent method variants corrected for in the upper bound.
    pub comparisons: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomPredictorBounds {
    pub sigma_low: f64,
    pub sigma_up: f64,
    /// Set when no sensitivity up to `seizure_count / seizure_count` is
    /// significant; the affected bound reads 1.
    pub saturated: bool,
}

/// Sensitivities a random predictor cannot reach at significance `alpha`.
///
/// The predictor raises alarms at the observed false prediction rate, so
/// one seizure falls in an alarm's occurrence period with probability
/// `P = SOP * FPr` and `k` of `K` seizures with binomial tail
/// `Q(k) = P[Binomial(K, P) >= k]`. The lower bound is the smallest `k/K`
/// with `Q(k) < alpha`; the upper bound corrects for `d` selectable
/// variants and takes the smallest `k/K` with `1 - (1 - Q(k))^d < alpha`.
/// A zero false prediction rate makes both bounds `1/K`; if no `k`
/// qualifies, the bound is 1 and `saturated` is set.
pub fn random_predictor_bounds(p: &RandomPredictorParams) -> Result<RandomPredictorBounds> {
    if !(p.sop_minutes > 0.0) {
        return Err(PipelineError::InvalidParameter("occurrence period must be positive".into()));
    }
    if !(p.fpr_per_hour >= 0.0) {
        return Err(PipelineError::InvalidParameter(
            "false prediction rate must be nonnegative".into(),
        ));
    }
    if p.seizure_count == 0 {
        return Err(PipelineError::InvalidParameter("seizure count must be positive".into()));
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(PipelineError::InvalidParameter(format!(
            "significance {} must lie in (0, 1)",
            p.alpha
        )));
    }
    if p.comparisons == 0 {
        return Err(PipelineError::InvalidParameter("comparison count must be positive".into()));
    }

    let k_total = p.seizure_count;
    let hit_prob = (p.sop_minutes / 60.0 * p.fpr_per_hour).min(1.0);

    let base = (1.0 - hit_prob).powi(k_total as i32);
    if base == 0.0 {
        // The whole binomial tail is 1 to machine precision.
        return Ok(RandomPredictorBounds { sigma_low: 1.0, sigma_up: 1.0, saturated: true });
    }

    let mut pmf = Vec::with_capacity(k_total + 1);
    pmf.push(base);
    for j in 0..k_total {
        let next = pmf[j] * (k_total - j) as f64 / (j + 1) as f64 * hit_prob
            / (1.0 - hit_prob);
        pmf.push(next);
    }
    // Upper tails by suffix sums, adding the small far-tail terms first.
    let mut tail = vec![0.0; k_total + 2];
    for k in (0..=k_total).rev() {
        tail[k] = tail[k + 1] + pmf[k];
    }

    let family_alpha = |q: f64| -> f64 {
        // 1 - (1 - q)^d without cancellation.
        -((p.comparisons as f64) * (-q).ln_1p()).exp_m1()
    };

    let low_k = (1..=k_total).find(|&k| tail[k] < p.alpha);
    let up_k = (1..=k_total).find(|&k| family_alpha(tail[k]) < p.alpha);

    let sigma_low = low_k.map_or(1.0, |k| k as f64 / k_total as f64);
    let sigma_up = up_k.map_or(1.0, |k| k as f64 / k_total as f64);
    Ok(RandomPredictorBounds {
        sigma_low,
        sigma_up,
        saturated: low_k.is_none() || up_k.is_none(),
    })
}

/// Per-recording AUC entry in the report.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RecordingAuc {
    pub recording: String,
    pub auc: f64,
}

/// Aggregated evaluation. Serializes with this exact key order.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub sensitivity: f64,
    pub fpr_per_hour: f64,
    pub auc_per_recording: Vec<RecordingAuc>,
    pub mcc: f64,
    pub sigma_low: f64,
    pub sigma_up: f64,
    pub prediction_times_s: Vec<f64>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(self.to_json().as_bytes())?;
        Ok(())
    }
}

/// Combine per-recording outcomes into a report. Sensitivity runs over
/// recordings with an onset; the false prediction rate pools false alarms
/// over all interictal exposure; the random-predictor bounds use the
/// pooled rate.
pub fn summarize(
    scores: &[RecordingScore],
    aucs: Vec<RecordingAuc>,
    confusion: (usize, usize, usize, usize),
    sop_minutes: f64,
    alpha: f64,
    comparisons: usize,
) -> Result<EvaluationReport> {
    let seizures = scores.iter().filter(|s| s.predicted.is_some()).count();
    let predicted = scores.iter().filter(|s| s.predicted == Some(true)).count();
    let false_alarms: usize = scores.iter().map(|s| s.false_alarm_times.len()).sum();
    let interictal_hours: f64 = scores.iter().map(|s| s.interictal_hours).sum();

    let sens = sensitivity(predicted, seizures)?;
    let fpr = false_prediction_rate(false_alarms, interictal_hours)?;
    let bounds = random_predictor_bounds(&RandomPredictorParams {
        sop_minutes,
        fpr_per_hour: fpr,
        seizure_count: seizures,
        alpha,
        comparisons,
    })?;
    let (tp, fp, tn, fn_) = confusion;

    Ok(EvaluationReport {
        sensitivity: sens,
        fpr_per_hour: fpr,
        auc_per_recording: aucs,
        mcc: mcc(tp, fp, tn, fn_),
        sigma_low: bounds.sigma_low,
        sigma_up: bounds.sigma_up,
        prediction_times_s: scores
            .iter()
            .filter_map(|s| s.prediction_time_s)
            .collect(),
    })
}
