//! Acceptance gate: seven criteria, one test and one PASS/FAIL line each.
//! Each test prints its verdict with per-check detail and fails loudly on
//! any mismatch, so the suite output doubles as the release checklist.

use eegpred_core::analysis::{change_point, spectral_metrics, ChangePointConfig};
use eegpred_core::dataset::{balance, normalize_epoch, segment, Label};
use eegpred_core::evaluation::{
    random_predictor_bounds, sensitivity, summarize, RandomPredictorParams, RecordingAuc,
};
use eegpred_core::ingest::{apply_montage_coerced, lowpass_filter, read_edf, write_edf};
use eegpred_core::network::{
    batch_loss, epoch_examples, extract_features, fit, gradients, grid_search,
    predict_probabilities, LayerSpec,
};
use eegpred_core::predictor::{score_recording, smooth};
use eegpred_core::wavelet::{build_wavelet_tensor, dyadic_scales, WaveletTensor};
use eegpred_core::{
    LabeledEpoch, LayerPlan, MontageSpec, NetworkParameters, PipelineConfig, RecordingScore,
    SynthSpec, TrainConfig,
};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn conclude(criterion: usize, checks: &[(bool, String)]) {
    let ok = checks.iter().all(|c| c.0);
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut lines = vec![format!("criterion {criterion}: {verdict}")];
    for (good, detail) in checks {
        let mark = if *good { "ok" } else { "MISMATCH" };
        lines.push(format!("  {detail}: {mark}"));
    }
    let text = lines.join("\n");
    println!("{text}");
    assert!(ok, "{text}");
}

// Criterion 1: the analytic random-predictor bounds must land on the
// published benchmark table (percent, within 0.1 percentage points),
// at a 10-minute occurrence period, significance 0.05, 100 variants,
// 33 seizures.
#[test]
fn criterion_1_random_predictor_bounds_match_published_table() {
    let rows: [(f64, f64, f64); 4] = [
        (0.285, 15.1, 27.2),
        (0.230, 12.1, 24.2),
        (0.186, 12.1, 21.2),
        (0.142, 9.1, 15.1),
    ];
    let mut checks = Vec::new();
    for (fpr, published_low, published_up) in rows {
        let bounds = random_predictor_bounds(&RandomPredictorParams {
            sop_minutes: 10.0,
            fpr_per_hour: fpr,
            seizure_count: 33,
            alpha: 0.05,
            comparisons: 100,
        })
        .unwrap();
        let low_pct = 100.0 * bounds.sigma_low;
        let up_pct = 100.0 * bounds.sigma_up;
        checks.push((
            (low_pct - published_low).abs() <= 0.1,
            format!("sigma_low at {fpr}/h: computed {low_pct:.2}%, published {published_low}%"),
        ));
        checks.push((
            (up_pct - published_up).abs() <= 0.1,
            format!("sigma_up at {fpr}/h: computed {up_pct:.2}%, published {published_up}%"),
        ));
    }
    conclude(1, &checks);
}

// Criterion 2: aggregating the transcribed per-recording benchmark
// outcomes must reproduce the published headline numbers.
#[test]
fn criterion_2_benchmark_fixture_reproduces_headline_numbers() {
    let mssm_times = [
        460.0, 557.0, 452.0, 586.0, 410.0, -35.0, 234.0, 515.0, 541.0, 512.0, 577.0, 569.0,
        532.0, 536.0, 520.0,
    ];
    let chb_times = [
        546.0, 372.0, 392.0, 554.0, 317.0, 551.0, 385.0, 470.0, 488.0, 313.0, 445.0, 224.0,
        532.0, 475.0, -36.0, -73.0, 389.0, -46.0,
    ];
    let mssm_aucs = [
        0.935, 0.961, 0.852, 0.941, 0.903, 0.448, 0.795, 0.955, 0.891, 0.934, 0.949, 0.934,
        0.945, 0.937, 0.903,
    ];
    let chb_aucs = [
        0.943, 0.855, 0.853, 0.973, 0.823, 0.988, 0.858, 0.943, 0.921, 0.855, 0.878, 0.802,
        0.966, 0.940, 0.713, 0.699, 0.877, 0.708,
    ];
    // Three false alarms over the corpus with 65 interictal minutes per
    // seizure recording and three 143.75-minute alarm-free recordings.
    let false_alarm_rows = [10usize, 11, 14];

    let mut mssm_scores: Vec<RecordingScore> = mssm_times
        .iter()
        .enumerate()
        .map(|(i, &t)| RecordingScore {
            recording_id: format!("mssm-{:02}", i + 1),
            predicted: Some(t > 0.0),
            prediction_time_s: (t > 0.0).then_some(t),
            false_alarm_times: if false_alarm_rows.contains(&i) { vec![0.0] } else { vec![] },
            interictal_hours: 65.0 / 60.0,
        })
        .collect();
    for i in 0..3 {
        mssm_scores.push(RecordingScore {
            recording_id: format!("mssm-free-{}", i + 1),
            predicted: None,
            prediction_time_s: None,
            false_alarm_times: vec![],
            interictal_hours: 143.75 / 60.0,
        });
    }
    let aucs: Vec<RecordingAuc> = mssm_aucs
        .iter()
        .enumerate()
        .map(|(i, &auc)| RecordingAuc { recording: format!("mssm-{:02}", i + 1), auc })
        .collect();
    let report = summarize(&mssm_scores, aucs, (0, 0, 0, 0), 10.0, 0.05, 100).unwrap();

    let predicted = mssm_times.iter().chain(&chb_times).filter(|&&t| t > 0.0).count();
    let combined_sensitivity = 100.0 * sensitivity(predicted, 33).unwrap();
    let mssm_auc_mean: f64 = mssm_aucs.iter().sum::<f64>() / mssm_aucs.len() as f64;
    let chb_auc_mean: f64 = chb_aucs.iter().sum::<f64>() / chb_aucs.len() as f64;

    let checks = vec![
        (
            (combined_sensitivity - 87.8).abs() <= 0.1,
            format!("sensitivity over 33 seizures: computed {combined_sensitivity:.2}%, published 87.8%"),
        ),
        (
            (report.fpr_per_hour - 0.128).abs() <= 0.001,
            format!(
                "false prediction rate: computed {:.4}/h, published 0.128/h",
                report.fpr_per_hour
            ),
        ),
        (
            (mssm_auc_mean - 0.885).abs() <= 0.001,
            format!("first-corpus mean AUC: computed {mssm_auc_mean:.4}, published 0.885"),
        ),
        (
            (chb_auc_mean - 0.866).abs() <= 0.001,
            format!("second-corpus mean AUC: computed {chb_auc_mean:.4}, published 0.866"),
        ),
    ];
    conclude(2, &checks);
}

// Criterion 3: analytic gradients must agree with central finite
// differences everywhere in a mixed conv/pool/dense network, in under a
// minute.
#[test]
fn criterion_3_gradients_match_finite_differences() {
    let start = Instant::now();
    let plan = LayerPlan {
        input: (4, 8, 2),
        layers: vec![
            LayerSpec::Conv { filters: 3, kernel: (3, 3), dropout: 0.0 },
            LayerSpec::Pool { factor: (2, 2) },
            LayerSpec::Conv { filters: 2, kernel: (2, 2), dropout: 0.0 },
            LayerSpec::Pool { factor: (2, 2) },
            LayerSpec::Dense { units: 6, dropout: 0.0 },
            LayerSpec::Output { classes: 3 },
        ],
    };
    let mut params = NetworkParameters::init(plan, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let batch: Vec<(Array3<f64>, usize)> = (0..4)
        .map(|i| {
            let x = Array3::from_shape_fn((4, 8, 2), |_| rng.gen_range(-1.0..1.0));
            (x, i % 3)
        })
        .collect();
    let (grads, _) = gradients(&params, &batch, &mut rng).unwrap();

    // (is_conv, is_weight, layer, flat index) addresses one parameter.
    type Slot = (bool, bool, usize, usize);
    let mut slots: Vec<Slot> = Vec::new();
    for layer in 0..grads.conv.len() {
        slots.extend((0..grads.conv[layer].0.len()).map(|i| (true, true, layer, i)));
        slots.extend((0..grads.conv[layer].1.len()).map(|i| (true, false, layer, i)));
    }
    for layer in 0..grads.dense.len() {
        slots.extend((0..grads.dense[layer].0.len()).map(|i| (false, true, layer, i)));
        slots.extend((0..grads.dense[layer].1.len()).map(|i| (false, false, layer, i)));
    }
    fn param_mut(p: &mut NetworkParameters, s: Slot) -> &mut f64 {
        match s {
            (true, true, l, i) => &mut p.conv[l].weights.as_slice_mut().unwrap()[i],
            (true, false, l, i) => &mut p.conv[l].bias[i],
            (false, true, l, i) => &mut p.dense[l].weights.as_slice_mut().unwrap()[i],
            (false, false, l, i) => &mut p.dense[l].bias[i],
        }
    }
    let analytic_at = |s: Slot| match s {
        (true, true, l, i) => grads.conv[l].0.as_slice().unwrap()[i],
        (true, false, l, i) => grads.conv[l].1[i],
        (false, true, l, i) => grads.dense[l].0.as_slice().unwrap()[i],
        (false, false, l, i) => grads.dense[l].1[i],
    };

    let h = 1e-5;
    let mut max_rel = 0.0f64;
    let checked = slots.len();
    for slot in slots {
        let analytic = analytic_at(slot);
        let orig = *param_mut(&mut params, slot);
        *param_mut(&mut params, slot) = orig + h;
        let up = batch_loss(&params, &batch).unwrap();
        *param_mut(&mut params, slot) = orig - h;
        let down = batch_loss(&params, &batch).unwrap();
        *param_mut(&mut params, slot) = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    let elapsed = start.elapsed().as_secs_f64();

    let checks = vec![
        (
            max_rel < 1e-4,
            format!("max relative gradient error over {checked} parameters: {max_rel:.2e}"),
        ),
        (elapsed < 60.0, format!("finished in {elapsed:.1} s (budget 60 s)")),
    ];
    conclude(3, &checks);
}

// Criterion 4: closed-form oracles for the divergence, the singular
// values, and the smoothing recursion.
#[test]
fn criterion_4_analysis_oracles_agree() {
    let mut checks = Vec::new();

    // Gaussian divergence against explicit elimination in 100 dimensions.
    let k = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let spd = |rng: &mut ChaCha8Rng| {
        let a: Vec<Vec<f64>> =
            (0..k).map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut s = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                s[i][j] = (0..k).map(|t| a[i][t] * a[j][t]).sum::<f64>() / k as f64
                    + if i == j { 1.0 } else { 0.0 };
            }
        }
        s
    };
    let s0 = spd(&mut rng);
    let s1 = spd(&mut rng);
    let mu0: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mu1: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let inv1 = gauss_jordan_inverse(&s1);
    let mut cross = 0.0;
    let mut maha = 0.0;
    for i in 0..k {
        for j in 0..k {
            cross += inv1[i][j] * s0[j][i];
            maha += (mu0[i] - mu1[i]) * inv1[i][j] * (mu0[j] - mu1[j]);
        }
    }
    let oracle = 0.5
        * (cross + maha - k as f64 + elimination_determinant(&s1).ln()
            - elimination_determinant(&s0).ln());
    let from = gaussian(&mu0, &s0);
    let to = gaussian(&mu1, &s1);
    let got = eegpred_core::analysis::kl_divergence(&from, &to).unwrap();
    let kl_err = (got - oracle).abs() / oracle.abs().max(1.0);
    checks.push((
        kl_err < 1e-6,
        format!("100-dim divergence vs elimination oracle: relative error {kl_err:.2e}"),
    ));

    // Singular values against a Jacobi eigensolver on the Gram matrix.
    let a = Array2::from_shape_fn((8, 5), |_| rng.gen_range(-2.0..2.0));
    let mut gram = vec![vec![0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            gram[i][j] = (0..8).map(|t| a[[t, i]] * a[[t, j]]).sum();
        }
    }
    let expected: Vec<f64> =
        jacobi_eigenvalues(gram).into_iter().map(|l| l.max(0.0).sqrt()).collect();
    let got = spectral_metrics(a.view()).singular_values;
    let mut sv_err = 0.0f64;
    for (g, e) in got.iter().zip(&expected) {
        sv_err = sv_err.max((g - e).abs() / e.max(1.0));
    }
    checks.push((
        sv_err < 1e-9,
        format!("singular values vs Jacobi oracle: max error {sv_err:.2e}"),
    ));

    // Smoothing recursion against its closed geometric form.
    let alpha = 0.7;
    let p: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s = smooth(&p, alpha);
    let mut smooth_err = 0.0f64;
    for t in 0..p.len() {
        let mut direct = (1.0 - alpha).powi(t as i32) * p[0];
        for j in 0..t {
            direct += alpha * (1.0 - alpha).powi(j as i32) * p[t - j];
        }
        smooth_err = smooth_err.max((s[t] - direct).abs());
    }
    checks.push((
        smooth_err < 1e-12,
        format!("smoothing vs closed form: max error {smooth_err:.2e}"),
    ));

    conclude(4, &checks);
}

const RATE: u32 = 32;
const CHANNELS: usize = 4;
const DURATION: f64 = 1200.0;
const ONSET: f64 = 900.0;
const TRANSITION: f64 = 300.0;

fn corpus_spec(id: &str, onset: Option<f64>, seed: u64) -> SynthSpec {
    let mut spec = SynthSpec::new(id, DURATION, onset, seed);
    spec.channels = CHANNELS;
    spec.sampling_rate = RATE;
    spec
}

// Desk-scale surrogate of the full stack. No dropout: at these widths it
// starves the non-ictal classes of gradient and the run is too short to
// need the regularization.
fn reduced_plan() -> LayerPlan {
    LayerPlan {
        input: (10, RATE as usize, CHANNELS),
        layers: vec![
            LayerSpec::Conv { filters: 8, kernel: (3, 3), dropout: 0.0 },
            LayerSpec::Conv { filters: 8, kernel: (3, 3), dropout: 0.0 },
            LayerSpec::Pool { factor: (1, 4) },
            LayerSpec::Conv { filters: 8, kernel: (3, 3), dropout: 0.0 },
            LayerSpec::Conv { filters: 8, kernel: (3, 3), dropout: 0.0 },
            LayerSpec::Pool { factor: (2, 2) },
            LayerSpec::Conv { filters: 6, kernel: (2, 2), dropout: 0.0 },
            LayerSpec::Conv { filters: 6, kernel: (2, 2), dropout: 0.0 },
            LayerSpec::Pool { factor: (5, 2) },
            LayerSpec::Dense { units: 24, dropout: 0.0 },
            LayerSpec::Dense { units: 16, dropout: 0.0 },
            LayerSpec::Output { classes: 3 },
        ],
    }
}

struct Prepared {
    tensor: WaveletTensor,
    epochs: Vec<LabeledEpoch>,
    times: Vec<f64>,
    labels: Vec<Label>,
}

fn prepare(spec: &SynthSpec, cfg: &PipelineConfig) -> Prepared {
    let rec = spec.generate().unwrap();
    let filtered = lowpass_filter(&rec, 12.0).unwrap();
    let tensor = build_wavelet_tensor(&filtered, &dyadic_scales()).unwrap();
    let mut epochs = segment(&tensor, cfg).unwrap();
    epochs.iter_mut().for_each(normalize_epoch);
    let times = epochs.iter().map(|e| e.start_time).collect();
    let labels = epochs.iter().map(|e| e.label).collect();
    Prepared { tensor, epochs, times, labels }
}

// Criterion 5: the full pipeline on a seeded synthetic corpus, within a
// 15-minute budget: train, predict at least 8 of 10 held-out seizures
// inside the horizon at up to 0.5 false alarms per hour, localize the
// preictal transition by divergence on at least 8 of 10, and let the
// horizon grid search pick the matching 10-minute window.
#[test]
fn criterion_5_synthetic_end_to_end() {
    let start = Instant::now();
    let cfg = PipelineConfig { folds: 2, ..Default::default() };
    let plan = reduced_plan();

    // Corpus: 10 training recordings (7 seizure + 3 alarm-free, the last
    // seizure recording held out for early stopping); 10 seizure test
    // recordings plus 4 alarm-free ones for interictal exposure.
    let mut train_tensors = Vec::new();
    let mut train_epochs = Vec::new();
    let mut val_epochs = Vec::new();
    for i in 0..7 {
        let p = prepare(&corpus_spec(&format!("train-s{i}"), Some(ONSET), 101 + i as u64), &cfg);
        if i == 6 {
            val_epochs = p.epochs;
        } else {
            train_epochs.extend(p.epochs);
        }
        train_tensors.push(p.tensor);
    }
    for i in 0..3 {
        let p = prepare(&corpus_spec(&format!("train-f{i}"), None, 108 + i as u64), &cfg);
        train_epochs.extend(p.epochs);
        train_tensors.push(p.tensor);
    }

    // Balance the held-out recording too: the selection loss should weigh
    // the classes evenly, not by the 1:2:1 mix of a seizure recording.
    let train_epochs = balance(train_epochs, cfg.seed).unwrap();
    let val_epochs = balance(val_epochs, cfg.seed).unwrap();
    let train = epoch_examples(&train_epochs, &plan).unwrap();
    let val = epoch_examples(&val_epochs, &plan).unwrap();
    // Validation loss is noisy for the first few passes; the window has to
    // reach past that to the real minimum.
    let train_cfg = TrainConfig { max_passes: 12, patience: 8, ..Default::default() };
    let init = NetworkParameters::init(plan.clone(), cfg.seed).unwrap();
    let fitted = fit(init, &train, &val, &train_cfg).unwrap();
    let train_done = Instant::now();

    // Held-out outcomes.
    let mut scores = Vec::new();
    let mut localized = 0usize;
    for i in 0..10 {
        let p = prepare(&corpus_spec(&format!("test-s{i}"), Some(ONSET), 201 + i as u64), &cfg);
        let probs = predict_probabilities(&fitted.params, &p.epochs).unwrap();
        let (score, _) = score_recording(
            &format!("test-s{i}"),
            &p.times,
            &probs,
            &p.labels,
            Some(ONSET),
            DURATION,
            &cfg,
        )
        .unwrap();
        scores.push(score);

        let features = extract_features(&fitted.params, &p.epochs).unwrap();
        let scan = ChangePointConfig {
            epoch_seconds: 1.0,
            baseline_epochs: 240,
            window: 60,
            sustain_seconds: 30.0,
            k_keep: 10,
            mad_scale: 5.0,
        };
        let (detected, _) = change_point(features.view(), &p.times, Some(ONSET), &scan).unwrap();
        if let Some(t) = detected {
            if (t - TRANSITION).abs() <= 60.0 {
                localized += 1;
            }
        }
    }
    for i in 0..4 {
        let p = prepare(&corpus_spec(&format!("test-f{i}"), None, 211 + i as u64), &cfg);
        let probs = predict_probabilities(&fitted.params, &p.epochs).unwrap();
        let (score, _) = score_recording(
            &format!("test-f{i}"),
            &p.times,
            &probs,
            &p.labels,
            None,
            DURATION,
            &cfg,
        )
        .unwrap();
        scores.push(score);
    }
    let predicted = scores.iter().filter(|s| s.predicted == Some(true)).count();
    let false_alarms: usize = scores.iter().map(|s| s.false_alarm_times.len()).sum();
    let interictal_hours: f64 = scores.iter().map(|s| s.interictal_hours).sum();
    let fpr = false_alarms as f64 / interictal_hours;
    let score_done = Instant::now();

    // Horizon selection over the training tensors.
    let grid_cfg = TrainConfig { max_passes: 5, patience: 2, ..Default::default() };
    let grid =
        grid_search(&train_tensors, &[5.0, 10.0, 20.0], &cfg, &plan, &grid_cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let losses: Vec<String> =
        grid.mean_val_losses.iter().map(|l| format!("{l:.3}")).collect();
    let checks = vec![
        (
            predicted >= 8,
            format!("seizures predicted inside the horizon: {predicted}/10 (need 8)"),
        ),
        (
            fpr <= 0.5,
            format!(
                "false prediction rate: {fpr:.3}/h over {interictal_hours:.2} h (budget 0.5/h)"
            ),
        ),
        (
            localized >= 8,
            format!("transitions localized within 60 s: {localized}/10 (need 8)"),
        ),
        (
            grid.best_preictal_minutes == 10.0,
            format!(
                "grid search picked {} min over 5/10/20 (losses {})",
                grid.best_preictal_minutes,
                losses.join("/")
            ),
        ),
        (
            elapsed < 900.0,
            format!(
                "finished in {elapsed:.0} s (train {:.0} s, scoring {:.0} s, grid {:.0} s; budget 900 s)",
                train_done.duration_since(start).as_secs_f64(),
                score_done.duration_since(train_done).as_secs_f64(),
                elapsed - score_done.duration_since(start).as_secs_f64(),
            ),
        ),
    ];
    conclude(5, &checks);
}

// Criterion 6: container round trip. Physical values survive within one
// quantization step; a second write of the re-read recording is
// byte-identical.
#[test]
fn criterion_6_container_round_trip() {
    let spec = SynthSpec::new("roundtrip", 10.0, Some(8.0), 99);
    let rec = spec.generate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("roundtrip.edf");
    write_edf(&rec, &first).unwrap();
    let reread = read_edf(&first).unwrap();

    let mut max_err = 0.0f64;
    for (a, b) in rec.samples.iter().zip(reread.samples.iter()) {
        max_err = max_err.max((a - b).abs());
    }

    let second = dir.path().join("roundtrip2.edf");
    write_edf(&reread, &second).unwrap();
    let bytes_first = std::fs::read(&first).unwrap();
    let bytes_second = std::fs::read(&second).unwrap();

    let checks = vec![
        (
            max_err <= 0.1,
            format!("physical round-trip error {max_err:.4} uV (one step is 0.1 uV)"),
        ),
        (
            bytes_first == bytes_second,
            format!(
                "re-written container identical: {} vs {} bytes",
                bytes_first.len(),
                bytes_second.len()
            ),
        ),
        (
            reread.sampling_rate == rec.sampling_rate
                && reread.channel_labels == rec.channel_labels,
            "rate and channel labels preserved".to_string(),
        ),
    ];
    conclude(6, &checks);
}

// Criterion 7: scope statement. The gate above runs entirely on seeded
// synthetic recordings; when a local clinical corpus is available it gets
// a non-gating smoke run through ingest and the transform.
#[test]
fn criterion_7_corpus_scope_statement() {
    let candidates = [
        std::env::var("EEG_CORPUS_DIR").ok().map(std::path::PathBuf::from),
        Some(std::path::PathBuf::from("../../data/chbmit")),
    ];
    let mut smoke = String::from("no local clinical corpus present (set EEG_CORPUS_DIR)");
    for dir in candidates.into_iter().flatten() {
        let Ok(entries) = std::fs::read_dir(&dir) else { continue };
        let Some(edf) = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .find(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("edf")))
        else {
            continue;
        };
        match read_edf(&edf) {
            Ok(mut rec) => {
                // First minute is plenty for a smoke pass.
                let keep = (60 * rec.sampling_rate as usize).min(rec.samples_per_channel());
                rec.samples = rec.samples.slice(ndarray::s![.., ..keep]).to_owned();
                let derived = apply_montage_coerced(&rec, &MontageSpec::standard_22()).unwrap();
                let filtered = lowpass_filter(&derived, 120.0).unwrap();
                let tensor = build_wavelet_tensor(&filtered, &dyadic_scales()).unwrap();
                smoke = format!(
                    "smoke-ingested {} ({} channels, {} Hz, tensor {}x{}x{})",
                    edf.display(),
                    rec.channels(),
                    rec.sampling_rate,
                    tensor.time_steps(),
                    tensor.n_scales(),
                    tensor.channels(),
                );
            }
            Err(e) => smoke = format!("corpus file {} failed to parse: {e}", edf.display()),
        }
        break;
    }
    let checks = vec![(
        true,
        format!(
            "gate runs on seeded synthetic recordings; clinical corpus is optional and non-gating; {smoke}"
        ),
    )];
    conclude(7, &checks);
}

fn gaussian(mean: &[f64], cov: &[Vec<f64>]) -> eegpred_core::analysis::GaussianSummary {
    let k = mean.len();
    eegpred_core::analysis::GaussianSummary {
        mean: ndarray::Array1::from(mean.to_vec()),
        covariance: Array2::from_shape_fn((k, k), |(i, j)| cov[i][j]),
    }
}

fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..k {
            if row != col {
                let f = m[row][col];
                for j in 0..2 * k {
                    m[row][j] -= f * m[col][j];
                }
            }
        }
    }
    m.into_iter().map(|row| row[k..].to_vec()).collect()
}

fn elimination_determinant(a: &[Vec<f64>]) -> f64 {
    let k = a.len();
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if pivot != col {
            m.swap(col, pivot);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..k {
            let f = m[row][col] / m[col][col];
            for j in col..k {
                m[row][j] -= f * m[col][j];
            }
        }
    }
    det
}

fn jacobi_eigenvalues(mut s: Vec<Vec<f64>>) -> Vec<f64> {
    let k = s.len();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                off += s[i][j] * s[i][j];
            }
        }
        if off < 1e-26 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if s[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for i in 0..k {
                    let (a, b) = (s[i][p], s[i][q]);
                    s[i][p] = c * a - sn * b;
                    s[i][q] = sn * a + c * b;
                }
                for j in 0..k {
                    let (a, b) = (s[p][j], s[q][j]);
                    s[p][j] = c * a - sn * b;
                    s[q][j] = sn * a + c * b;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..k).map(|i| s[i][i]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}
