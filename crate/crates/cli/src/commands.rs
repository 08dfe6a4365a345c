//! Subcommand implementations.
//!
//! Errors split into two phases: `Usage` covers bad flags, configs, and
//! inputs (exit 1), `Runtime` covers failures while computing or writing
//! artifacts (exit 2).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use eegpred_core::analysis::{change_point, spectral_metrics, SpectralMetrics};
use eegpred_core::dataset::{balance, kfold_split, normalize_epoch, raw_tensor, segment, InputMode};
use eegpred_core::evaluation::{epoch_confusion, random_predictor_bounds, summarize, trace_auc, RandomPredictorParams, RecordingAuc};
use eegpred_core::ingest::{apply_montage, lowpass_filter, read_edf, write_edf};
use eegpred_core::network::{epoch_examples, extract_features, fit, grid_search, load_checkpoint, predict_probabilities, save_checkpoint, LayerSpec};
use eegpred_core::predictor::score_recording;
use eegpred_core::wavelet::{build_wavelet_tensor, dyadic_scales};
use eegpred_core::{EegRecording, Label, LabeledEpoch, LayerPlan, MontageSpec, NetworkParameters, PipelineError, PredictionTrace, RecordingScore, SynthSpec, WaveletTensor};
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::{write_manifest, Artifact};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

/// Defaults, then the config file, then the flag overrides.
pub fn resolve_run(
    config: Option<&Path>,
    seed: Option<u64>,
    mode: Option<&str>,
) -> Result<RunConfig, CliError> {
    let mut run = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("reading config {}: {e}", path.display())))?;
            RunConfig::parse(&text)
                .map_err(|e| usage(format!("config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        run.set_seed(seed);
    }
    if let Some(mode) = mode {
        run.pipeline.input_mode = mode.parse().map_err(|e: PipelineError| usage(e.to_string()))?;
    }
    Ok(run)
}

fn ensure_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| runtime(format!("creating {}: {e}", out.display())))
}

fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Recordings whose labels already match the derived montage pass through;
/// referential recordings carrying every needed electrode are re-referenced;
/// anything else (custom channel sets) is used as stored.
fn with_montage(rec: EegRecording) -> Result<EegRecording, CliError> {
    let montage = MontageSpec::standard_22();
    if rec.channel_labels == montage.derivation_labels() {
        return Ok(rec);
    }
    let have: HashSet<&str> = rec.channel_labels.iter().map(String::as_str).collect();
    let referential = montage
        .derivations
        .iter()
        .all(|(pos, neg)| have.contains(pos.as_str()) && have.contains(neg.as_str()));
    if referential {
        Ok(apply_montage(&rec, &montage)?)
    } else {
        Ok(rec)
    }
}

/// Seizure onset for an EDF comes from an optional `<stem>.json` sidecar
/// with an `onset_s` field (the synth subcommand writes one).
fn sidecar_onset(path: &Path) -> Result<Option<f64>, CliError> {
    let sidecar = path.with_extension("json");
    if !sidecar.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&sidecar)
        .map_err(|e| usage(format!("reading {}: {e}", sidecar.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("parsing {}: {e}", sidecar.display())))?;
    Ok(value.get("onset_s").and_then(serde_json::Value::as_f64))
}

/// Load one input as a tensor: `.wtc` caches directly, `.edf` through
/// montage, low-pass, and the configured input representation.
fn load_tensor(path: &Path, run: &RunConfig) -> Result<WaveletTensor, CliError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "wtc" => WaveletTensor::read_cache(path)
            .map_err(|e| usage(format!("reading {}: {e}", path.display()))),
        "edf" => {
            let mut rec = read_edf(path)
                .map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
            rec.onset_time = sidecar_onset(path)?;
            let rec = with_montage(rec)?;
            let rec = lowpass_filter(&rec, run.lowpass_hz)?;
            match run.pipeline.input_mode {
                InputMode::Wavelet => Ok(build_wavelet_tensor(&rec, &dyadic_scales())?),
                InputMode::Raw => Ok(raw_tensor(&rec)?),
            }
        }
        other => Err(usage(format!(
            "{}: unsupported input extension {other:?} (expected .edf or .wtc)",
            path.display()
        ))),
    }
}

fn load_tensors(inputs: &[PathBuf], run: &RunConfig) -> Result<Vec<WaveletTensor>, CliError> {
    if inputs.is_empty() {
        return Err(usage("no input recordings"));
    }
    inputs.iter().map(|p| load_tensor(p, run)).collect()
}

fn epochs_for(tensor: &WaveletTensor, run: &RunConfig) -> Result<Vec<LabeledEpoch>, CliError> {
    let mut epochs = segment(tensor, &run.pipeline)?;
    if epochs.is_empty() {
        return Err(runtime(format!("recording {} is shorter than one epoch", tensor.id)));
    }
    for epoch in &mut epochs {
        normalize_epoch(epoch);
    }
    Ok(epochs)
}

/// Column pools shrink by 4 while divisible (else 2, else hold); rows halve
/// once at the middle stage. For one-second epochs at 256 Hz over ten scales
/// this reproduces the stock stack.
fn pool_factors(rows: usize, cols: usize) -> [(usize, usize); 3] {
    let (mut rows, mut cols) = (rows, cols);
    let mut factors = [(1usize, 1usize); 3];
    for (stage, factor) in factors.iter_mut().enumerate() {
        let cf = if cols % 4 == 0 { 4 } else if cols % 2 == 0 { 2 } else { 1 };
        cols /= cf;
        let rf = if stage == 1 && rows % 2 == 0 { 2 } else { 1 };
        rows /= rf;
        *factor = (rf, cf);
    }
    factors
}

/// The fixed six-conv stack with configured widths, sized to the epoch shape.
fn build_plan(run: &RunConfig, input: (usize, usize, usize)) -> LayerPlan {
    let pools = pool_factors(input.0, input.1);
    let kernels = [(3, 3), (3, 3), (3, 3), (3, 3), (2, 2), (2, 2)];
    let conv = |i: usize| LayerSpec::Conv {
        filters: run.conv_filters[i],
        kernel: kernels[i],
        dropout: run.conv_dropout,
    };
    LayerPlan {
        input,
        layers: vec![
            conv(0),
            conv(1),
            LayerSpec::Pool { factor: pools[0] },
            conv(2),
            conv(3),
            LayerSpec::Pool { factor: pools[1] },
            conv(4),
            conv(5),
            LayerSpec::Pool { factor: pools[2] },
            LayerSpec::Dense { units: run.dense_units[0], dropout: run.dense_dropout },
            LayerSpec::Dense { units: run.dense_units[1], dropout: run.dense_dropout },
            LayerSpec::Output { classes: 3 },
        ],
    }
}

fn plan_for_epochs(run: &RunConfig, epochs: &[LabeledEpoch]) -> Result<LayerPlan, CliError> {
    let (t, s, c) = epochs[0].data.dim();
    let plan = build_plan(run, (s, t, c));
    plan.validate()?;
    Ok(plan)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| runtime(format!("writing {}: {e}", path.display())))
}

pub fn cmd_synth(
    out: &Path,
    id: &str,
    duration: f64,
    onset: Option<f64>,
    transition: Option<f64>,
    channels: usize,
    rate: u32,
    run: &RunConfig,
) -> Result<(), CliError> {
    let mut spec = SynthSpec::new(id, duration, onset, run.pipeline.seed);
    spec.channels = channels;
    spec.sampling_rate = rate;
    if transition.is_some() {
        spec.transition_s = transition;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let rec = spec.generate()?;

    ensure_out(out)?;
    let stem = sanitize_id(id);
    let edf_name = format!("{stem}.edf");
    let meta_name = format!("{stem}.json");
    write_edf(&rec, &out.join(&edf_name))?;
    write_text(&out.join(&meta_name), &spec.metadata_json())?;

    let artifacts = [
        Artifact { path: edf_name.clone(), role: "recording".into() },
        Artifact { path: meta_name, role: "recording-metadata".into() },
    ];
    write_manifest(out, "synth", spec.seed, &run.echo(), &artifacts).map_err(runtime)?;
    println!(
        "wrote {edf_name}: {} channels, {} Hz, {} s{}",
        rec.channels(),
        rec.sampling_rate,
        rec.duration(),
        match onset {
            Some(t) => format!(", onset at {t} s"),
            None => String::new(),
        }
    );
    Ok(())
}

pub fn cmd_ingest(out: &Path, inputs: &[PathBuf], run: &RunConfig) -> Result<(), CliError> {
    let tensors = load_tensors(inputs, run)?;
    ensure_out(out)?;
    let role = match run.pipeline.input_mode {
        InputMode::Wavelet => "wavelet-tensor",
        InputMode::Raw => "raw-tensor",
    };
    let mut artifacts = Vec::with_capacity(tensors.len());
    for tensor in &tensors {
        let name = format!("{}.wtc", sanitize_id(&tensor.id));
        tensor.write_cache(&out.join(&name))?;
        println!(
            "cached {}: {} x {} x {} at {} Hz",
            tensor.id,
            tensor.time_steps(),
            tensor.n_scales(),
            tensor.channels(),
            tensor.sampling_rate
        );
        artifacts.push(Artifact { path: name, role: role.into() });
    }
    write_manifest(out, "ingest", run.pipeline.seed, &run.echo(), &artifacts).map_err(runtime)
}

pub fn cmd_train(out: &Path, inputs: &[PathBuf], run: &RunConfig) -> Result<(), CliError> {
    let tensors = load_tensors(inputs, run)?;
    let mut epochs: Vec<LabeledEpoch> = Vec::new();
    for tensor in &tensors {
        epochs.extend(epochs_for(tensor, run)?);
    }
    let plan = plan_for_epochs(run, &epochs)?;

    let ids: Vec<String> = epochs.iter().map(|e| e.recording_id.clone()).collect();
    let folds = kfold_split(&ids, run.pipeline.folds).map_err(|e| usage(e.to_string()))?;
    // The last fold tests on the tail of the input order, so the leading
    // recordings (by convention the seizure ones) stay on the training side.
    let (train_idx, val_idx) = &folds[folds.len() - 1];
    let train_side: Vec<LabeledEpoch> = train_idx.iter().map(|&i| epochs[i].clone()).collect();
    let train_side = balance(train_side, run.pipeline.seed)?;
    let val_side: Vec<LabeledEpoch> = val_idx.iter().map(|&i| epochs[i].clone()).collect();

    let train_examples = epoch_examples(&train_side, &plan)?;
    let val_examples = epoch_examples(&val_side, &plan)?;
    let params = NetworkParameters::init(plan, run.pipeline.seed)?;
    let result = fit(params, &train_examples, &val_examples, &run.train)?;

    ensure_out(out)?;
    save_checkpoint(&result.params, &run.train, &out.join("model.ckpt"))?;
    let history = json!({
        "train_losses": result.train_losses,
        "val_losses": result.val_losses,
        "best_pass": result.best_pass,
    });
    write_text(
        &out.join("training.json"),
        &(serde_json::to_string_pretty(&history).expect("history serialization") + "\n"),
    )?;

    let artifacts = [
        Artifact { path: "model.ckpt".into(), role: "model-checkpoint".into() },
        Artifact { path: "training.json".into(), role: "training-history".into() },
    ];
    write_manifest(out, "train", run.pipeline.seed, &run.echo(), &artifacts).map_err(runtime)?;
    println!(
        "trained on {} epochs, validated on {}: best pass {} of {}, val loss {:.4}",
        train_examples.len(),
        val_examples.len(),
        result.best_pass,
        result.val_losses.len(),
        result.val_losses[result.best_pass - 1]
    );
    Ok(())
}

pub fn cmd_predict(
    model: &Path,
    out: &Path,
    inputs: &[PathBuf],
    run: &RunConfig,
) -> Result<(), CliError> {
    let (params, _) = load_checkpoint(model)
        .map_err(|e| usage(format!("reading {}: {e}", model.display())))?;
    let tensors = load_tensors(inputs, run)?;
    ensure_out(out)?;

    let mut scores: Vec<RecordingScore> = Vec::with_capacity(tensors.len());
    let mut artifacts = Vec::new();
    for tensor in &tensors {
        let epochs = epochs_for(tensor, run)?;
        let probs = predict_probabilities(&params, &epochs)?;
        let times: Vec<f64> = epochs.iter().map(|e| e.start_time).collect();
        let labels: Vec<Label> = epochs.iter().map(|e| e.label).collect();
        let duration = tensor.time_steps() as f64 / tensor.sampling_rate as f64;
        let (score, trace) = score_recording(
            &tensor.id,
            &times,
            &probs,
            &labels,
            tensor.onset_time,
            duration,
            &run.pipeline,
        )?;

        let name = format!("trace_{}.csv", sanitize_id(&tensor.id));
        trace.write_csv(&out.join(&name))?;
        artifacts.push(Artifact { path: name, role: "prediction-trace".into() });
        println!(
            "{}: {}, {} false alarms over {:.2} interictal hours",
            tensor.id,
            match score.predicted {
                Some(true) => format!(
                    "predicted {:.0} s before onset",
                    score.prediction_time_s.unwrap_or(0.0)
                ),
                Some(false) => "onset missed".into(),
                None => "no onset".into(),
            },
            score.false_alarm_times.len(),
            score.interictal_hours
        );
        scores.push(score);
    }

    write_text(
        &out.join("scores.json"),
        &(serde_json::to_string_pretty(&scores).expect("score serialization") + "\n"),
    )?;
    artifacts.push(Artifact { path: "scores.json".into(), role: "recording-scores".into() });
    write_manifest(out, "predict", run.pipeline.seed, &run.echo(), &artifacts).map_err(runtime)
}

fn parse_trace(path: &Path) -> Result<PredictionTrace, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    let bad = |line: usize, what: &str| {
        usage(format!("{} line {}: {what}", path.display(), line + 1))
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == "time_s,p,s,alarm_flag,label" => {}
        _ => return Err(usage(format!("{} is not a prediction trace", path.display()))),
    }

    let mut trace = PredictionTrace {
        recording_id: trace_id(path),
        times: Vec::new(),
        p: Vec::new(),
        s: Vec::new(),
        alarm_flags: Vec::new(),
        labels: Vec::new(),
    };
    for (i, line) in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(i, "expected 5 columns"));
        }
        let number = |j: usize| cols[j].parse::<f64>().map_err(|_| bad(i, "bad number"));
        trace.times.push(number(0)?);
        trace.p.push(number(1)?);
        trace.s.push(number(2)?);
        trace.alarm_flags.push(match cols[3] {
            "0" => false,
            "1" => true,
            _ => return Err(bad(i, "alarm flag must be 0 or 1")),
        });
        let class: usize = cols[4].parse().map_err(|_| bad(i, "bad class index"))?;
        trace.labels.push(Label::from_class_index(class).map_err(|e| bad(i, &e.to_string()))?);
    }
    Ok(trace)
}

fn trace_id(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    stem.strip_prefix("trace_").unwrap_or(stem).to_string()
}

pub fn cmd_evaluate(
    scores_path: &Path,
    traces: &[PathBuf],
    out: &Path,
    run: &RunConfig,
) -> Result<(), CliError> {
    let text = fs::read_to_string(scores_path)
        .map_err(|e| usage(format!("reading {}: {e}", scores_path.display())))?;
    let scores: Vec<RecordingScore> = serde_json::from_str(&text)
        .map_err(|e| usage(format!("parsing {}: {e}", scores_path.display())))?;

    let mut parsed = Vec::with_capacity(traces.len());
    for path in traces {
        parsed.push(parse_trace(path)?);
    }
    let aucs: Vec<RecordingAuc> = parsed
        .iter()
        .filter_map(|t| trace_auc(t).map(|auc| RecordingAuc { recording: t.recording_id.clone(), auc }))
        .collect();
    let confusion = epoch_confusion(&parsed, run.pipeline.threshold);

    let report = summarize(
        &scores,
        aucs,
        confusion,
        run.pipeline.preictal_minutes,
        run.significance,
        run.comparisons,
    )?;
    ensure_out(out)?;
    report.write_json(&out.join("report.json"))?;
    let artifacts = [Artifact { path: "report.json".into(), role: "evaluation-report".into() }];
    write_manifest(out, "evaluate", run.pipeline.seed, &run.echo(), &artifacts).map_err(runtime)?;
    println!(
        "sensitivity {:.1}%, {:.3} false alarms/h, mcc {:.3}, random-predictor bounds {:.3}/{:.3}",
        100.0 * report.sensitivity,
        report.fpr_per_hour,
        report.mcc,
        report.sigma_low,
        report.sigma_up
    );
    Ok(())
}

pub fn cmd_grid(
    out: &Path,
    candidates: &str,
    inputs: &[PathBuf],
    run: &RunConfig,
) -> Result<(), CliError> {
    let minutes: Vec<f64> = candidates
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("candidate {part:?} is not a number")))
        })
        .collect::<Result<_, _>>()?;
    let tensors = load_tensors(inputs, run)?;
    let probe = epochs_for(&tensors[0], run)?;
    let plan = plan_for_epochs(run, &probe)?;

    let result = grid_search(&tensors, &minutes, &run.pipeline, &plan, &run.train)?;
    ensure_out(out)?;
    let summary = json!({
        "candidate_minutes": minutes,
        "mean_val_losses": result.mean_val_losses,
        "best_preictal_minutes": result.best_preictal_minutes,
    });
    write_text(
        &out.join("grid.json"),
        &(serde_json::to_string_pretty(&summary).expect("grid serialization") + "\n"),
    )?;
    let artifacts = [Artifact { path: "grid.json".into(), role: "grid-search".into() }];
    write_manifest(out, "grid", run.pipeline.seed, &run.echo(), &artifacts).map_err(runtime)?;

    for (minute, loss) in minutes.iter().zip(&result.mean_val_losses) {
        println!("horizon {minute} min: mean val loss {loss:.4}");
    }
    println!("best horizon: {} min", result.best_preictal_minutes);
    Ok(())
}

pub fn cmd_kl(
    model: &Path,
    out: &Path,
    inputs: &[PathBuf],
    run: &RunConfig,
) -> Result<(), CliError> {
    let (params, _) = load_checkpoint(model)
        .map_err(|e| usage(format!("reading {}: {e}", model.display())))?;
    let tensors = load_tensors(inputs, run)?;
    ensure_out(out)?;

    let stride = run.pipeline.epoch_length_s - run.pipeline.overlap_s;
    let scan = run.scan_config(stride);
    let mut rows = Vec::with_capacity(tensors.len());
    let mut artifacts = Vec::new();
    for tensor in &tensors {
        let epochs = epochs_for(tensor, run)?;
        let features = extract_features(&params, &epochs)?;
        let times: Vec<f64> = epochs.iter().map(|e| e.start_time).collect();
        let (detected, trace) = change_point(features.view(), &times, tensor.onset_time, &scan)?;

        let name = format!("kl_{}.csv", sanitize_id(&tensor.id));
        let mut csv = String::from("time_s,divergence\n");
        for (t, d) in trace.times.iter().zip(&trace.divergence) {
            csv.push_str(&format!("{t},{d}\n"));
        }
        write_text(&out.join(&name), &csv)?;
        artifacts.push(Artifact { path: name, role: "divergence-trace".into() });

        println!(
            "{}: {} (threshold {:.3})",
            tensor.id,
            match detected {
                Some(t) => format!("sustained divergence at {t} s"),
                None => "no change point".into(),
            },
            trace.threshold
        );
        rows.push(json!({
            "recording": tensor.id,
            "detected_s": detected,
            "threshold": trace.threshold,
        }));
    }

    write_text(
        &out.join("kl.json"),
        &(serde_json::to_string_pretty(&serde_json::Value::Array(rows))
            .expect("summary serialization")
            + "\n"),
    )?;
    artifacts.push(Artifact { path: "kl.json".into(), role: "divergence-summary".into() });
    write_manifest(out, "kl", run.pipeline.seed, &run.echo(), &artifacts).map_err(runtime)
}

pub fn cmd_spectral(model: &Path, out: &Path, run: &RunConfig) -> Result<(), CliError> {
    let (params, _) = load_checkpoint(model)
        .map_err(|e| usage(format!("reading {}: {e}", model.display())))?;
    ensure_out(out)?;

    let mut csv = String::from("layer,rows,cols,rank,spectral_gap,effective_rank,condition\n");
    let mut describe = |name: &str, rows: usize, cols: usize, m: &SpectralMetrics| {
        csv.push_str(&format!(
            "{name},{rows},{cols},{},{:.6},{:.6},{:.6}\n",
            m.rank, m.spectral_gap, m.effective_rank, m.condition
        ));
        println!(
            "{name}: rank {}, gap {:.3}, effective rank {:.2}, condition {:.1}",
            m.rank, m.spectral_gap, m.effective_rank, m.condition
        );
    };

    for (i, conv) in params.conv.iter().enumerate() {
        let (out_ch, kr, kc, in_ch) = conv.weights.dim();
        let flat = conv
            .weights
            .to_shape((out_ch, kr * kc * in_ch))
            .map_err(|e| runtime(format!("conv{} reshape: {e}", i + 1)))?;
        let m = spectral_metrics(flat.view());
        describe(&format!("conv{}", i + 1), out_ch, kr * kc * in_ch, &m);
    }
    for (i, dense) in params.dense.iter().enumerate() {
        let name = if i + 1 == params.dense.len() {
            "output".to_string()
        } else {
            format!("dense{}", i + 1)
        };
        let m = spectral_metrics(dense.weights.view());
        describe(&name, dense.weights.nrows(), dense.weights.ncols(), &m);
    }

    write_text(&out.join("spectral.csv"), &csv)?;
    let artifacts = [Artifact { path: "spectral.csv".into(), role: "conditioning-metrics".into() }];
    write_manifest(out, "spectral", params.seed, &run.echo(), &artifacts).map_err(runtime)
}

pub fn cmd_baseline(
    fpr: f64,
    seizures: usize,
    sop_minutes: f64,
    alpha: f64,
    comparisons: usize,
) -> Result<(), CliError> {
    let params = RandomPredictorParams {
        sop_minutes,
        fpr_per_hour: fpr,
        seizure_count: seizures,
        alpha,
        comparisons,
    };
    let bounds = random_predictor_bounds(&params).map_err(|e| usage(e.to_string()))?;
    println!("{:.3} {:.3}", bounds.sigma_low, bounds.sigma_up);
    if bounds.saturated {
        eprintln!("warning: bounds saturated; the rate admits no informative threshold");
    }
    Ok(())
}
