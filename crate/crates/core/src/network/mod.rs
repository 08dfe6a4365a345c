//! Convolutional classifier: seeded Glorot initialization, exact
//! backpropagation, Adadelta updates, early-stopped training, preictal
//! horizon selection by cross-validated grid search, and feature
//! extraction from the last hidden layer.

mod checkpoint;
mod layers;
mod plan;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use layers::{ConvParams, DenseParams};
pub use plan::{LayerPlan, LayerSpec};

use crate::dataset::{balance, kfold_split, normalize_epoch, segment, LabeledEpoch, PipelineConfig};
use crate::error::{PipelineError, Result};
use crate::wavelet::WaveletTensor;
use layers::*;
use ndarray::{Array1, Array2, Array3, Array4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const PROBABILITY_FLOOR: f64 = 1e-12;

/// All learned tensors, ordered as the plan lists their layers. The output
/// layer is the last dense entry.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    pub plan: LayerPlan,
    pub conv: Vec<ConvParams>,
    pub dense: Vec<DenseParams>,
    pub seed: u64,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_passes: usize,
    /// Passes without validation improvement before stopping.
    pub patience: usize,
    /// Adadelta decay.
    pub rho: f64,
    /// Adadelta conditioning constant.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 64, max_passes: 100, patience: 3, rho: 0.95, epsilon: 1e-6, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_passes == 0 || self.patience == 0 {
            return Err(PipelineError::InvalidParameter(
                "batch size, pass limit, and patience must be positive".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(PipelineError::InvalidParameter(format!(
                "decay {} must lie in (0, 1)",
                self.rho
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(PipelineError::InvalidParameter("epsilon must be positive".into()));
        }
        Ok(())
    }
}

impl NetworkParameters {
    /// Glorot-uniform weights (bound `sqrt(6 / (fan_in + fan_out))`, with
    /// kernel-area scaling for convolutions) and zero biases, drawn from a
    /// generator seeded with `seed`.
    pub fn init(plan: LayerPlan, seed: u64) -> Result<Self> {
        plan.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |limit: f64, rng: &mut ChaCha8Rng| rng.gen::<f64>() * 2.0 * limit - limit;

        let mut conv = Vec::new();
        let mut dense = Vec::new();
        let mut channels = plan.input.2;
        let mut fan = plan.flattened_fan_in();
        for layer in &plan.layers {
            match layer {
                LayerSpec::Conv { filters, kernel, .. } => {
                    let (kr, kc) = *kernel;
                    let fan_in = channels * kr * kc;
                    let fan_out = filters * kr * kc;
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let mut weights = Array4::<f64>::zeros((*filters, kr, kc, channels));
                    for w in weights.iter_mut() {
                        *w = draw(limit, &mut rng);
                    }
                    conv.push(ConvParams { weights, bias: Array1::zeros(*filters) });
                    channels = *filters;
                }
                LayerSpec::Pool { .. } => {}
                LayerSpec::Dense { units, .. } | LayerSpec::Output { classes: units } => {
                    let limit = (6.0 / (fan + units) as f64).sqrt();
                    let mut weights = Array2::<f64>::zeros((*units, fan));
                    for w in weights.iter_mut() {
                        *w = draw(limit, &mut rng);
                    }
                    dense.push(DenseParams { weights, bias: Array1::zeros(*units) });
                    fan = *units;
                }
            }
        }
        Ok(Self { plan, conv, dense, seed })
    }

    /// Class probabilities without dropout.
    pub fn forward_infer(&self, input: &Array3<f64>) -> Result<Vec<f64>> {
        Ok(self.forward(input, None)?.probs)
    }

    /// Activation of the last hidden dense layer (the flatten vector when
    /// the plan has no hidden dense layer), without dropout.
    pub fn features(&self, input: &Array3<f64>) -> Result<Vec<f64>> {
        Ok(self.forward(input, None)?.features)
    }

    fn forward(&self, input: &Array3<f64>, mut rng: Option<&mut ChaCha8Rng>) -> Result<Trace> {
        if input.dim() != self.plan.input {
            return Err(PipelineError::ShapeMismatch(format!(
                "input {:?} does not match plan input {:?}",
                input.dim(),
                self.plan.input
            )));
        }
        let mut trace = Trace::default();
        let mut plane = input.clone();
        let mut vector: Option<Vec<f64>> = None;
        let mut conv_idx = 0;
        let mut dense_idx = 0;

        for layer in &self.plan.layers {
            match layer {
                LayerSpec::Conv { dropout, .. } => {
                    trace.conv_in.push(plane.clone());
                    let mut out = conv_forward(&plane, &self.conv[conv_idx]);
                    let slice = out.as_slice_mut().unwrap();
                    trace.conv_relu.push(relu_in_place(slice));
                    let mask = rng
                        .as_deref_mut()
                        .map(|r| dropout_in_place(slice, *dropout, r));
                    trace.conv_drop.push(mask);
                    plane = out;
                    conv_idx += 1;
                }
                LayerSpec::Pool { factor } => {
                    let in_dims = plane.dim();
                    let (out, argmax) = maxpool_forward(&plane, *factor);
                    trace.pools.push((argmax, in_dims));
                    plane = out;
                }
                LayerSpec::Dense { dropout, .. } => {
                    let x = vector
                        .take()
                        .unwrap_or_else(|| plane.as_slice().unwrap().to_vec());
                    let mut y = dense_forward(&x, &self.dense[dense_idx]);
                    trace.dense_in.push(x);
                    trace.dense_relu.push(relu_in_place(&mut y));
                    let mask = rng
                        .as_deref_mut()
                        .map(|r| dropout_in_place(&mut y, *dropout, r));
                    trace.dense_drop.push(mask);
                    trace.features = y.clone();
                    vector = Some(y);
                    dense_idx += 1;
                }
                LayerSpec::Output { .. } => {
                    let x = vector
                        .take()
                        .unwrap_or_else(|| plane.as_slice().unwrap().to_vec());
                    if trace.features.is_empty() {
                        trace.features = x.clone();
                    }
                    let mut logits = dense_forward(&x, &self.dense[dense_idx]);
                    trace.dense_in.push(x);
                    softmax_in_place(&mut logits);
                    trace.probs = logits;
                }
            }
        }
        Ok(trace)
    }
}

#[derive(Default)]
struct Trace {
    conv_in: Vec<Array3<f64>>,
    conv_relu: Vec<Vec<bool>>,
    conv_drop: Vec<Option<Vec<bool>>>,
    /// (argmax, input dims) per pool.
    pools: Vec<(Vec<usize>, (usize, usize, usize))>,
    dense_in: Vec<Vec<f64>>,
    dense_relu: Vec<Vec<bool>>,
    dense_drop: Vec<Option<Vec<bool>>>,
    features: Vec<f64>,
    probs: Vec<f64>,
}

/// Parameter gradients, shaped and ordered like [`NetworkParameters`].
pub struct Gradients {
    pub conv: Vec<(Array4<f64>, Array1<f64>)>,
    pub dense: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    fn zeros_like(params: &NetworkParameters) -> Self {
        Self {
            conv: params
                .conv
                .iter()
                .map(|p| (Array4::zeros(p.weights.dim()), Array1::zeros(p.bias.len())))
                .collect(),
            dense: params
                .dense
                .iter()
                .map(|p| (Array2::zeros(p.weights.dim()), Array1::zeros(p.bias.len())))
                .collect(),
        }
    }
}

/// Cross-entropy of one predicted distribution against its label, with the
/// probability floored at 1e-12.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROBABILITY_FLOOR).ln()
}

/// Mean cross-entropy over examples, without dropout.
pub fn batch_loss(params: &NetworkParameters, examples: &[(Array3<f64>, usize)]) -> Result<f64> {
    if examples.is_empty() {
        return Err(PipelineError::InvalidParameter("no examples to score".into()));
    }
    let mut total = 0.0;
    for (x, label) in examples {
        total += cross_entropy(&params.forward_infer(x)?, *label);
    }
    Ok(total / examples.len() as f64)
}

/// Mean-loss gradients over a batch. Each example runs forward (sampling
/// fresh dropout masks from `rng`) and immediately backward; activations
/// are never kept across examples. Returns the batch's mean loss.
pub fn gradients(
    params: &NetworkParameters,
    batch: &[(Array3<f64>, usize)],
    rng: &mut ChaCha8Rng,
) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(PipelineError::InvalidParameter("empty batch".into()));
    }
    let mut grads = Gradients::zeros_like(params);
    let mut loss = 0.0;
    let inv_batch = 1.0 / batch.len() as f64;

    for (x, label) in batch {
        if *label >= params.plan.classes() {
            return Err(PipelineError::InvalidParameter(format!(
                "label {label} outside {} classes",
                params.plan.classes()
            )));
        }
        let trace = params.forward(x, Some(rng))?;
        loss += cross_entropy(&trace.probs, *label);

        let mut dvec: Vec<f64> = trace.probs.clone();
        dvec[*label] -= 1.0;
        for g in dvec.iter_mut() {
            *g *= inv_batch;
        }

        let mut dplane: Option<Array3<f64>> = None;
        let mut conv_idx = params.conv.len();
        let mut dense_idx = params.dense.len();
        let mut hidden_idx = trace.dense_relu.len();
        let mut pool_idx = trace.pools.len();

        for layer in params.plan.layers.iter().rev() {
            match layer {
                LayerSpec::Output { .. } => {
                    dense_idx -= 1;
                    let (gin, gw, gb) =
                        dense_backward(&trace.dense_in[dense_idx], &params.dense[dense_idx], &dvec);
                    grads.dense[dense_idx].0 += &gw;
                    grads.dense[dense_idx].1 += &gb;
                    dvec = gin;
                }
                LayerSpec::Dense { dropout, .. } => {
                    hidden_idx -= 1;
                    if let Some(mask) = &trace.dense_drop[hidden_idx] {
                        dropout_backward(&mut dvec, *dropout, mask);
                    }
                    relu_backward(&mut dvec, &trace.dense_relu[hidden_idx]);
                    dense_idx -= 1;
                    let (gin, gw, gb) =
                        dense_backward(&trace.dense_in[dense_idx], &params.dense[dense_idx], &dvec);
                    grads.dense[dense_idx].0 += &gw;
                    grads.dense[dense_idx].1 += &gb;
                    dvec = gin;
                }
                LayerSpec::Pool { factor } => {
                    pool_idx -= 1;
                    let (argmax, in_dims) = &trace.pools[pool_idx];
                    let out_dims = (in_dims.0 / factor.0, in_dims.1 / factor.1, in_dims.2);
                    let g3 = match dplane.take() {
                        Some(g) => g,
                        None => Array3::from_shape_vec(out_dims, std::mem::take(&mut dvec))
                            .map_err(|e| PipelineError::ShapeMismatch(e.to_string()))?,
                    };
                    dplane = Some(maxpool_backward(&g3, argmax, *in_dims));
                }
                LayerSpec::Conv { dropout, .. } => {
                    conv_idx -= 1;
                    let input = &trace.conv_in[conv_idx];
                    let (r, c, _) = input.dim();
                    let out_ch = params.conv[conv_idx].bias.len();
                    let mut g3 = match dplane.take() {
                        Some(g) => g,
                        None => Array3::from_shape_vec((r, c, out_ch), std::mem::take(&mut dvec))
                            .map_err(|e| PipelineError::ShapeMismatch(e.to_string()))?,
                    };
                    let slice = g3.as_slice_mut().unwrap();
                    if let Some(mask) = &trace.conv_drop[conv_idx] {
                        dropout_backward(slice, *dropout, mask);
                    }
                    relu_backward(slice, &trace.conv_relu[conv_idx]);
                    let (gin, gw, gb) = conv_backward(input, &params.conv[conv_idx], &g3);
                    grads.conv[conv_idx].0 += &gw;
                    grads.conv[conv_idx].1 += &gb;
                    dplane = Some(gin);
                }
            }
        }
    }
    Ok((grads, loss * inv_batch))
}

/// Adadelta accumulators: squared-gradient and squared-update averages for
/// every parameter tensor.
pub struct AdadeltaState {
    conv: Vec<(Array4<f64>, Array4<f64>, Array1<f64>, Array1<f64>)>,
    dense: Vec<(Array2<f64>, Array2<f64>, Array1<f64>, Array1<f64>)>,
}

impl AdadeltaState {
    pub fn new(params: &NetworkParameters) -> Self {
        Self {
            conv: params
                .conv
                .iter()
                .map(|p| {
                    let d = p.weights.dim();
                    let n = p.bias.len();
                    (Array4::zeros(d), Array4::zeros(d), Array1::zeros(n), Array1::zeros(n))
                })
                .collect(),
            dense: params
                .dense
                .iter()
                .map(|p| {
                    let d = p.weights.dim();
                    let n = p.bias.len();
                    (Array2::zeros(d), Array2::zeros(d), Array1::zeros(n), Array1::zeros(n))
                })
                .collect(),
        }
    }
}

/// One Adadelta update on a flat tensor:
/// `E[g^2] <- rho E[g^2] + (1 - rho) g^2`,
/// `step = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g`,
/// `E[dx^2] <- rho E[dx^2] + (1 - rho) step^2`.
pub(crate) fn adadelta_update(
    values: &mut [f64],
    grads: &[f64],
    sq_grad: &mut [f64],
    sq_update: &mut [f64],
    rho: f64,
    epsilon: f64,
) {
    for i in 0..values.len() {
        let g = grads[i];
        sq_grad[i] = rho * sq_grad[i] + (1.0 - rho) * g * g;
        let step = -((sq_update[i] + epsilon).sqrt() / (sq_grad[i] + epsilon).sqrt()) * g;
        sq_update[i] = rho * sq_update[i] + (1.0 - rho) * step * step;
        values[i] += step;
    }
}

pub fn adadelta_step(
    params: &mut NetworkParameters,
    grads: &Gradients,
    state: &mut AdadeltaState,
    rho: f64,
    epsilon: f64,
) {
    for (i, p) in params.conv.iter_mut().enumerate() {
        let s = &mut state.conv[i];
        adadelta_update(
            p.weights.as_slice_mut().unwrap(),
            grads.conv[i].0.as_slice().unwrap(),
            s.0.as_slice_mut().unwrap(),
            s.1.as_slice_mut().unwrap(),
            rho,
            epsilon,
        );
        adadelta_update(
            p.bias.as_slice_mut().unwrap(),
            grads.conv[i].1.as_slice().unwrap(),
            s.2.as_slice_mut().unwrap(),
            s.3.as_slice_mut().unwrap(),
            rho,
            epsilon,
        );
    }
    for (i, p) in params.dense.iter_mut().enumerate() {
        let s = &mut state.dense[i];
        adadelta_update(
            p.weights.as_slice_mut().unwrap(),
            grads.dense[i].0.as_slice().unwrap(),
            s.0.as_slice_mut().unwrap(),
            s.1.as_slice_mut().unwrap(),
            rho,
            epsilon,
        );
        adadelta_update(
            p.bias.as_slice_mut().unwrap(),
            grads.dense[i].1.as_slice().unwrap(),
            s.2.as_slice_mut().unwrap(),
            s.3.as_slice_mut().unwrap(),
            rho,
            epsilon,
        );
    }
}

/// What early stopping keeps for a given validation-loss history: the index
/// of the best pass and how many passes run before stopping (`patience`
/// consecutive non-improving passes end training).
pub fn early_stopping_trace(val_losses: &[f64], patience: usize) -> (usize, usize) {
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    let mut stale = 0;
    let mut run = 0;
    for (i, &v) in val_losses.iter().enumerate() {
        run = i + 1;
        if v < best {
            best = v;
            best_idx = i;
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                break;
            }
        }
    }
    (best_idx, run)
}

pub struct FitResult {
    /// Parameters from the best validation pass.
    pub params: NetworkParameters,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    /// 1-based index of the kept pass.
    pub best_pass: usize,
}

/// Train with shuffled mini-batches and Adadelta until the validation loss
/// stops improving for `patience` passes (or the pass limit). Returns the
/// parameters of the best validation pass, not the last one.
pub fn fit(
    params: NetworkParameters,
    train: &[(Array3<f64>, usize)],
    val: &[(Array3<f64>, usize)],
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(PipelineError::InvalidParameter("empty training set".into()));
    }
    if val.is_empty() {
        return Err(PipelineError::InvalidParameter("empty validation set".into()));
    }

    let mut params = params;
    let mut state = AdadeltaState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best: Option<(f64, NetworkParameters, usize)> = None;
    let mut stale = 0;
    let mut train_losses = Vec::new();
    let mut val_losses = Vec::new();

    for pass in 1..=cfg.max_passes {
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut pass_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(Array3<f64>, usize)> =
                chunk.iter().map(|&i| train[i].clone()).collect();
            let (grads, loss) = gradients(&params, &batch, &mut rng)?;
            adadelta_step(&mut params, &grads, &mut state, cfg.rho, cfg.epsilon);
            pass_loss += loss;
            batches += 1;
        }
        train_losses.push(pass_loss / batches as f64);

        let val_loss = batch_loss(&params, val)?;
        val_losses.push(val_loss);
        match &best {
            Some((b, _, _)) if val_loss >= *b => {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
            _ => {
                best = Some((val_loss, params.clone(), pass));
                stale = 0;
            }
        }
    }

    let (_, best_params, best_pass) = best.expect("at least one pass ran");
    Ok(FitResult { params: best_params, train_losses, val_losses, best_pass })
}

/// Convert an epoch (time x scale x channel) into network input
/// (scale x time x channel).
pub fn epoch_input(epoch: &LabeledEpoch) -> Array3<f64> {
    let transposed = epoch.data.view().permuted_axes([1, 0, 2]);
    transposed.mapv(|v| v as f64).as_standard_layout().to_owned()
}

/// Epochs as (input, class index) pairs, checked against the plan's input
/// shape.
pub fn epoch_examples(
    epochs: &[LabeledEpoch],
    plan: &LayerPlan,
) -> Result<Vec<(Array3<f64>, usize)>> {
    let mut out = Vec::with_capacity(epochs.len());
    for epoch in epochs {
        let input = epoch_input(epoch);
        if input.dim() != plan.input {
            return Err(PipelineError::ShapeMismatch(format!(
                "epoch input {:?} does not match plan input {:?}",
                input.dim(),
                plan.input
            )));
        }
        out.push((input, epoch.label.class_index()));
    }
    Ok(out)
}

/// Hidden-layer features for a sequence of epochs, one row per epoch.
pub fn extract_features(
    params: &NetworkParameters,
    epochs: &[LabeledEpoch],
) -> Result<Array2<f64>> {
    let width = params.plan.penultimate_units();
    let mut out = Array2::<f64>::zeros((epochs.len(), width));
    for (i, epoch) in epochs.iter().enumerate() {
        let f = params.features(&epoch_input(epoch))?;
        if f.len() != width {
            return Err(PipelineError::ShapeMismatch(format!(
                "feature vector of {} for width {width}",
                f.len()
            )));
        }
        for (j, v) in f.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// Class probabilities for a sequence of epochs, one row per epoch.
pub fn predict_probabilities(
    params: &NetworkParameters,
    epochs: &[LabeledEpoch],
) -> Result<Array2<f64>> {
    let classes = params.plan.classes();
    let mut out = Array2::<f64>::zeros((epochs.len(), classes));
    for (i, epoch) in epochs.iter().enumerate() {
        let p = params.forward_infer(&epoch_input(epoch))?;
        for (j, v) in p.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

pub struct GridSearchResult {
    pub best_preictal_minutes: f64,
    /// Mean best validation loss per candidate, in candidate order.
    pub mean_val_losses: Vec<f64>,
}

/// Choose the preictal horizon by k-fold cross-validation: each candidate
/// re-labels every recording, folds group whole recordings, the training
/// side of each fold is class-balanced, and the candidate with the lowest
/// mean best-validation loss wins (ties keep the earliest candidate).
pub fn grid_search(
    tensors: &[WaveletTensor],
    candidate_minutes: &[f64],
    base: &PipelineConfig,
    plan: &LayerPlan,
    train_cfg: &TrainConfig,
) -> Result<GridSearchResult> {
    if candidate_minutes.is_empty() {
        return Err(PipelineError::InvalidParameter("no horizon candidates".into()));
    }
    base.validate()?;
    plan.validate()?;
    train_cfg.validate()?;

    let mut mean_val_losses = Vec::with_capacity(candidate_minutes.len());
    for &minutes in candidate_minutes {
        let mut cfg = base.clone();
        cfg.preictal_minutes = minutes;

        let mut epochs: Vec<LabeledEpoch> = Vec::new();
        for tensor in tensors {
            let mut segs = segment(tensor, &cfg)?;
            for epoch in &mut segs {
                normalize_epoch(epoch);
            }
            epochs.extend(segs);
        }
        let ids: Vec<String> = epochs.iter().map(|e| e.recording_id.clone()).collect();
        let folds = kfold_split(&ids, cfg.folds)?;

        let mut fold_losses = Vec::with_capacity(folds.len());
        for (train_idx, val_idx) in &folds {
            let train_side: Vec<LabeledEpoch> =
                train_idx.iter().map(|&i| epochs[i].clone()).collect();
            let train_side = balance(train_side, cfg.seed)?;
            let train_examples = epoch_examples(&train_side, plan)?;
            let val_side: Vec<LabeledEpoch> =
                val_idx.iter().map(|&i| epochs[i].clone()).collect();
            let val_examples = epoch_examples(&val_side, plan)?;

            let params = NetworkParameters::init(plan.clone(), cfg.seed)?;
            let result = fit(params, &train_examples, &val_examples, train_cfg)?;
            fold_losses.push(result.val_losses[result.best_pass - 1]);
        }
        mean_val_losses.push(fold_losses.iter().sum::<f64>() / fold_losses.len() as f64);
    }

    let mut best = 0;
    for (i, &loss) in mean_val_losses.iter().enumerate() {
        if loss < mean_val_losses[best] {
            best = i;
        }
    }
    Ok(GridSearchResult { best_preictal_minutes: candidate_minutes[best], mean_val_losses })
}
