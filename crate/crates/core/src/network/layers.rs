//! Layer primitives: same-padding convolution, ReLU, inverted-scaling
//! dropout, non-overlapping max pooling, dense layers, and softmax.
//!
//! Planes are row x column x channel with channels contiguous; convolution
//! weights are output-channel x kernel-row x kernel-column x input-channel
//! so the innermost products run over contiguous slices.

use ndarray::{Array1, Array2, Array3, Array4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// out x kernel rows x kernel cols x in.
    pub weights: Array4<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// out x in.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Same padding for stride-1 convolution: `(k - 1) / 2` leading zeros, the
/// remainder trailing, so even kernels pad one extra at the bottom/right.
fn lead_pad(k: usize) -> usize {
    (k - 1) / 2
}

pub fn conv_forward(input: &Array3<f64>, p: &ConvParams) -> Array3<f64> {
    let (rows, cols, in_ch) = input.dim();
    let (out_ch, kr, kc, w_in) = p.weights.dim();
    debug_assert_eq!(in_ch, w_in);
    let (pt, pl) = (lead_pad(kr), lead_pad(kc));

    let mut out = Array3::<f64>::zeros((rows, cols, out_ch));
    for mut lane in out.rows_mut() {
        lane.assign(&p.bias);
    }

    let x = input.as_slice().unwrap();
    let w = p.weights.as_slice().unwrap();
    let y = out.as_slice_mut().unwrap();

    for r in 0..rows {
        for dr in 0..kr {
            let r_in = r as isize + dr as isize - pt as isize;
            if r_in < 0 || r_in >= rows as isize {
                continue;
            }
            let r_in = r_in as usize;
            for c in 0..cols {
                let y_at = (r * cols + c) * out_ch;
                for dc in 0..kc {
                    let c_in = c as isize + dc as isize - pl as isize;
                    if c_in < 0 || c_in >= cols as isize {
                        continue;
                    }
                    let xv = &x[(r_in * cols + c_in as usize) * in_ch..][..in_ch];
                    for o in 0..out_ch {
                        let wv = &w[((o * kr + dr) * kc + dc) * in_ch..][..in_ch];
                        let mut acc = 0.0;
                        for i in 0..in_ch {
                            acc += xv[i] * wv[i];
                        }
                        y[y_at + o] += acc;
                    }
                }
            }
        }
    }
    out
}

pub fn conv_backward(
    input: &Array3<f64>,
    p: &ConvParams,
    grad_out: &Array3<f64>,
) -> (Array3<f64>, Array4<f64>, Array1<f64>) {
    let (rows, cols, in_ch) = input.dim();
    let (out_ch, kr, kc, _) = p.weights.dim();
    let (pt, pl) = (lead_pad(kr), lead_pad(kc));

    let mut grad_in = Array3::<f64>::zeros((rows, cols, in_ch));
    let mut grad_w = Array4::<f64>::zeros((out_ch, kr, kc, in_ch));
    let mut grad_b = Array1::<f64>::zeros(out_ch);

    for lane in grad_out.rows() {
        for (o, g) in lane.iter().enumerate() {
            grad_b[o] += g;
        }
    }

    let x = input.as_slice().unwrap();
    let w = p.weights.as_slice().unwrap();
    let g = grad_out.as_slice().unwrap();
    let gx = grad_in.as_slice_mut().unwrap();
    let gw = grad_w.as_slice_mut().unwrap();

    for r in 0..rows {
        for dr in 0..kr {
            let r_in = r as isize + dr as isize - pt as isize;
            if r_in < 0 || r_in >= rows as isize {
                continue;
            }
            let r_in = r_in as usize;
            for c in 0..cols {
                let g_at = (r * cols + c) * out_ch;
                for dc in 0..kc {
                    let c_in = c as isize + dc as isize - pl as isize;
                    if c_in < 0 || c_in >= cols as isize {
                        continue;
                    }
                    let x_at = (r_in * cols + c_in as usize) * in_ch;
                    for o in 0..out_ch {
                        let go = g[g_at + o];
                        if go == 0.0 {
                            continue;
                        }
                        let w_at = ((o * kr + dr) * kc + dc) * in_ch;
                        for i in 0..in_ch {
                            gw[w_at + i] += go * x[x_at + i];
                            gx[x_at + i] += go * w[w_at + i];
                        }
                    }
                }
            }
        }
    }
    (grad_in, grad_w, grad_b)
}

/// ReLU with the zero subgradient at zero: the mask records strictly
/// positive pre-activations.
pub fn relu_in_place(values: &mut [f64]) -> Vec<bool> {
    values
        .iter_mut()
        .map(|v| {
            let on = *v > 0.0;
            if !on {
                *v = 0.0;
            }
            on
        })
        .collect()
}

pub fn relu_backward(grad: &mut [f64], mask: &[bool]) {
    for (g, &on) in grad.iter_mut().zip(mask) {
        if !on {
            *g = 0.0;
        }
    }
}

/// Inverted-scaling dropout: kept units are divided by the keep
/// probability so inference needs no rescaling.
pub fn dropout_in_place(values: &mut [f64], rate: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    if rate == 0.0 {
        return vec![true; values.len()];
    }
    let keep_scale = 1.0 / (1.0 - rate);
    values
        .iter_mut()
        .map(|v| {
            let keep = rng.gen::<f64>() >= rate;
            *v = if keep { *v * keep_scale } else { 0.0 };
            keep
        })
        .collect()
}

pub fn dropout_backward(grad: &mut [f64], rate: f64, mask: &[bool]) {
    let keep_scale = 1.0 / (1.0 - rate);
    for (g, &keep) in grad.iter_mut().zip(mask) {
        *g = if keep { *g * keep_scale } else { 0.0 };
    }
}

/// Non-overlapping max pool. The plane must divide exactly by the factor.
/// Returns the pooled plane and, per output element (in output layout
/// order), the flat input index of its maximum; ties keep the first
/// occurrence in row-major window order.
pub fn maxpool_forward(input: &Array3<f64>, factor: (usize, usize)) -> (Array3<f64>, Vec<usize>) {
    let (rows, cols, ch) = input.dim();
    let (pr, pc) = factor;
    debug_assert!(rows % pr == 0 && cols % pc == 0);
    let (orows, ocols) = (rows / pr, cols / pc);

    let x = input.as_slice().unwrap();
    let mut out = Array3::<f64>::zeros((orows, ocols, ch));
    let y = out.as_slice_mut().unwrap();
    let mut argmax = vec![0usize; orows * ocols * ch];

    for or in 0..orows {
        for oc in 0..ocols {
            for k in 0..ch {
                let mut best_at = (or * pr * cols + oc * pc) * ch + k;
                let mut best = x[best_at];
                for r in or * pr..(or + 1) * pr {
                    for c in oc * pc..(oc + 1) * pc {
                        let at = (r * cols + c) * ch + k;
                        if x[at] > best {
                            best = x[at];
                            best_at = at;
                        }
                    }
                }
                let o_at = (or * ocols + oc) * ch + k;
                y[o_at] = best;
                argmax[o_at] = best_at;
            }
        }
    }
    (out, argmax)
}

pub fn maxpool_backward(grad_out: &Array3<f64>, argmax: &[usize], input_dim: (usize, usize, usize)) -> Array3<f64> {
    let mut grad_in = Array3::<f64>::zeros(input_dim);
    let gx = grad_in.as_slice_mut().unwrap();
    for (g, &at) in grad_out.as_slice().unwrap().iter().zip(argmax) {
        gx[at] += g;
    }
    grad_in
}

pub fn dense_forward(x: &[f64], p: &DenseParams) -> Vec<f64> {
    let w = p.weights.as_slice().unwrap();
    let n_in = x.len();
    p.bias
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &w[o * n_in..][..n_in];
            let mut acc = b;
            for i in 0..n_in {
                acc += row[i] * x[i];
            }
            acc
        })
        .collect()
}

pub fn dense_backward(
    x: &[f64],
    p: &DenseParams,
    grad_out: &[f64],
) -> (Vec<f64>, Array2<f64>, Array1<f64>) {
    let (n_out, n_in) = p.weights.dim();
    let w = p.weights.as_slice().unwrap();
    let mut grad_in = vec![0.0; n_in];
    let mut grad_w = Array2::<f64>::zeros((n_out, n_in));
    let gw = grad_w.as_slice_mut().unwrap();
    for o in 0..n_out {
        let g = grad_out[o];
        if g == 0.0 {
            continue;
        }
        let row = &w[o * n_in..][..n_in];
        let grow = &mut gw[o * n_in..][..n_in];
        for i in 0..n_in {
            grow[i] += g * x[i];
            grad_in[i] += g * row[i];
        }
    }
    (grad_in, grad_w, Array1::from_vec(grad_out.to_vec()))
}

/// Max-subtracted softmax.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}
