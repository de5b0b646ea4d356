//! Forward and backward passes for every layer the encoder needs.
//!
//! Backward functions take the upstream gradient and either return input
//! gradients or accumulate into parameter gradient tensors. Shape and index
//! violations are programmer errors and panic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Scalar, Tensor};

/// Gather rows of `table` ([V, D]) for `ids`, producing a [len(ids), D] tensor.
pub fn embedding_lookup<T: Scalar>(table: &Tensor<T>, ids: &[usize]) -> Tensor<T> {
    assert_eq!(table.shape().len(), 2, "embedding table must be [V, D]");
    let (v, d) = (table.shape()[0], table.shape()[1]);
    let mut out = Tensor::zeros(&[ids.len(), d]);
    for (t, &id) in ids.iter().enumerate() {
        assert!(id < v, "token id {id} out of range for vocabulary of {v}");
        out.row_mut(t).copy_from_slice(table.row(id));
    }
    out
}

/// Accumulate `grad_out` ([T, D]) into the table gradient; repeated ids add up.
pub fn embedding_lookup_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    ids: &[usize],
    table_grad: &mut Tensor<T>,
) {
    assert_eq!(grad_out.shape()[0], ids.len());
    assert_eq!(grad_out.shape()[1], table_grad.shape()[1]);
    for (t, &id) in ids.iter().enumerate() {
        let src = grad_out.row(t);
        for (g, &s) in table_grad.row_mut(id).iter_mut().zip(src) {
            *g = *g + s;
        }
    }
}

/// Valid 1-d convolution over time.
///
/// `input` is [T, D], `filters` is [W, D, F], `bias` is [F]; the output is
/// [T - W + 1, F] with `out[t, f] = bias[f] + sum_{w,d} input[t+w, d] *
/// filters[w, d, f]`. Requires `T >= W`; callers pad shorter sequences.
pub fn conv1d_valid<T: Scalar>(input: &Tensor<T>, filters: &Tensor<T>, bias: &Tensor<T>) -> Tensor<T> {
    let (t_len, d) = (input.shape()[0], input.shape()[1]);
    let (w, fd, f) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    assert_eq!(d, fd, "input and filter depth must agree");
    assert_eq!(bias.shape(), [f], "bias must be [F]");
    assert!(t_len >= w, "sequence length {t_len} is shorter than filter width {w}");

    let out_len = t_len - w + 1;
    let mut out = Tensor::zeros(&[out_len, f]);
    let xs = input.values();
    let ks = filters.values();
    let out_vals = out.values_mut();
    for t in 0..out_len {
        let dst = &mut out_vals[t * f..(t + 1) * f];
        dst.copy_from_slice(bias.values());
        for wi in 0..w {
            let x_row = &xs[(t + wi) * d..(t + wi + 1) * d];
            for (di, &x) in x_row.iter().enumerate() {
                let k_row = &ks[(wi * d + di) * f..(wi * d + di + 1) * f];
                for (o, &k) in dst.iter_mut().zip(k_row) {
                    *o = *o + x * k;
                }
            }
        }
    }
    out
}

/// Backward pass of [`conv1d_valid`]: returns the input gradient and
/// accumulates into the filter and bias gradients.
pub fn conv1d_backward<T: Scalar>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    grad_out: &Tensor<T>,
    filters_grad: &mut Tensor<T>,
    bias_grad: &mut Tensor<T>,
) -> Tensor<T> {
    let (t_len, d) = (input.shape()[0], input.shape()[1]);
    let (w, _, f) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    let out_len = t_len - w + 1;
    assert_eq!(grad_out.shape(), [out_len, f]);

    let mut grad_input = Tensor::zeros(&[t_len, d]);
    let xs = input.values();
    let ks = filters.values();
    let gs = grad_out.values();
    let gx = grad_input.values_mut();
    let gk = filters_grad.values_mut();
    let gb = bias_grad.values_mut();
    for t in 0..out_len {
        let g_row = &gs[t * f..(t + 1) * f];
        for (b, &g) in gb.iter_mut().zip(g_row) {
            *b = *b + g;
        }
        for wi in 0..w {
            let x_row = &xs[(t + wi) * d..(t + wi + 1) * d];
            let gx_row = &mut gx[(t + wi) * d..(t + wi + 1) * d];
            for di in 0..d {
                let k_row = &ks[(wi * d + di) * f..(wi * d + di + 1) * f];
                let gk_row = &mut gk[(wi * d + di) * f..(wi * d + di + 1) * f];
                let x = x_row[di];
                let mut acc = T::zero();
                for fi in 0..f {
                    let g = g_row[fi];
                    acc = acc + g * k_row[fi];
                    gk_row[fi] = gk_row[fi] + g * x;
                }
                gx_row[di] = gx_row[di] + acc;
            }
        }
    }
    grad_input
}

/// Elementwise `max(0, x)`; the subgradient at 0 is 0.
pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    for v in out.values_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

/// Backward mask of [`relu`]: passes gradient only where `x > 0`.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    assert_eq!(x.shape(), grad_out.shape());
    let mut grad = grad_out.clone();
    for (g, &v) in grad.values_mut().iter_mut().zip(x.values()) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
    grad
}

/// Per-feature maximum over time: [T, F] -> ([F], argmax row per feature).
/// Ties break to the smallest timestep. Requires `T >= 1`.
pub fn max_over_time<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, Vec<usize>) {
    let (t_len, f) = (input.shape()[0], input.shape()[1]);
    assert!(t_len >= 1, "max_over_time needs at least one timestep");
    let mut best = input.row(0).to_vec();
    let mut argmax = vec![0usize; f];
    for t in 1..t_len {
        for (fi, &v) in input.row(t).iter().enumerate() {
            if v > best[fi] {
                best[fi] = v;
                argmax[fi] = t;
            }
        }
    }
    (Tensor::from_values(&[f], best), argmax)
}

/// Backward of [`max_over_time`]: routes gradient to the argmax rows only.
pub fn max_over_time_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    argmax: &[usize],
    t_len: usize,
) -> Tensor<T> {
    let f = argmax.len();
    assert_eq!(grad_out.shape(), [f]);
    let mut grad = Tensor::zeros(&[t_len, f]);
    for (fi, (&t, &g)) in argmax.iter().zip(grad_out.values()).enumerate() {
        grad.row_mut(t)[fi] = g;
    }
    grad
}

/// Kept elements of an inverted-dropout application.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    keep: Vec<bool>,
    scale: f64,
}

impl DropoutMask {
    /// Identity mask (inference or rate 0).
    pub fn identity(len: usize) -> DropoutMask {
        DropoutMask { keep: vec![true; len], scale: 1.0 }
    }
}

/// Inverted dropout: zero each element with probability `rate` and scale
/// survivors by `1 / (1 - rate)` while training; identity at inference.
pub fn dropout<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> (Tensor<T>, DropoutMask) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
    if !training || rate == 0.0 {
        return (x.clone(), DropoutMask::identity(x.scalar_count()));
    }
    let scale = 1.0 / (1.0 - rate);
    let scale_t = T::from_f64(scale);
    let mut out = x.clone();
    let mut keep = vec![true; x.scalar_count()];
    for (v, k) in out.values_mut().iter_mut().zip(keep.iter_mut()) {
        if rng.random::<f64>() < rate {
            *v = T::zero();
            *k = false;
        } else {
            *v = *v * scale_t;
        }
    }
    (out, DropoutMask { keep, scale })
}

/// Backward of [`dropout`]: applies the same mask and scaling.
pub fn dropout_backward<T: Scalar>(grad_out: &Tensor<T>, mask: &DropoutMask) -> Tensor<T> {
    assert_eq!(grad_out.scalar_count(), mask.keep.len());
    let scale = T::from_f64(mask.scale);
    let mut grad = grad_out.clone();
    for (g, &k) in grad.values_mut().iter_mut().zip(&mask.keep) {
        *g = if k { *g * scale } else { T::zero() };
    }
    grad
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    assert!(!logits.is_empty());
    let max = logits.iter().cloned().fold(logits[0], T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `label` under `softmax(logits)`, with the logit gradient
/// `softmax(logits) - onehot(label)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> (T, Vec<T>) {
    assert!(logits.len() >= 2, "need at least two classes");
    assert!(label < logits.len(), "label out of range");
    let max = logits.iter().cloned().fold(logits[0], T::max);
    let log_sum = logits
        .iter()
        .map(|&z| (z - max).exp())
        .fold(T::zero(), |a, b| a + b)
        .ln();
    let loss = -(logits[label] - max - log_sum);
    let mut grad = softmax(logits);
    grad[label] = grad[label] - T::one();
    (loss, grad)
}
