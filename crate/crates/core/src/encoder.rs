//! Convolutional sentence encoder.
//!
//! Token ids are embedded, run through parallel valid convolutions of several
//! widths, rectified, max-pooled over time, and the pooled vectors are
//! concatenated. Dropout is applied to the concatenation while training. The
//! concatenation itself is the sentence embedding; there is no dense or
//! softmax layer on top, since classification happens in a distance head.
//!
//! Token id 0 is the padding id; its embedding row is pinned at zero and
//! receives no updates. Every input is truncated and padded to the
//! configured maximum length, so appending padding to an input never changes
//! the encoding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::corpus::PAD_ID;
use crate::numeric::{
    conv1d_backward, conv1d_valid, dropout, dropout_backward, embedding_lookup,
    embedding_lookup_backward, max_over_time, max_over_time_backward, relu, relu_backward,
    DropoutMask, Parameter, Scalar, Tensor,
};

/// Encoder hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// Filter widths, ascending.
    pub filter_widths: Vec<usize>,
    /// Feature maps per width.
    pub feature_maps: usize,
    pub dropout: f64,
    /// Inputs are truncated and padded to exactly this many tokens.
    pub max_len: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            vocab_size: 2,
            embedding_dim: 300,
            filter_widths: vec![3, 4, 5],
            feature_maps: 100,
            dropout: 0.5,
            max_len: 40,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    /// Dimension of the sentence embedding.
    pub fn output_dim(&self) -> usize {
        self.filter_widths.len() * self.feature_maps
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.vocab_size < 2 {
            return Err("vocab_size must cover at least the padding and unknown ids".into());
        }
        if self.embedding_dim == 0 || self.feature_maps == 0 {
            return Err("embedding_dim and feature_maps must be positive".into());
        }
        if self.filter_widths.is_empty() || self.filter_widths.windows(2).any(|w| w[0] > w[1]) {
            return Err("filter_widths must be non-empty and ascending".into());
        }
        if self.filter_widths[0] == 0 {
            return Err("filter widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err("dropout must lie in [0, 1)".into());
        }
        let widest = *self.filter_widths.last().unwrap();
        if self.max_len < widest {
            return Err(format!("max_len {} is smaller than the widest filter {widest}", self.max_len));
        }
        Ok(())
    }
}

/// One convolution branch.
#[derive(Debug, Clone)]
pub struct ConvBlock<T> {
    pub width: usize,
    /// [width, embedding_dim, feature_maps]
    pub filters: Parameter<T>,
    /// [feature_maps]
    pub bias: Parameter<T>,
}

/// All trainable tensors of the encoder. One parameter set is shared by the
/// support and query branches.
#[derive(Debug, Clone)]
pub struct EncoderParams<T> {
    /// [vocab_size, embedding_dim]; row 0 is the zero padding row.
    pub embedding: Parameter<T>,
    pub convs: Vec<ConvBlock<T>>,
}

impl<T: Scalar> EncoderParams<T> {
    /// Parameters in declared order: embedding, then filters and bias per
    /// width. Checkpoints and the optimizer both rely on this order.
    pub fn params(&self) -> Vec<&Parameter<T>> {
        let mut out = vec![&self.embedding];
        for block in &self.convs {
            out.push(&block.filters);
            out.push(&block.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut out: Vec<&mut Parameter<T>> = vec![&mut self.embedding];
        for block in &mut self.convs {
            out.push(&mut block.filters);
            out.push(&mut block.bias);
        }
        out
    }

    /// `(name, tensor)` pairs in declared parameter order.
    pub fn named_values(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![("embedding".to_string(), &self.embedding.value)];
        for block in &self.convs {
            out.push((format!("conv{}.filters", block.width), &block.filters.value));
            out.push((format!("conv{}.bias", block.width), &block.bias.value));
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.value.is_finite())
    }

    /// Convert the parameter values to another scalar type (gradients reset).
    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        EncoderParams {
            embedding: Parameter::new(self.embedding.value.cast()),
            convs: self
                .convs
                .iter()
                .map(|b| ConvBlock {
                    width: b.width,
                    filters: Parameter::new(b.filters.value.cast()),
                    bias: Parameter::new(b.bias.value.cast()),
                })
                .collect(),
        }
    }
}

/// Initialize encoder parameters: embeddings uniform in [-0.25, 0.25] with a
/// zero padding row, filters uniform in ±sqrt(6 / (fan_in + fan_out)), zero
/// biases. Deterministic for a given `config.seed`.
pub fn init_encoder<T: Scalar>(config: &EncoderConfig) -> EncoderParams<T> {
    config.validate().expect("invalid encoder config");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (v, d, f) = (config.vocab_size, config.embedding_dim, config.feature_maps);

    let mut embedding = Tensor::zeros(&[v, d]);
    for val in embedding.values_mut() {
        *val = T::from_f64(rng.random::<f64>() * 0.5 - 0.25);
    }
    embedding.row_mut(PAD_ID).fill(T::zero());

    let convs = config
        .filter_widths
        .iter()
        .map(|&w| {
            let fan_in = (w * d) as f64;
            let bound = (6.0 / (fan_in + f as f64)).sqrt();
            let mut filters = Tensor::zeros(&[w, d, f]);
            for val in filters.values_mut() {
                *val = T::from_f64((rng.random::<f64>() * 2.0 - 1.0) * bound);
            }
            ConvBlock { width: w, filters: Parameter::new(filters), bias: Parameter::new(Tensor::zeros(&[f])) }
        })
        .collect();

    EncoderParams { embedding: Parameter::new(embedding), convs }
}

/// Cached intermediates of one [`encode`] call, needed by [`encode_backward`].
#[derive(Debug)]
pub struct EncodeContext<T> {
    padded_ids: Vec<usize>,
    embedded: Tensor<T>,
    /// Pre-activation conv output and pooling argmax per width.
    branches: Vec<(Tensor<T>, Vec<usize>)>,
    dropout_mask: DropoutMask,
}

/// Encode a token id sequence into a sentence embedding of
/// [`EncoderConfig::output_dim`] values.
///
/// Passing a dropout rng selects training mode; `None` encodes in inference
/// mode, which is deterministic. The id sequence must be non-empty; it is
/// truncated and padded to `config.max_len`.
pub fn encode<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    ids: &[usize],
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> (Vec<T>, EncodeContext<T>) {
    assert!(!ids.is_empty(), "cannot encode an empty id sequence");
    let mut padded_ids: Vec<usize> = ids.iter().copied().take(config.max_len).collect();
    padded_ids.resize(config.max_len, PAD_ID);

    let embedded = embedding_lookup(&params.embedding.value, &padded_ids);
    let mut pooled: Vec<T> = Vec::with_capacity(config.output_dim());
    let mut branches = Vec::with_capacity(params.convs.len());
    for block in &params.convs {
        let pre = conv1d_valid(&embedded, &block.filters.value, &block.bias.value);
        let activated = relu(&pre);
        let (maxed, argmax) = max_over_time(&activated);
        pooled.extend_from_slice(maxed.values());
        branches.push((pre, argmax));
    }

    let pooled_tensor = Tensor::from_values(&[pooled.len()], pooled);
    let (out, dropout_mask) = match dropout_rng {
        Some(rng) => dropout(&pooled_tensor, config.dropout, true, rng),
        None => (pooled_tensor, DropoutMask::identity(config.output_dim())),
    };
    (out.values().to_vec(), EncodeContext { padded_ids, embedded, branches, dropout_mask })
}

/// Accumulate gradients of one encoding into the parameter gradients.
///
/// `grad_out` is the loss gradient with respect to the sentence embedding.
/// The padding row of the embedding gradient is re-zeroed, keeping the
/// padding embedding pinned at zero across optimizer steps.
pub fn encode_backward<T: Scalar>(
    params: &mut EncoderParams<T>,
    config: &EncoderConfig,
    ctx: &EncodeContext<T>,
    grad_out: &[T],
) {
    assert_eq!(grad_out.len(), config.output_dim(), "gradient does not match the embedding dimension");
    let grad = dropout_backward(
        &Tensor::from_values(&[grad_out.len()], grad_out.to_vec()),
        &ctx.dropout_mask,
    );

    let f = config.feature_maps;
    let mut grad_embedded = Tensor::zeros(ctx.embedded.shape());
    for (bi, block) in params.convs.iter_mut().enumerate() {
        let (pre, argmax) = &ctx.branches[bi];
        let seg = &grad.values()[bi * f..(bi + 1) * f];
        let grad_pooled = Tensor::from_values(&[f], seg.to_vec());
        let grad_activated = max_over_time_backward(&grad_pooled, argmax, pre.shape()[0]);
        let grad_pre = relu_backward(pre, &grad_activated);
        let gi = conv1d_backward(
            &ctx.embedded,
            &block.filters.value,
            &grad_pre,
            &mut block.filters.grad,
            &mut block.bias.grad,
        );
        for (acc, &g) in grad_embedded.values_mut().iter_mut().zip(gi.values()) {
            *acc = *acc + g;
        }
    }
    embedding_lookup_backward(&grad_embedded, &ctx.padded_ids, &mut params.embedding.grad);
    params.embedding.grad.row_mut(PAD_ID).fill(T::zero());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::grad_check;

    fn tiny_config(seed: u64) -> EncoderConfig {
        EncoderConfig {
            vocab_size: 20,
            embedding_dim: 8,
            filter_widths: vec![2, 3],
            feature_maps: 4,
            dropout: 0.5,
            max_len: 6,
            seed,
        }
    }

    #[test]
    fn default_output_dimension_is_300() {
        // 3 filter widths x 100 feature maps concatenated
        let config = EncoderConfig { vocab_size: 10, seed: 1, ..Default::default() };
        assert_eq!(config.output_dim(), 300);
        let params: EncoderParams<f32> = init_encoder(&config);
        let (emb, _) = encode(&params, &config, &[1, 2, 3], None);
        assert_eq!(emb.len(), 300);
    }

    #[test]
    fn init_is_seed_deterministic_with_zero_pad_row() {
        let config = tiny_config(7);
        let a: EncoderParams<f64> = init_encoder(&config);
        let b: EncoderParams<f64> = init_encoder(&config);
        for (pa, pb) in a.params().iter().zip(b.params()) {
            assert_eq!(pa.value.values(), pb.value.values());
        }
        assert!(a.embedding.value.row(PAD_ID).iter().all(|&v| v == 0.0));
        assert!(a
            .embedding
            .value
            .values()
            .iter()
            .all(|v| v.abs() <= 0.25));
        let c: EncoderParams<f64> = init_encoder(&tiny_config(8));
        assert_ne!(a.embedding.value.values(), c.embedding.value.values());
    }

    #[test]
    fn every_all_pad_input_encodes_identically() {
        let config = tiny_config(3);
        let params: EncoderParams<f64> = init_encoder(&config);
        let (a, _) = encode(&params, &config, &[PAD_ID], None);
        let (b, _) = encode(&params, &config, &[PAD_ID; 4], None);
        assert_eq!(a, b);
    }

    #[test]
    fn inference_is_deterministic_and_padding_invariant() {
        let config = tiny_config(5);
        let params: EncoderParams<f64> = init_encoder(&config);
        let (a, _) = encode(&params, &config, &[3, 4, 5], None);
        let (b, _) = encode(&params, &config, &[3, 4, 5], None);
        assert_eq!(a, b);
        let (c, _) = encode(&params, &config, &[3, 4, 5, PAD_ID, PAD_ID], None);
        assert_eq!(a, c);
    }

    #[test]
    fn truncation_caps_the_input_window() {
        let config = tiny_config(5);
        let params: EncoderParams<f64> = init_encoder(&config);
        let long: Vec<usize> = (1..15).map(|i| 1 + i % 10).collect();
        let (a, _) = encode(&params, &config, &long, None);
        let (b, _) = encode(&params, &config, &long[..config.max_len], None);
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic(expected = "empty id sequence")]
    fn empty_input_is_a_shape_error() {
        let config = tiny_config(5);
        let params: EncoderParams<f64> = init_encoder(&config);
        encode(&params, &config, &[], None);
    }

    #[test]
    fn output_dim_is_independent_of_input_length() {
        let config = tiny_config(11);
        let params: EncoderParams<f64> = init_encoder(&config);
        for len in [1usize, 2, 5, 9] {
            let ids: Vec<usize> = (0..len).map(|i| 1 + i % 12).collect();
            let (emb, _) = encode(&params, &config, &ids, None);
            assert_eq!(emb.len(), config.output_dim());
        }
    }

    // Sum-of-embedding objective: checks the whole encoder backward path
    // (dropout off; the episode-level check with heads lives in the
    // acceptance suite). Biases are shifted off zero so no convolution
    // window sits exactly on the rectifier kink.
    #[test]
    fn encoder_gradients_match_finite_differences() {
        use rand_chacha::rand_core::SeedableRng;
        let config = tiny_config(13);
        let mut params: EncoderParams<f64> = init_encoder(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for block in &mut params.convs {
            for b in block.bias.value.values_mut() {
                *b = rng.random::<f64>() * 0.2 + 0.05;
            }
        }
        let ids = vec![2usize, 7, 7, 4];

        let flat: Vec<f64> = params
            .params()
            .iter()
            .flat_map(|p| p.value.values().iter().copied())
            .collect();
        let rebuild = |x: &[f64]| -> EncoderParams<f64> {
            let mut fresh = params.clone();
            let mut at = 0usize;
            for p in fresh.params_mut() {
                let n = p.value.scalar_count();
                p.value.values_mut().copy_from_slice(&x[at..at + n]);
                at += n;
            }
            // The padding row is pinned at zero; perturbing those
            // coordinates must not change the loss, matching their zero
            // analytic gradient.
            fresh.embedding.value.row_mut(PAD_ID).fill(0.0);
            fresh
        };
        let loss = |x: &[f64]| -> f64 {
            let p = rebuild(x);
            encode(&p, &config, &ids, None).0.iter().sum()
        };

        let mut train_params = params.clone();
        let (emb, ctx) = encode(&train_params, &config, &ids, None);
        let grad_out = vec![1.0f64; emb.len()];
        encode_backward(&mut train_params, &config, &ctx, &grad_out);
        let analytic: Vec<f64> = train_params
            .params()
            .iter()
            .flat_map(|p| p.grad.values().iter().copied())
            .collect();

        let err = grad_check(loss, &flat, &analytic, 1e-3);
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn dropout_training_mode_draws_from_the_rng() {
        use rand_chacha::rand_core::SeedableRng;
        let config = tiny_config(17);
        let params: EncoderParams<f64> = init_encoder(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, _) = encode(&params, &config, &[2, 3], Some(&mut rng));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (b, _) = encode(&params, &config, &[2, 3], Some(&mut rng));
        assert_eq!(a, b, "same rng stream gives the same mask");
        let zeros = a.iter().filter(|&&v| v == 0.0).count();
        assert!(zeros > 0, "rate-0.5 dropout on 8 features should zero something");
    }
}
