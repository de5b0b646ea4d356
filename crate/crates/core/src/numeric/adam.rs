//! Adam with bias correction.

use super::tensor::{Parameter, Scalar, Tensor};

/// Optimizer state: one pair of moment tensors per parameter, aligned by
/// index with the parameter list passed to [`adam_step`].
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[&Parameter<T>], learning_rate: f64) -> AdamState<T> {
        AdamState {
            learning_rate: T::from_f64(learning_rate),
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            epsilon: T::from_f64(1e-8),
            step: 0,
            first: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            second: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64, epsilon: f64) -> AdamState<T> {
        self.beta1 = T::from_f64(beta1);
        self.beta2 = T::from_f64(beta2);
        self.epsilon = T::from_f64(epsilon);
        self
    }
}

/// One Adam update over `params`; gradients are zeroed afterwards and
/// non-trainable parameters are left untouched.
pub fn adam_step<T: Scalar>(params: &mut [&mut Parameter<T>], state: &mut AdamState<T>) {
    assert_eq!(params.len(), state.first.len(), "optimizer state does not match parameter list");
    state.step += 1;
    let t = state.step as i32;
    let one = T::one();
    let bias1 = one - state.beta1.powi(t);
    let bias2 = one - state.beta2.powi(t);
    for (i, param) in params.iter_mut().enumerate() {
        if !param.trainable {
            param.zero_grad();
            continue;
        }
        let m = state.first[i].values_mut();
        let v = state.second[i].values_mut();
        let grads = param.grad.values_mut();
        let values = param.value.values_mut();
        for j in 0..values.len() {
            let g = grads[j];
            m[j] = state.beta1 * m[j] + (one - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (one - state.beta2) * g * g;
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            values[j] = values[j] - state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
            grads[j] = T::zero();
        }
    }
}
