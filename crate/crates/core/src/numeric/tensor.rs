//! Dense row-major tensors and trainable parameters.
//!
//! Values are generic over [`Scalar`]: training runs in `f32`, the gradient
//! checker instantiates the same code in `f64`.

use std::fmt::{Debug, Display};

use num_traits::Float;

/// Element type of tensors. `f32` and `f64` implement it.
pub trait Scalar: Float + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from `f64`, used for constants and rng draws.
    fn from_f64(v: f64) -> Self {
        Self::from(v).expect("finite f64 converts to any Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense tensor with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Tensor<T> {
        Tensor { shape: shape.to_vec(), values: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_values(shape: &[usize], values: Vec<T>) -> Tensor<T> {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "value count must equal the product of the dimensions"
        );
        Tensor { shape: shape.to_vec(), values }
    }

    pub fn scalar_count(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn fill(&mut self, v: T) {
        self.values.fill(v);
    }

    /// All values finite (layer boundaries reject NaN/Inf).
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[T] {
        assert_eq!(self.shape.len(), 2, "row() requires a rank-2 tensor");
        let cols = self.shape[1];
        &self.values[i * cols..(i + 1) * cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        assert_eq!(self.shape.len(), 2, "row_mut() requires a rank-2 tensor");
        let cols = self.shape[1];
        &mut self.values[i * cols..(i + 1) * cols]
    }

    /// Convert element type; used when persisting `f64` checker runs or
    /// loading `f32` checkpoints into a wider type.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| U::from_f64(v.to_f64_lossy())).collect(),
        }
    }
}

/// A tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    /// Non-trainable parameters are skipped by the optimizer.
    pub trainable: bool,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(value: Tensor<T>) -> Parameter<T> {
        let grad = Tensor::zeros(value.shape());
        Parameter { value, grad, trainable: true }
    }

    pub fn frozen(value: Tensor<T>) -> Parameter<T> {
        Parameter { trainable: false, ..Parameter::new(value) }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}
