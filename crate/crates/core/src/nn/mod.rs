//! From-scratch neural-network engine.
//!
//! Two architectures share one training loop: a dense multilayer
//! perceptron over feature vectors ([`MlpModel`]) and a small
//! convolutional network over binary landmark grids ([`CnnModel`]).
//! Both expose inference and mean-batch gradients through [`Network`],
//! are optimized by [`adam_step`], and serialize to a checksummed binary
//! file via [`save_model`]/[`load_model`].
//!
//! Parameters are stored in the scalar type `T`; training is exactly
//! reproducible given a seed because a single stream of random draws
//! covers init, shuffling, and dropout masks in a fixed order.

mod adam;
mod cnn;
mod io;
mod mlp;
mod train;

use thiserror::Error;

use crate::scalar::Scalar;

pub use adam::{adam_step, AdamState};
pub use cnn::{CnnModel, CnnShape};
pub use io::{
    crc32, load_model, load_model_file, save_model, save_model_file, AnyModel, ModelIoError,
    MODEL_MAGIC, MODEL_VERSION,
};
pub use mlp::{DenseLayer, MlpModel};
pub use train::{train, EpochRecord, TrainConfig, TrainHistory};

/// Default hidden widths of the dense classifier.
pub const DEFAULT_HIDDEN_DIMS: [usize; 3] = [1024, 512, 256];
/// Default dropout rate after each hidden dense layer.
pub const DEFAULT_MLP_DROPOUT: f64 = 0.5;
/// Default dropout rate after the pooling stage.
pub const DEFAULT_CNN_DROPOUT: f64 = 0.25;
/// Default convolution filter count and kernel size.
pub const DEFAULT_CONV_FILTERS: usize = 32;
pub const DEFAULT_CONV_KERNEL: usize = 3;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-6;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-7;
pub const DEFAULT_BATCH_SIZE: usize = 32;

/// Floor applied inside the loss logarithm only.
pub const LOSS_PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter buffer has {got} values, model holds {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("label index {index} out of range for {len} classes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("training requires a nonempty dataset")]
    EmptyDataset,
    #[error("invalid architecture: {0}")]
    BadArchitecture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softmax,
}

/// Numerically stable softmax; equal logits give a uniform distribution.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut max = logits[0];
    for &z in &logits[1..] {
        max = max.max(z);
    }
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let mut sum = T::zero();
    for &e in &exps {
        sum += e;
    }
    exps.into_iter().map(|e| e / sum).collect()
}

/// Negative log-likelihood of the true class, with the probability
/// floored at [`LOSS_PROB_FLOOR`] so a confident miss stays finite.
pub fn cross_entropy<T: Scalar>(probs: &[T], label_index: usize) -> Result<T, NnError> {
    if label_index >= probs.len() {
        return Err(NnError::IndexOutOfRange {
            index: label_index,
            len: probs.len(),
        });
    }
    let floored = probs[label_index].max(T::from_f64(LOSS_PROB_FLOOR));
    Ok(-floored.ln())
}

/// Index of the largest probability; ties go to the lower index.
pub fn argmax<T: Scalar>(probs: &[T]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Mean-batch gradients plus the training-mode statistics of the same pass.
#[derive(Debug, Clone)]
pub struct BatchGrad<T> {
    pub mean_loss: T,
    pub correct: usize,
    pub grads: Vec<T>,
}

/// A trainable classifier: flat parameter access for the optimizer,
/// inference, and mean-batch backpropagation.
pub trait Network<T: Scalar> {
    /// One classifier input (a feature vector or a landmark grid).
    type Input: ?Sized;

    fn num_classes(&self) -> usize;
    fn class_labels(&self) -> &[String];
    fn num_params(&self) -> usize;
    fn flat_params(&self) -> Vec<T>;
    fn set_flat_params(&mut self, params: &[T]) -> Result<(), NnError>;

    /// Deterministic forward pass with no dropout.
    fn forward_infer(&self, x: &Self::Input) -> Result<Vec<T>, NnError>;

    /// Runs a train-mode forward/backward pass over the batch and returns
    /// gradients of the mean batch loss, in `flat_params` order. Dropout
    /// masks are drawn from `rng` in batch order, one sample at a time.
    fn batch_backward(
        &self,
        batch: &[(&Self::Input, usize)],
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<BatchGrad<T>, NnError>;
}

/// Dropout mask values: 0 with probability `rate`, else exactly
/// `1/(1 - rate)`. Rates of zero draw nothing from the stream.
pub(crate) fn dropout_mask<T: Scalar>(
    rng: &mut rand_chacha::ChaCha8Rng,
    len: usize,
    rate: f64,
) -> Vec<T> {
    use rand::Rng;
    debug_assert!((0.0..1.0).contains(&rate) && rate > 0.0);
    let scale = T::from_f64(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| {
            if rng.random::<f64>() >= rate {
                scale
            } else {
                T::zero()
            }
        })
        .collect()
}
