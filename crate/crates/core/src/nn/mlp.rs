//! Dense multilayer perceptron with inverted dropout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    argmax, cross_entropy, dropout_mask, softmax, Activation, BatchGrad, Network, NnError,
};
use crate::scalar::Scalar;

/// One fully connected layer; weights are row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![T::zero(); out_dim * in_dim],
            biases: vec![T::zero(); out_dim],
            activation,
        }
    }

    /// Uniform init in ±sqrt(6/(fan_in + fan_out)), zero biases. Values
    /// are drawn as f64 row-major so every scalar type sees the same
    /// underlying sample sequence.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..out_dim * in_dim)
            .map(|_| T::from_f64(rng.random_range(-limit..limit)))
            .collect();
        DenseLayer {
            in_dim,
            out_dim,
            weights,
            biases: vec![T::zero(); out_dim],
            activation,
        }
    }

    /// Pre-activation `W x + b`.
    fn affine(&self, x: &[T]) -> Vec<T> {
        let mut z = self.biases.clone();
        for (j, zj) in z.iter_mut().enumerate() {
            let row = &self.weights[j * self.in_dim..(j + 1) * self.in_dim];
            let mut acc = T::zero();
            for (w, v) in row.iter().zip(x) {
                acc += *w * *v;
            }
            *zj += acc;
        }
        z
    }

    fn num_params(&self) -> usize {
        self.out_dim * self.in_dim + self.out_dim
    }
}

/// Feature-vector classifier: relu hidden layers, each optionally
/// followed by inverted dropout, and a softmax output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    layers: Vec<DenseLayer<T>>,
    dropout_rates: Vec<f64>,
    class_labels: Vec<String>,
}

impl<T: Scalar> MlpModel<T> {
    /// Builds a seeded Glorot-initialized model. `dims` runs from input
    /// width to class count; `dropout_rates` has one entry per hidden
    /// layer (the output layer never drops units).
    pub fn glorot(
        dims: &[usize],
        dropout_rates: &[f64],
        class_labels: Vec<String>,
        seed: u64,
    ) -> Result<Self, NnError> {
        if dims.len() < 2 {
            return Err(NnError::BadArchitecture(
                "need at least an input and an output dimension".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Softmax
                } else {
                    Activation::Relu
                };
                DenseLayer::glorot(w[0], w[1], act, &mut rng)
            })
            .collect();
        Self::from_parts(layers, dropout_rates.to_vec(), class_labels)
    }

    /// [`MlpModel::glorot`] with the same dropout rate after every hidden layer.
    pub fn with_uniform_dropout(
        input_dim: usize,
        hidden: &[usize],
        rate: f64,
        class_labels: Vec<String>,
        seed: u64,
    ) -> Result<Self, NnError> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(class_labels.len());
        Self::glorot(&dims, &vec![rate; hidden.len()], class_labels, seed)
    }

    /// Assembles a model from explicit layers, checking every invariant.
    pub fn from_parts(
        layers: Vec<DenseLayer<T>>,
        dropout_rates: Vec<f64>,
        class_labels: Vec<String>,
    ) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::BadArchitecture("no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(NnError::BadArchitecture(format!(
                    "layer output {} feeds layer input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(NnError::BadArchitecture("zero-width layer".into()));
            }
            if layer.weights.len() != layer.out_dim * layer.in_dim
                || layer.biases.len() != layer.out_dim
            {
                return Err(NnError::BadArchitecture("parameter count mismatch".into()));
            }
            let is_last = i == layers.len() - 1;
            let expected = if is_last {
                Activation::Softmax
            } else {
                Activation::Relu
            };
            if layer.activation != expected {
                return Err(NnError::BadArchitecture(format!(
                    "layer {i} must use {expected:?}"
                )));
            }
        }
        if dropout_rates.len() != layers.len() - 1 {
            return Err(NnError::BadArchitecture(format!(
                "{} dropout rates for {} hidden layers",
                dropout_rates.len(),
                layers.len() - 1
            )));
        }
        if dropout_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(NnError::BadArchitecture(
                "dropout rates must lie in [0, 1)".into(),
            ));
        }
        let out = layers.last().expect("nonempty").out_dim;
        if out < 2 {
            return Err(NnError::BadArchitecture(
                "a classifier needs at least two classes".into(),
            ));
        }
        if class_labels.len() != out {
            return Err(NnError::BadArchitecture(format!(
                "{} labels for {out} output classes",
                class_labels.len()
            )));
        }
        Ok(MlpModel {
            layers,
            dropout_rates,
            class_labels,
        })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn dropout_rates(&self) -> &[f64] {
        &self.dropout_rates
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Train-mode forward pass: dropout masks drawn from `rng`.
    pub fn forward_train(&self, x: &[T], rng: &mut ChaCha8Rng) -> Result<Vec<T>, NnError> {
        Ok(self.forward_cached(x, Some(rng))?.probs)
    }

    fn check_input(&self, x: &[T]) -> Result<(), NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn forward_cached(
        &self,
        x: &[T],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardCache<T>, NnError> {
        self.check_input(x)?;
        let count = self.layers.len();
        let mut activations: Vec<Vec<T>> = Vec::with_capacity(count + 1);
        activations.push(x.to_vec());
        let mut pre_activations: Vec<Vec<T>> = Vec::with_capacity(count);
        let mut masks: Vec<Option<Vec<T>>> = vec![None; count.saturating_sub(1)];
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(activations.last().expect("seeded above"));
            let mut a = match layer.activation {
                Activation::Relu => z.iter().map(|&v| v.max(T::zero())).collect::<Vec<T>>(),
                Activation::Softmax => softmax(&z),
            };
            pre_activations.push(z);
            if l + 1 < count {
                let rate = self.dropout_rates[l];
                if rate > 0.0 {
                    if let Some(rng) = rng.as_deref_mut() {
                        let mask = dropout_mask::<T>(rng, a.len(), rate);
                        for (v, m) in a.iter_mut().zip(&mask) {
                            *v *= *m;
                        }
                        masks[l] = Some(mask);
                    }
                }
            }
            activations.push(a);
        }
        let probs = activations.last().expect("nonempty").clone();
        Ok(ForwardCache {
            activations,
            pre_activations,
            masks,
            probs,
        })
    }

    fn param_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.num_params();
        }
        offsets
    }
}

struct ForwardCache<T> {
    activations: Vec<Vec<T>>,
    pre_activations: Vec<Vec<T>>,
    masks: Vec<Option<Vec<T>>>,
    probs: Vec<T>,
}

impl<T: Scalar> Network<T> for MlpModel<T> {
    type Input = [T];

    fn num_classes(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim
    }

    fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    fn flat_params(&self) -> Vec<T> {
        let mut flat = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.biases);
        }
        flat
    }

    fn set_flat_params(&mut self, params: &[T]) -> Result<(), NnError> {
        if params.len() != self.num_params() {
            return Err(NnError::ShapeMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut off = 0;
        for layer in &mut self.layers {
            let w = layer.out_dim * layer.in_dim;
            layer.weights.copy_from_slice(&params[off..off + w]);
            off += w;
            layer.biases.copy_from_slice(&params[off..off + layer.out_dim]);
            off += layer.out_dim;
        }
        Ok(())
    }

    fn forward_infer(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        self.check_input(x)?;
        let mut a: Vec<T> = x.to_vec();
        for layer in &self.layers {
            let z = layer.affine(&a);
            a = match layer.activation {
                Activation::Relu => z.into_iter().map(|v| v.max(T::zero())).collect(),
                Activation::Softmax => softmax(&z),
            };
        }
        Ok(a)
    }

    fn batch_backward(
        &self,
        batch: &[(&[T], usize)],
        rng: &mut ChaCha8Rng,
    ) -> Result<BatchGrad<T>, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let classes = self.num_classes();
        let offsets = self.param_offsets();
        let mut grads = vec![T::zero(); self.num_params()];
        let mut loss_sum = T::zero();
        let mut correct = 0;

        for &(x, label) in batch {
            if label >= classes {
                return Err(NnError::IndexOutOfRange {
                    index: label,
                    len: classes,
                });
            }
            let cache = self.forward_cached(x, Some(rng))?;
            loss_sum += cross_entropy(&cache.probs, label)?;
            if argmax(&cache.probs) == label {
                correct += 1;
            }

            let mut delta: Vec<T> = cache.probs.clone();
            delta[label] -= T::one();
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let a_in = &cache.activations[l];
                let base = offsets[l];
                let bias_base = base + layer.out_dim * layer.in_dim;
                for (j, &dj) in delta.iter().enumerate() {
                    let row = base + j * layer.in_dim;
                    for (i, &ai) in a_in.iter().enumerate() {
                        grads[row + i] += dj * ai;
                    }
                    grads[bias_base + j] += dj;
                }
                if l > 0 {
                    let mut prev = vec![T::zero(); layer.in_dim];
                    for (j, &dj) in delta.iter().enumerate() {
                        let row = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                        for (p, &w) in prev.iter_mut().zip(row) {
                            *p += w * dj;
                        }
                    }
                    if let Some(mask) = &cache.masks[l - 1] {
                        for (p, &m) in prev.iter_mut().zip(mask) {
                            *p *= m;
                        }
                    }
                    for (p, &z) in prev.iter_mut().zip(&cache.pre_activations[l - 1]) {
                        if z <= T::zero() {
                            *p = T::zero();
                        }
                    }
                    delta = prev;
                }
            }
        }

        let inv_b = T::one() / T::from_usize(batch.len());
        for g in &mut grads {
            *g *= inv_b;
        }
        Ok(BatchGrad {
            mean_loss: loss_sum * inv_b,
            correct,
            grads,
        })
    }
}
