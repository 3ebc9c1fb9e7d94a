//! Convolutional classifier over binary landmark grids.
//!
//! Fixed stage order: valid convolution (stride 1) with relu, 2x2 max
//! pooling (stride 2, floor), inverted dropout, flatten, dense softmax.
//! Tensors are stored filter-major: index `f*n*n + i*n + j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    argmax, cross_entropy, dropout_mask, softmax, Activation, BatchGrad, DenseLayer, Network,
    NnError,
};
use crate::features::LandmarkGrid;
use crate::scalar::Scalar;

/// Derived stage dimensions for a square grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnShape {
    pub grid: usize,
    pub kernel: usize,
    pub filters: usize,
    /// Convolution output side: grid - kernel + 1.
    pub conv: usize,
    /// Pooling output side: floor(conv / 2).
    pub pooled: usize,
    /// Dense input width: filters * pooled^2.
    pub flat: usize,
}

impl CnnShape {
    pub fn for_grid(grid: usize, kernel: usize, filters: usize) -> Result<Self, NnError> {
        if kernel == 0 || filters == 0 {
            return Err(NnError::BadArchitecture(
                "kernel and filter count must be positive".into(),
            ));
        }
        if grid < kernel + 1 {
            return Err(NnError::BadArchitecture(format!(
                "grid {grid} too small for kernel {kernel} plus pooling"
            )));
        }
        let conv = grid - kernel + 1;
        let pooled = conv / 2;
        Ok(CnnShape {
            grid,
            kernel,
            filters,
            conv,
            pooled,
            flat: filters * pooled * pooled,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T> {
    shape: CnnShape,
    /// Kernels, filter-major then row-major: `f*k*k + ki*k + kj`.
    conv_weights: Vec<T>,
    conv_biases: Vec<T>,
    dense: DenseLayer<T>,
    dropout_rate: f64,
    class_labels: Vec<String>,
}

impl<T: Scalar> CnnModel<T> {
    /// Seeded Glorot init: kernels first, then the dense head, from one
    /// random stream.
    pub fn glorot(
        grid_size: usize,
        filters: usize,
        kernel: usize,
        dropout_rate: f64,
        class_labels: Vec<String>,
        seed: u64,
    ) -> Result<Self, NnError> {
        let shape = CnnShape::for_grid(grid_size, kernel, filters)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan_in = kernel * kernel;
        let fan_out = kernel * kernel * filters;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let conv_weights = (0..filters * kernel * kernel)
            .map(|_| T::from_f64(rng.random_range(-limit..limit)))
            .collect();
        let dense = DenseLayer::glorot(shape.flat, class_labels.len(), Activation::Softmax, &mut rng);
        Self::from_parts(
            shape,
            conv_weights,
            vec![T::zero(); filters],
            dense,
            dropout_rate,
            class_labels,
        )
    }

    pub fn from_parts(
        shape: CnnShape,
        conv_weights: Vec<T>,
        conv_biases: Vec<T>,
        dense: DenseLayer<T>,
        dropout_rate: f64,
        class_labels: Vec<String>,
    ) -> Result<Self, NnError> {
        if conv_weights.len() != shape.filters * shape.kernel * shape.kernel
            || conv_biases.len() != shape.filters
        {
            return Err(NnError::BadArchitecture(
                "convolution parameter count mismatch".into(),
            ));
        }
        if dense.in_dim != shape.flat {
            return Err(NnError::BadArchitecture(format!(
                "dense input {} does not match flattened width {}",
                dense.in_dim, shape.flat
            )));
        }
        if dense.activation != Activation::Softmax {
            return Err(NnError::BadArchitecture(
                "the dense head must use Softmax".into(),
            ));
        }
        if dense.weights.len() != dense.out_dim * dense.in_dim
            || dense.biases.len() != dense.out_dim
        {
            return Err(NnError::BadArchitecture("parameter count mismatch".into()));
        }
        if dense.out_dim < 2 {
            return Err(NnError::BadArchitecture(
                "a classifier needs at least two classes".into(),
            ));
        }
        if class_labels.len() != dense.out_dim {
            return Err(NnError::BadArchitecture(format!(
                "{} labels for {} output classes",
                class_labels.len(),
                dense.out_dim
            )));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(NnError::BadArchitecture(
                "dropout rate must lie in [0, 1)".into(),
            ));
        }
        Ok(CnnModel {
            shape,
            conv_weights,
            conv_biases,
            dense,
            dropout_rate,
            class_labels,
        })
    }

    pub fn shape(&self) -> CnnShape {
        self.shape
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn dense(&self) -> &DenseLayer<T> {
        &self.dense
    }

    pub fn conv_weights(&self) -> &[T] {
        &self.conv_weights
    }

    pub fn conv_biases(&self) -> &[T] {
        &self.conv_biases
    }

    /// Train-mode forward pass: the dropout mask is drawn from `rng`.
    pub fn forward_train(&self, g: &LandmarkGrid, rng: &mut ChaCha8Rng) -> Result<Vec<T>, NnError> {
        Ok(self.forward_cached(g, Some(rng))?.probs)
    }

    fn check_input(&self, g: &LandmarkGrid) -> Result<(), NnError> {
        if g.size() != self.shape.grid {
            return Err(NnError::DimensionMismatch {
                expected: self.shape.grid,
                got: g.size(),
            });
        }
        Ok(())
    }

    fn forward_cached(
        &self,
        g: &LandmarkGrid,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<CnnCache<T>, NnError> {
        self.check_input(g)?;
        let CnnShape {
            grid,
            kernel,
            filters,
            conv,
            pooled,
            flat,
        } = self.shape;
        let input: Vec<T> = g
            .cells()
            .iter()
            .map(|&c| T::from_usize(c as usize))
            .collect();

        let mut conv_pre = vec![T::zero(); filters * conv * conv];
        for f in 0..filters {
            let w = &self.conv_weights[f * kernel * kernel..(f + 1) * kernel * kernel];
            let b = self.conv_biases[f];
            for i in 0..conv {
                for j in 0..conv {
                    let mut acc = b;
                    for ki in 0..kernel {
                        let row = &input[(i + ki) * grid + j..(i + ki) * grid + j + kernel];
                        let wk = &w[ki * kernel..(ki + 1) * kernel];
                        for (x, wv) in row.iter().zip(wk) {
                            acc += *wv * *x;
                        }
                    }
                    conv_pre[(f * conv + i) * conv + j] = acc;
                }
            }
        }

        // Max pooling over disjoint 2x2 windows; ties keep the first cell
        // in scan order. An odd trailing row/column is dropped.
        let mut pooled_vals = vec![T::zero(); flat];
        let mut pool_src = vec![0usize; flat];
        for f in 0..filters {
            for pi in 0..pooled {
                for pj in 0..pooled {
                    let mut best_idx = (f * conv + 2 * pi) * conv + 2 * pj;
                    let mut best = conv_pre[best_idx];
                    for di in 0..2 {
                        for dj in 0..2 {
                            let idx = (f * conv + 2 * pi + di) * conv + 2 * pj + dj;
                            if conv_pre[idx] > best {
                                best = conv_pre[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let out = (f * pooled + pi) * pooled + pj;
                    pooled_vals[out] = best.max(T::zero());
                    pool_src[out] = best_idx;
                }
            }
        }

        let mask = match rng {
            Some(rng) if self.dropout_rate > 0.0 => {
                let mask = dropout_mask::<T>(rng, flat, self.dropout_rate);
                for (v, m) in pooled_vals.iter_mut().zip(&mask) {
                    *v *= *m;
                }
                Some(mask)
            }
            _ => None,
        };

        let logits = self.dense.weights.chunks_exact(flat).zip(&self.dense.biases);
        let mut z = Vec::with_capacity(self.dense.out_dim);
        for (row, &b) in logits {
            let mut acc = b;
            for (w, v) in row.iter().zip(&pooled_vals) {
                acc += *w * *v;
            }
            z.push(acc);
        }
        let probs = softmax(&z);
        Ok(CnnCache {
            input,
            conv_pre,
            pooled_vals,
            pool_src,
            mask,
            probs,
        })
    }

    fn param_layout(&self) -> (usize, usize, usize) {
        let conv_w = self.conv_weights.len();
        let conv_b = conv_w + self.conv_biases.len();
        let dense_w = conv_b + self.dense.weights.len();
        (conv_w, conv_b, dense_w)
    }
}

struct CnnCache<T> {
    input: Vec<T>,
    conv_pre: Vec<T>,
    /// Post-pool activations with dropout applied; the dense input.
    pooled_vals: Vec<T>,
    /// Winning conv index for each pooled cell.
    pool_src: Vec<usize>,
    mask: Option<Vec<T>>,
    probs: Vec<T>,
}

impl<T: Scalar> Network<T> for CnnModel<T> {
    type Input = LandmarkGrid;

    fn num_classes(&self) -> usize {
        self.dense.out_dim
    }

    fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    fn num_params(&self) -> usize {
        self.conv_weights.len() + self.conv_biases.len() + self.dense.weights.len()
            + self.dense.biases.len()
    }

    fn flat_params(&self) -> Vec<T> {
        let mut flat = Vec::with_capacity(self.num_params());
        flat.extend_from_slice(&self.conv_weights);
        flat.extend_from_slice(&self.conv_biases);
        flat.extend_from_slice(&self.dense.weights);
        flat.extend_from_slice(&self.dense.biases);
        flat
    }

    fn set_flat_params(&mut self, params: &[T]) -> Result<(), NnError> {
        if params.len() != self.num_params() {
            return Err(NnError::ShapeMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let (conv_w, conv_b, dense_w) = self.param_layout();
        self.conv_weights.copy_from_slice(&params[..conv_w]);
        self.conv_biases.copy_from_slice(&params[conv_w..conv_b]);
        self.dense.weights.copy_from_slice(&params[conv_b..dense_w]);
        self.dense.biases.copy_from_slice(&params[dense_w..]);
        Ok(())
    }

    fn forward_infer(&self, g: &LandmarkGrid) -> Result<Vec<T>, NnError> {
        Ok(self.forward_cached(g, None)?.probs)
    }

    fn batch_backward(
        &self,
        batch: &[(&LandmarkGrid, usize)],
        rng: &mut ChaCha8Rng,
    ) -> Result<BatchGrad<T>, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let classes = self.num_classes();
        let CnnShape {
            grid,
            kernel,
            filters,
            conv,
            flat,
            ..
        } = self.shape;
        let (conv_w_end, conv_b_end, dense_w_end) = self.param_layout();
        let mut grads = vec![T::zero(); self.num_params()];
        let mut loss_sum = T::zero();
        let mut correct = 0;

        for &(g, label) in batch {
            if label >= classes {
                return Err(NnError::IndexOutOfRange {
                    index: label,
                    len: classes,
                });
            }
            let cache = self.forward_cached(g, Some(rng))?;
            loss_sum += cross_entropy(&cache.probs, label)?;
            if argmax(&cache.probs) == label {
                correct += 1;
            }

            let mut delta: Vec<T> = cache.probs.clone();
            delta[label] -= T::one();

            // Dense head.
            let mut d_flat = vec![T::zero(); flat];
            for (j, &dj) in delta.iter().enumerate() {
                let row_off = conv_b_end + j * flat;
                let w_row = &self.dense.weights[j * flat..(j + 1) * flat];
                for i in 0..flat {
                    grads[row_off + i] += dj * cache.pooled_vals[i];
                    d_flat[i] += w_row[i] * dj;
                }
                grads[dense_w_end + j] += dj;
            }

            // Dropout, then route through the pooling winners and relu.
            if let Some(mask) = &cache.mask {
                for (d, &m) in d_flat.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            let mut d_conv = vec![T::zero(); filters * conv * conv];
            for (cell, &src) in cache.pool_src.iter().enumerate() {
                if cache.conv_pre[src] > T::zero() {
                    d_conv[src] += d_flat[cell];
                }
            }

            // Kernel and bias gradients.
            for f in 0..filters {
                let mut db = T::zero();
                for i in 0..conv {
                    for j in 0..conv {
                        let d = d_conv[(f * conv + i) * conv + j];
                        if d == T::zero() {
                            continue;
                        }
                        db += d;
                        let base = f * kernel * kernel;
                        for ki in 0..kernel {
                            for kj in 0..kernel {
                                grads[base + ki * kernel + kj] +=
                                    d * cache.input[(i + ki) * grid + j + kj];
                            }
                        }
                    }
                }
                grads[conv_w_end + f] += db;
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
