//! Mini-batch training loop shared by both architectures.
//!
//! One seeded random stream drives epoch shuffles and dropout masks in
//! a fixed order, so a (seed, config, dataset) triple reproduces the
//! final parameters bitwise.

use std::borrow::Borrow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, argmax, AdamState, Network, NnError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl TrainConfig {
    /// Fills the optimizer constants with their defaults.
    pub fn new(epochs: usize, batch_size: usize, seed: u64, learning_rate: f64) -> Self {
        TrainConfig {
            epochs,
            batch_size,
            seed,
            learning_rate,
            beta1: super::DEFAULT_BETA1,
            beta2: super::DEFAULT_BETA2,
            epsilon: super::DEFAULT_EPSILON,
        }
    }
}

/// One epoch of history. Training figures come from the train-mode
/// passes (dropout active); validation accuracy from an inference pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub training_loss: f64,
    pub training_accuracy: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Fraction of the set whose argmax prediction hits the label.
pub fn infer_accuracy<T, N, I>(model: &N, set: &[(I, usize)]) -> Result<f64, NnError>
where
    T: Scalar,
    N: Network<T>,
    I: Borrow<N::Input>,
{
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (x, y) in set {
        if argmax(&model.forward_infer(x.borrow())?) == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

/// Trains in place over shuffled mini-batches with Adam, recording one
/// history row per epoch. The final partial batch is kept.
pub fn train<T, N, I>(
    model: &mut N,
    train_set: &[(I, usize)],
    val_set: &[(I, usize)],
    cfg: &TrainConfig,
) -> Result<TrainHistory, NnError>
where
    T: Scalar,
    N: Network<T>,
    I: Borrow<N::Input>,
{
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(NnError::BadArchitecture(
            "batch size must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(
        model.num_params(),
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.epsilon,
    );
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&N::Input, usize)> = chunk
                .iter()
                .map(|&i| {
                    let (x, y) = &train_set[i];
                    (x.borrow(), *y)
                })
                .collect();
            let out = model.batch_backward(&batch, &mut rng)?;
            let mut params = model.flat_params();
            adam_step(&mut params, &out.grads, &mut adam)?;
            model.set_flat_params(&params)?;
            loss_sum += out.mean_loss.to_f64() * chunk.len() as f64;
            correct += out.correct;
        }
        let n = train_set.len() as f64;
        history.push(EpochRecord {
            training_loss: loss_sum / n,
            training_accuracy: correct as f64 / n,
            validation_accuracy: infer_accuracy(model, val_set)?,
        });
    }
    Ok(TrainHistory { epochs: history })
}

#[cfg(test)]
mod tests {
    use super::super::MlpModel;
    use super::*;

    fn labels() -> Vec<String> {
        vec!["happiness".into(), "neutral".into()]
    }

    /// Two linearly separable blobs in two dimensions.
    fn blob_data(n_per_class: usize) -> Vec<(Vec<f64>, usize)> {
        let mut rows = Vec::new();
        for i in 0..n_per_class {
            let t = i as f64 / n_per_class as f64;
            rows.push((vec![0.2 + 0.1 * t, 0.8 - 0.1 * t], 0));
            rows.push((vec![0.8 - 0.1 * t, 0.2 + 0.1 * t], 1));
        }
        rows
    }

    #[test]
    fn history_length_equals_epochs() {
        let mut model = MlpModel::<f64>::glorot(&[2, 4, 2], &[0.0], labels(), 1).unwrap();
        let data = blob_data(8);
        let cfg = TrainConfig::new(3, 4, 9, 1e-3);
        let history = train(&mut model, &data, &data, &cfg).unwrap();
        assert_eq!(history.len(), 3);
    }

    #[test]
    fn same_seed_reproduces_weights_and_history_bitwise() {
        let base = MlpModel::<f32>::glorot(&[2, 6, 2], &[0.5], labels(), 2).unwrap();
        let data: Vec<(Vec<f32>, usize)> = blob_data(10)
            .into_iter()
            .map(|(v, y)| (v.into_iter().map(|x| x as f32).collect(), y))
            .collect();
        let cfg = TrainConfig::new(5, 4, 77, 1e-2);

        let mut a = base.clone();
        let ha = train(&mut a, &data, &data, &cfg).unwrap();
        let mut b = base.clone();
        let hb = train(&mut b, &data, &data, &cfg).unwrap();

        assert_eq!(a.flat_params(), b.flat_params());
        assert_eq!(ha, hb);
    }

    #[test]
    fn separable_blobs_are_learned() {
        let mut model = MlpModel::<f64>::glorot(&[2, 8, 2], &[0.0], labels(), 3).unwrap();
        let data = blob_data(16);
        let cfg = TrainConfig::new(60, 8, 4, 0.05);
        let history = train(&mut model, &data, &data, &cfg).unwrap();
        let last = history.last().unwrap();
        assert!(
            last.validation_accuracy >= 0.95,
            "accuracy {}",
            last.validation_accuracy
        );
        assert!(last.training_loss < history.epochs[0].training_loss);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let mut model = MlpModel::<f64>::glorot(&[2, 4, 2], &[0.0], labels(), 1).unwrap();
        let empty: Vec<(Vec<f64>, usize)> = Vec::new();
        let err = train(&mut model, &empty, &empty, &TrainConfig::new(1, 4, 0, 1e-3)).unwrap_err();
        assert!(matches!(err, NnError::EmptyDataset));
    }

    #[test]
    fn zero_batch_size_is_rejected() {
        let mut model = MlpModel::<f64>::glorot(&[2, 4, 2], &[0.0], labels(), 1).unwrap();
        let data = blob_data(4);
        let err = train(&mut model, &data, &data, &TrainConfig::new(1, 0, 0, 1e-3)).unwrap_err();
        assert!(matches!(err, NnError::BadArchitecture(_)));
    }
}
