//! Adam optimizer over flat parameter buffers.

use super::NnError;
use crate::scalar::Scalar;

/// Moment buffers and hyperparameters; one state drives one model.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(
        num_params: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        AdamState {
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            t: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn with_defaults(num_params: usize) -> Self {
        Self::new(
            num_params,
            super::DEFAULT_LEARNING_RATE,
            super::DEFAULT_BETA1,
            super::DEFAULT_BETA2,
            super::DEFAULT_EPSILON,
        )
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update:
/// m ← β₁m + (1−β₁)g, v ← β₂v + (1−β₂)g², then
/// θ ← θ − lr · (m/(1−β₁ᵗ)) / (sqrt(v/(1−β₂ᵗ)) + ε).
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
) -> Result<(), NnError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NnError::ShapeMismatch {
            expected: state.m.len(),
            got: if grads.len() != params.len() {
                grads.len()
            } else {
                params.len()
            },
        });
    }
    state.t += 1;
    let b1 = T::from_f64(state.beta1);
    let b2 = T::from_f64(state.beta2);
    let one_minus_b1 = T::from_f64(1.0 - state.beta1);
    let one_minus_b2 = T::from_f64(1.0 - state.beta2);
    // Correction factors in f64 keeps them accurate at large t.
    let c1 = T::from_f64(1.0 - state.beta1.powi(state.t as i32));
    let c2 = T::from_f64(1.0 - state.beta2.powi(state.t as i32));
    let lr = T::from_f64(state.learning_rate);
    let eps = T::from_f64(state.epsilon);

    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + one_minus_b1 * g;
        state.v[i] = b2 * state.v[i] + one_minus_b2 * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
