//! Adam optimizer state and update rule.

use crate::error::TensorError;
use crate::tensor::{Scalar, Tensor};

/// Per-parameter Adam state: moment estimates plus hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub first_moment: Tensor<F>,
    pub second_moment: Tensor<F>,
    pub step_count: u64,
    pub learning_rate: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Scalar> AdamState<F> {
    /// Fresh state for a parameter of the given shape, with the usual
    /// defaults beta1=0.9, beta2=0.999, epsilon=1e-8.
    pub fn new(shape: &[usize], learning_rate: F) -> Self {
        AdamState {
            first_moment: Tensor::zeros(shape),
            second_moment: Tensor::zeros(shape),
            step_count: 0,
            learning_rate,
            beta1: F::from_f64(0.9).unwrap(),
            beta2: F::from_f64(0.999).unwrap(),
            epsilon: F::from_f64(1e-8).unwrap(),
        }
    }

    /// One in-place Adam update with bias correction.
    pub fn apply(&mut self, param: &mut Tensor<F>, grad: &Tensor<F>) -> Result<(), TensorError> {
        if param.shape() != grad.shape() || param.shape() != self.first_moment.shape() {
            return Err(TensorError::Dimension(format!(
                "adam shapes disagree: param {:?}, grad {:?}, state {:?}",
                param.shape(),
                grad.shape(),
                self.first_moment.shape()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let one = F::one();
        let corr1 = one - self.beta1.powi(t);
        let corr2 = one - self.beta2.powi(t);
        let m = self.first_moment.data_mut();
        let v = self.second_moment.data_mut();
        let p = param.data_mut();
        let g = grad.data();
        for i in 0..p.len() {
            m[i] = self.beta1 * m[i] + (one - self.beta1) * g[i];
            v[i] = self.beta2 * v[i] + (one - self.beta2) * g[i] * g[i];
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            p[i] = p[i] - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Functional form of the update: returns the new parameter and state.
pub fn adam_step<F: Scalar>(
    param: &Tensor<F>,
    grad: &Tensor<F>,
    state: &AdamState<F>,
) -> Result<(Tensor<F>, AdamState<F>), TensorError> {
    let mut param = param.clone();
    let mut state = state.clone();
    state.apply(&mut param, grad)?;
    Ok((param, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let param = Tensor::from_data(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let grad = Tensor::<f64>::zeros(&[3]);
        let state = AdamState::new(&[3], 0.1);
        let (updated, new_state) = adam_step(&param, &grad, &state).unwrap();
        assert_eq!(updated, param);
        assert_eq!(new_state.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // With bias correction, step one reduces to lr * g / (|g| + eps).
        let param = Tensor::<f64>::from_data(&[1], vec![1.0]).unwrap();
        let grad = Tensor::from_data(&[1], vec![1.0]).unwrap();
        let state = AdamState::new(&[1], 0.1);
        let (updated, _) = adam_step(&param, &grad, &state).unwrap();
        assert!((updated.data()[0] - 0.9).abs() < 1e-7, "{:?}", updated);
    }

    #[test]
    fn update_is_deterministic() {
        let param = Tensor::from_data(&[2], vec![0.3, -0.4]).unwrap();
        let grad = Tensor::from_data(&[2], vec![0.01, -0.02]).unwrap();
        let state = AdamState::new(&[2], 0.01);
        let a = adam_step(&param, &grad, &state).unwrap();
        let b = adam_step(&param, &grad, &state).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.first_moment, b.1.first_moment);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let param = Tensor::<f64>::zeros(&[2]);
        let grad = Tensor::<f64>::zeros(&[3]);
        let state = AdamState::new(&[2], 0.01);
        assert!(adam_step(&param, &grad, &state).is_err());
    }

    #[test]
    fn step_count_increases_by_one_per_update() {
        let mut param = Tensor::<f64>::zeros(&[2]);
        let grad = Tensor::from_data(&[2], vec![0.1, 0.1]).unwrap();
        let mut state = AdamState::new(&[2], 0.01);
        for expected in 1..=5 {
            state.apply(&mut param, &grad).unwrap();
            assert_eq!(state.step_count, expected);
        }
    }
}
