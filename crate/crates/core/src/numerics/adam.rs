//! Adam update rule with bias correction.

use super::real::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState<R: Real = f64> {
    learning_rate: R,
    beta1: R,
    beta2: R,
    epsilon: R,
    step_count: u64,
    first_moment: BTreeMap<String, Tensor<R>>,
    second_moment: BTreeMap<String, Tensor<R>>,
}

impl<R: Real> AdamState<R> {
    pub fn new(learning_rate: R) -> Self {
        AdamState {
            learning_rate,
            beta1: R::cast(0.9),
            beta2: R::cast(0.999),
            epsilon: R::cast(1e-8),
            step_count: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn set_learning_rate(&mut self, lr: R) {
        self.learning_rate = lr;
    }

    /// One Adam step over named parameters. Moments are zero-initialized on
    /// first sight of a parameter; a missing gradient means zero gradient.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = (String, &'a mut Tensor<R>)>,
        grads: &BTreeMap<String, Tensor<R>>,
    ) -> Result<()> {
        self.step_count += 1;
        let t = self.step_count;
        let bc1 = R::one() - self.beta1.powi(t as i32);
        let bc2 = R::one() - self.beta2.powi(t as i32);
        for (name, value) in params {
            let grad = match grads.get(&name) {
                Some(g) => {
                    if !g.same_shape(value) {
                        return Err(Error::Contract(format!(
                            "gradient shape {:?} does not match parameter `{name}` shape {:?}",
                            g.shape(),
                            value.shape()
                        )));
                    }
                    g.clone()
                }
                None => Tensor::zeros(value.shape().to_vec()),
            };
            let m = self
                .first_moment
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(value.shape().to_vec()));
            let v = self
                .second_moment
                .entry(name)
                .or_insert_with(|| Tensor::zeros(value.shape().to_vec()));
            let b1 = self.beta1;
            let b2 = self.beta2;
            for i in 0..grad.len() {
                let g = grad.data()[i];
                let mi = b1 * m.data()[i] + (R::one() - b1) * g;
                let vi = b2 * v.data()[i] + (R::one() - b2) * g * g;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                value.data_mut()[i] =
                    value.data()[i] - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f64) -> (BTreeMap<String, Tensor>, Tensor) {
        (BTreeMap::new(), Tensor::scalar(v))
    }

    #[test]
    fn zero_gradient_is_noop() {
        let (mut grads, mut p) = one_param(1.5);
        grads.insert("p".into(), Tensor::scalar(0.0));
        let mut adam = AdamState::new(0.001);
        for _ in 0..5 {
            adam.step([("p".to_string(), &mut p)], &grads).unwrap();
        }
        assert_eq!(p.item(), 1.5);
        assert_eq!(adam.first_moment["p"].item(), 0.0);
        assert_eq!(adam.second_moment["p"].item(), 0.0);
    }

    #[test]
    fn first_step_magnitude() {
        // With g = 1 the bias-corrected first step is −lr·g/(√(g²)+ε) ≈ −lr.
        let (mut grads, mut p) = one_param(0.0);
        grads.insert("p".into(), Tensor::scalar(1.0));
        let mut adam = AdamState::new(0.001);
        adam.step([("p".to_string(), &mut p)], &grads).unwrap();
        assert!((p.item() + 0.001).abs() < 1e-9, "got {}", p.item());
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn repeated_identical_gradients_shrink_updates() {
        let (mut grads, mut p) = one_param(0.0);
        grads.insert("p".into(), Tensor::scalar(0.7));
        let mut adam = AdamState::new(0.001);
        adam.step([("p".to_string(), &mut p)], &grads).unwrap();
        let first = p.item().abs();
        let before = p.item();
        adam.step([("p".to_string(), &mut p)], &grads).unwrap();
        let second = (p.item() - before).abs();
        assert!(second <= first + 1e-12, "second={second} first={first}");
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut grads = BTreeMap::new();
        grads.insert("p".into(), Tensor::vector(vec![1.0, 2.0]).unwrap());
        let mut p = Tensor::scalar(0.0);
        let mut adam = AdamState::new(0.001);
        assert!(adam.step([("p".to_string(), &mut p)], &grads).is_err());
    }
}
