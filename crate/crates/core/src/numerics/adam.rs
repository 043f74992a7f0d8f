use alloc::format;
use alloc::vec::Vec;

use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, p)| Tensor::zeros_like(&p.value))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Every parameter must have a gradient of its shape.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if store.len() != self.first.len() {
            return Err(Error::Consistency(format!(
                "optimizer tracks {} parameters, store has {}",
                self.first.len(),
                store.len()
            )));
        }
        for id in store.ids() {
            let grad = grads.get(id).ok_or_else(|| {
                Error::Consistency(format!(
                    "missing gradient for parameter '{}'",
                    store.name(id)
                ))
            })?;
            if grad.shape() != store.get(id).shape() {
                return Err(Error::dims(
                    "adam_step",
                    store.get(id).shape(),
                    grad.shape(),
                ));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as f64;
        let correction1 = 1.0 - libm::pow(beta1, t);
        let correction2 = 1.0 - libm::pow(beta2, t);

        for id in store.ids() {
            let grad = grads.get(id).expect("checked above").data();
            let m = self.first[id.index()].data_mut();
            let v = self.second[id.index()].data_mut();
            let p = store.get_mut(id).data_mut();
            for i in 0..p.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

/// One Adam update on `store` with a fresh or existing state.
pub fn adam_step(state: &mut AdamState, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
    state.step(store, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("p", Tensor::scalar(v));
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut store = scalar_store(0.7);
        let mut state = AdamState::new(AdamConfig::default(), &store);
        let grads = Gradients::new().complete(&store);
        state.step(&mut store, &grads).unwrap();
        assert_eq!(store.get(store.find("p").unwrap()).item(), 0.7);
    }

    #[test]
    fn single_step_closed_form() {
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + eps).
        let mut store = scalar_store(1.0);
        let cfg = AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(cfg, &store);
        let mut grads = Gradients::new();
        grads.insert(store.find("p").unwrap(), Tensor::scalar(1.0));
        state.step(&mut store, &grads).unwrap();
        let expected = 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((store.get(store.find("p").unwrap()).item() - expected).abs() < 1e-15);
        assert_eq!(state.steps(), 1);
    }

    #[test]
    fn identical_params_stay_identical() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::vector(alloc::vec![0.3, -0.2]));
        let b = store.add("b", Tensor::vector(alloc::vec![0.3, -0.2]));
        let mut state = AdamState::new(AdamConfig::default(), &store);
        for k in 0..5 {
            let g = Tensor::vector(alloc::vec![0.1 * k as f64, -0.5]);
            let mut grads = Gradients::new();
            grads.insert(a, g.clone());
            grads.insert(b, g);
            state.step(&mut store, &grads).unwrap();
        }
        assert_eq!(store.get(a), store.get(b));
    }

    #[test]
    fn missing_gradient_is_consistency_error() {
        let mut store = scalar_store(1.0);
        let mut state = AdamState::new(AdamConfig::default(), &store);
        let err = state.step(&mut store, &Gradients::new()).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
        assert_eq!(state.steps(), 0);
    }
}
