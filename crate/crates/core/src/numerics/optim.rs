use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

fn check_grads(store: &ParamStore) -> Result<()> {
    for p in store.iter() {
        if !p.grad.is_finite() {
            return Err(Error::NonFinite(format!("gradient of {}", p.name)));
        }
    }
    Ok(())
}

/// Bias-corrected Adam update. Refuses to touch anything if a gradient is
/// non-finite, and fails if the update itself produced a non-finite value.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    check_grads(store)?;
    if state.m.len() != store.len() {
        return Err(Error::Numerics("Adam state does not match parameter store".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (k, p) in store.iter_mut().enumerate() {
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        let g = p.grad.data();
        for (j, w) in p.value.data_mut().iter_mut().enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    store.check_finite()
}

pub fn sgd_step(store: &mut ParamStore, lr: f64) -> Result<()> {
    check_grads(store)?;
    for p in store.iter_mut() {
        let g = p.grad.data().to_vec();
        for (w, gi) in p.value.data_mut().iter_mut().zip(g) {
            *w -= lr * gi;
        }
    }
    store.check_finite()
}

/// Rescales every gradient by `max_norm / norm` when the global L2 norm exceeds
/// `max_norm`. Returns the norm measured before clipping.
pub fn clip_global_norm(stores: &mut [&mut ParamStore], max_norm: f64) -> f64 {
    let norm = stores
        .iter()
        .map(|s| s.grad_norm().powi(2))
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for s in stores.iter_mut() {
            s.scale_grads(factor);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64, grad: f64) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(vec![value])).unwrap();
        s.get_mut(id).grad.data_mut()[0] = grad;
        s
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut s = single(0.0, 1.0);
        let mut st = AdamState::new(&s);
        adam_step(&mut s, &mut st, &AdamConfig::default()).unwrap();
        let w = s.iter().next().unwrap().value.data()[0];
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        assert!((w + 0.001 / (1.0 + 1e-8)).abs() < 1e-15, "{w}");
        assert!((w + 0.001).abs() < 1e-10);
    }

    #[test]
    fn zero_grads_do_not_move() {
        let mut s = single(0.7, 0.0);
        let mut st = AdamState::new(&s);
        adam_step(&mut s, &mut st, &AdamConfig::default()).unwrap();
        sgd_step(&mut s, 0.1).unwrap();
        assert_eq!(s.iter().next().unwrap().value.data()[0], 0.7);
    }

    #[test]
    fn nan_grads_refused_before_update() {
        let mut s = single(0.7, f64::NAN);
        let mut st = AdamState::new(&s);
        assert!(adam_step(&mut s, &mut st, &AdamConfig::default()).is_err());
        assert!(sgd_step(&mut s, 0.1).is_err());
        assert_eq!(s.iter().next().unwrap().value.data()[0], 0.7);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn clip_halves_norm_ten() {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(vec![0.0, 0.0])).unwrap();
        s.get_mut(id).grad.data_mut().copy_from_slice(&[6.0, 8.0]);
        let before = clip_global_norm(&mut [&mut s], 5.0);
        assert_eq!(before, 10.0);
        assert_eq!(s.grad(id).data(), &[3.0, 4.0]);
    }

    #[test]
    fn clip_is_idempotent() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::vector(vec![0.0; 3])).unwrap();
        s.get_mut(a).grad.data_mut().copy_from_slice(&[3.0, -7.0, 11.0]);
        clip_global_norm(&mut [&mut s], 2.0);
        let once = s.flat_grads();
        clip_global_norm(&mut [&mut s], 2.0);
        let twice = s.flat_grads();
        for (x, y) in once.iter().zip(&twice) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut s = single(1.0, 2.0);
        sgd_step(&mut s, 0.01).unwrap();
        assert!((s.iter().next().unwrap().value.data()[0] - 0.98).abs() < 1e-15);
    }
}
