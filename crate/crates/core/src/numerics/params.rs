use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_STORE: AtomicU64 = AtomicU64::new(1);

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named, ordered parameter collection for one model.
///
/// Every store carries a process-unique tag so a graph mixing parameters from
/// two stores (policy and baseline, say) routes gradients to the right one.
#[derive(Clone, Debug)]
pub struct ParamStore {
    tag: u64,
    params: Vec<Parameter>,
    index: HashMap<String, usize>,
}

impl Default for ParamStore {
    fn default() -> Self {
        ParamStore::new()
    }
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            tag: NEXT_STORE.fetch_add(1, Ordering::Relaxed),
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub(crate) fn tag(&self) -> u64 {
        self.tag
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Numerics(format!("duplicate parameter name {name:?}")));
        }
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter { name, value, grad });
        Ok(ParamId(id))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params.iter().map(|p| p.grad.sum_squares()).sum::<f64>().sqrt()
    }

    /// Flattened gradient in parameter order.
    pub fn flat_grads(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.grad.data().iter().copied())
            .collect()
    }

    /// Copies values (not gradients) from a store with the same layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::Numerics("parameter layouts differ".into()));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(Error::shape("copy_values_from", dst.value.shape(), src.value.shape()));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for p in &self.params {
            if !p.value.is_finite() {
                return Err(Error::NonFinite(format!("parameter {}", p.name)));
            }
        }
        Ok(())
    }
}

/// I.i.d. samples from U[-1/sqrt(c), 1/sqrt(c)], `c` being the column count of
/// the weight matrix being initialized.
pub fn init_uniform(shape: &[usize], columns: usize, rng: &mut impl Rng) -> Tensor {
    let bound = 1.0 / (columns.max(1) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = init_uniform(&[16, 4], 4, &mut rng);
        assert!(t.data().iter().all(|x| x.abs() <= 0.5));
    }

    #[test]
    fn init_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let t = init_uniform(&[n], 9, &mut rng);
        let mean = t.data().iter().sum::<f64>() / n as f64;
        // U[-b, b] has variance b^2/3.
        let se = (1.0f64 / 9.0 / 3.0).sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn init_is_seeded() {
        let a = init_uniform(&[5, 5], 5, &mut ChaCha8Rng::seed_from_u64(7));
        let b = init_uniform(&[5, 5], 5, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(&[2])).unwrap();
        assert!(s.add("w", Tensor::zeros(&[2])).is_err());
    }
}
