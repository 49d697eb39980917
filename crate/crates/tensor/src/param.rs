use std::collections::HashMap;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, TensorError};
use crate::rng::Rng;
use crate::tensor::{numel_of, Tensor};

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// A named tensor owned by a model. Trainable entries require grad;
/// the rest are state buffers such as batch-norm running statistics.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Ordered, uniquely-named collection of parameters and buffers.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Parameter>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: &str,
        data: Vec<f32>,
        shape: &[usize],
        trainable: bool,
    ) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(TensorError::config(
                "param",
                format!("duplicate parameter name {name}"),
            ));
        }
        let tensor = if trainable {
            Tensor::param(data, shape)?
        } else {
            Tensor::new(data, shape)?
        };
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(Parameter {
            name: name.to_string(),
            tensor,
            trainable,
        });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn entry(&self, id: ParamId) -> &Parameter {
        &self.entries[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id_of(name).map(|id| self.get(id))
    }

    /// Replaces the values of an entry, keeping its shape and trainability.
    /// The new tensor starts with no gradient.
    pub fn set_data(&mut self, id: ParamId, data: Vec<f32>) -> Result<()> {
        let p = &mut self.entries[id.0];
        let shape = p.tensor.shape().to_vec();
        p.tensor = if p.trainable {
            Tensor::param(data, &shape)?
        } else {
            Tensor::new(data, &shape)?
        };
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|p| p.name.clone()).collect()
    }

    /// Scalar count over trainable entries.
    pub fn num_trainable(&self) -> usize {
        self.entries
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.tensor.numel())
            .sum()
    }

    pub fn zero_grad(&self) {
        self.entries.iter().for_each(|p| p.tensor.zero_grad());
    }
}

/// Creates parameters under a dotted name prefix with reproducible init.
pub struct Init<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut Rng,
    prefix: String,
}

impl<'a> Init<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut Rng) -> Self {
        Init {
            store,
            rng,
            prefix: String::new(),
        }
    }

    /// Child scope `prefix.name`.
    pub fn sub(&mut self, name: impl std::fmt::Display) -> Init<'_> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        };
        Init {
            store: self.store,
            rng: self.rng,
            prefix,
        }
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        }
    }

    pub fn with_data(&mut self, name: &str, data: Vec<f32>, shape: &[usize]) -> Result<ParamId> {
        let full = self.full_name(name);
        self.store.insert(&full, data, shape, true)
    }

    /// Uniform in `±1/√fan_in`.
    pub fn uniform_fan_in(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
    ) -> Result<ParamId> {
        let bound = 1.0 / (fan_in as f32).sqrt();
        let data = (0..numel_of(shape))
            .map(|_| self.rng.random_range(-bound..bound))
            .collect();
        self.with_data(name, data, shape)
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], std: f32) -> Result<ParamId> {
        let dist =
            Normal::new(0.0f32, std).map_err(|e| TensorError::config("init", e.to_string()))?;
        let data = (0..numel_of(shape))
            .map(|_| dist.sample(self.rng))
            .collect();
        self.with_data(name, data, shape)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f32) -> Result<ParamId> {
        self.with_data(name, vec![value; numel_of(shape)], shape)
    }

    /// Non-trainable state tensor.
    pub fn buffer(&mut self, name: &str, shape: &[usize], value: f32) -> Result<ParamId> {
        let full = self.full_name(name);
        self.store
            .insert(&full, vec![value; numel_of(shape)], shape, false)
    }
}
