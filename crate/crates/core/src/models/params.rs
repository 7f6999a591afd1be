use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::{Gradients, Scalar, Tape, Tensor, Var};
use crate::{Error, Result};

/// How a parameter tensor is initialised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// `U(-sqrt(3/fan_in), sqrt(3/fan_in))`, unit variance per output for
    /// unit-variance inputs; fan-in is the first dimension.
    FanInUniform,
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: impl Into<Vec<usize>>, init: Init) -> Self {
        Self {
            name: name.into(),
            shape: shape.into(),
            init,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named parameter tensors in name order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterStore<T> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for ParameterStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }

    /// Draws every spec in order from one seeded stream.
    pub fn init(specs: &[ParamSpec], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = Self::new();
        for spec in specs {
            let data = match spec.init {
                Init::Zeros => vec![T::zero(); spec.len()],
                Init::Ones => vec![T::one(); spec.len()],
                Init::FanInUniform => {
                    let bound = (3.0 / spec.shape[0].max(1) as f64).sqrt();
                    (0..spec.len()).map(|_| T::of(rng.gen_range(-bound..bound))).collect()
                }
            };
            let tensor = Tensor::new(spec.shape.clone(), data).expect("spec shape matches data");
            store.insert(spec.name.clone(), tensor).expect("spec names are unique");
        }
        store
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::Validation(format!("duplicate parameter {name}")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Validation(format!("unknown parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Validation(format!("unknown parameter {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalars.
    pub fn n_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParameterStore<U> {
        ParameterStore {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    /// Errors unless names and shapes match `specs` exactly.
    pub fn check(&self, specs: &[ParamSpec]) -> Result<()> {
        for spec in specs {
            let t = self
                .tensors
                .get(&spec.name)
                .ok_or_else(|| Error::Validation(format!("missing parameter {}", spec.name)))?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::shape("parameter", t.shape(), &spec.shape));
            }
        }
        if let Some(extra) = self.tensors.keys().find(|k| !specs.iter().any(|s| &s.name == *k)) {
            return Err(Error::Validation(format!("unknown parameter {extra}")));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    /// Places every tensor on `tape`, as trainable leaves or as constants.
    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> Bound<'t, T> {
        let vars = self
            .tensors
            .iter()
            .map(|(k, v)| {
                let var = if trainable {
                    tape.param(v.clone())
                } else {
                    tape.constant(v.clone())
                };
                (k.clone(), var)
            })
            .collect();
        Bound { vars }
    }
}

/// Parameters living on one tape.
pub struct Bound<'t, T: Scalar> {
    vars: HashMap<String, Var<'t, T>>,
}

impl<'t, T: Scalar> Bound<'t, T> {
    /// Binds existing tape variables by name.
    pub fn from_vars(vars: impl IntoIterator<Item = (String, Var<'t, T>)>) -> Self {
        Self {
            vars: vars.into_iter().collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<Var<'t, T>> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Validation(format!("unknown parameter {name}")))
    }

    /// Gradient of every bound parameter, zero where none flowed.
    pub fn gradients(&self, grads: &Gradients<T>) -> ParameterStore<T> {
        ParameterStore {
            tensors: self.vars.iter().map(|(k, v)| (k.clone(), grads.wrt(*v))).collect(),
        }
    }
}
