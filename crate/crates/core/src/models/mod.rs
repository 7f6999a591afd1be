//! Embedding models mapping an `n x 5` normalized train to `n x d_embed`.
//!
//! * [`TransformerConfig`]: self-attention encoder without positional
//!   encodings, so it is equivariant to pulse permutations.
//! * [`GruConfig`]: stacked unidirectional GRU reading pulses in ToA order.
//! * [`ModelConfig::Identity`]: the normalized features themselves.
//!
//! Forward passes are generic over [`Scalar`] so the same code runs at 32
//! bits for training and at 64 bits for gradient checks.

mod checkpoint;
mod gru;
mod params;
mod transformer;

pub use checkpoint::{Checkpoint, CheckpointManifest, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gru::{gru_embed, GruConfig};
pub use params::{Bound, Init, ParamSpec, ParameterStore};
pub use transformer::{transformer_embed, AttentionMask, InputProjection, NormPlacement, TransformerConfig};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::numerics::{Scalar, Tape, Tensor, Var};
use crate::pdw::{NormalizedTrain, N_FEATURES};
use crate::{Error, Result};

/// Forward-pass mode. Dropout draws from the RNG only in training.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut dyn RngCore),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    pub(crate) fn dropout<'t, T: Scalar>(&mut self, x: Var<'t, T>, p: f64) -> Var<'t, T> {
        match self {
            Mode::Eval => x,
            Mode::Train(rng) => x.dropout(p, true, &mut **rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Transformer(TransformerConfig),
    Gru(GruConfig),
    Identity,
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Transformer(_) => "transformer",
            ModelConfig::Gru(_) => "gru",
            ModelConfig::Identity => "identity",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Transformer(c) => c.validate(),
            ModelConfig::Gru(c) => c.validate(),
            ModelConfig::Identity => Ok(()),
        }
    }

    pub fn d_embed(&self) -> usize {
        match self {
            ModelConfig::Transformer(c) => c.d_embed,
            ModelConfig::Gru(c) => c.d_embed,
            ModelConfig::Identity => N_FEATURES,
        }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        match self {
            ModelConfig::Transformer(c) => c.param_specs(),
            ModelConfig::Gru(c) => c.param_specs(),
            ModelConfig::Identity => Vec::new(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.param_specs().iter().map(ParamSpec::len).sum()
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self, ModelConfig::Identity)
    }

    /// Records the forward pass of `x` (shape `[n, 5]`, `n >= 1`) on `tape`.
    pub fn forward<'t, T: Scalar>(
        &self,
        params: &Bound<'t, T>,
        x: Var<'t, T>,
        mode: &mut Mode<'_>,
    ) -> Result<Var<'t, T>> {
        match self {
            ModelConfig::Transformer(c) => c.forward(params, x, mode),
            ModelConfig::Gru(c) => c.forward(params, x, mode),
            ModelConfig::Identity => Ok(x),
        }
    }

    /// Inference at 32 bits with dropout off.
    pub fn embed(&self, params: &ParameterStore<f32>, train: &NormalizedTrain) -> Result<EmbeddingSet> {
        if train.is_empty() {
            return Ok(EmbeddingSet::empty(self.d_embed()));
        }
        let x = input_tensor::<f32>(train)?;
        if let ModelConfig::Identity = self {
            return EmbeddingSet::from_tensor(&x);
        }
        let tape = Tape::new().with_finite_checks(false);
        let bound = params.bind(&tape, false);
        let out = self.forward(&bound, tape.constant(x), &mut Mode::Eval)?;
        let z = out.value();
        EmbeddingSet::from_tensor(&z)
    }
}

/// `[n, 5]` tensor of normalized features; errors on non-finite entries.
pub fn input_tensor<T: Scalar>(train: &NormalizedTrain) -> Result<Tensor<T>> {
    let flat = train.to_flat();
    if !flat.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("input features of {}", train.train_id)));
    }
    Tensor::from_f64([train.len(), N_FEATURES], &flat)
}

/// Fresh parameters for `config`, deterministic in `seed`.
pub fn init_params(config: &ModelConfig, seed: u64) -> ParameterStore<f32> {
    ParameterStore::init(&config.param_specs(), seed)
}

pub fn identity_embed(train: &NormalizedTrain) -> EmbeddingSet {
    EmbeddingSet::new(train.to_flat(), N_FEATURES).expect("normalized features are finite")
}

/// Row-major `n x dim` embeddings, one row per pulse in train order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    data: Vec<f64>,
    dim: usize,
}

impl EmbeddingSet {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::shape("embeddings", &[data.len()], &[dim]));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("embeddings".into()));
        }
        Ok(Self { data, dim })
    }

    pub fn empty(dim: usize) -> Self {
        Self { data: Vec::new(), dim }
    }

    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        if t.rank() != 2 {
            return Err(Error::shape("embeddings", t.shape(), &[2]));
        }
        Self::new(t.to_f64_vec(), t.cols())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn linear<'t, T: Scalar>(params: &Bound<'t, T>, x: Var<'t, T>, prefix: &str) -> Result<Var<'t, T>> {
    x.matmul(params.get(&format!("{prefix}.w"))?)?
        .add(params.get(&format!("{prefix}.b"))?)
}

pub(crate) fn linear_specs(prefix: &str, d_in: usize, d_out: usize) -> [ParamSpec; 2] {
    [
        ParamSpec::new(format!("{prefix}.w"), [d_in, d_out], Init::FanInUniform),
        ParamSpec::new(format!("{prefix}.b"), [d_out], Init::Zeros),
    ]
}
