use serde::{Deserialize, Serialize};

use super::EmbeddingSet;
use super::{linear, linear_specs, Bound, Init, Mode, ModelConfig, ParamSpec, ParameterStore};
use crate::numerics::{Scalar, Tensor, Var};
use crate::pdw::{NormalizedTrain, N_FEATURES};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormPlacement {
    /// `x + f(norm(x))`, with a final norm before the output projection.
    Pre,
    /// `norm(x + f(x))`.
    Post,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMask {
    /// Every pulse attends to every pulse.
    None,
    /// Pulse `i` attends to pulses `0..=i` only. Breaks permutation
    /// equivariance.
    Causal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputProjection {
    /// Learned affine map from 5 features to `d_model`.
    Linear,
    /// Features copied into the first 5 residual dimensions, rest zero.
    ZeroPad,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub d_embed: usize,
    pub dropout: f64,
    #[serde(default = "pre")]
    pub norm_placement: NormPlacement,
    #[serde(default = "no_mask")]
    pub attention_mask: AttentionMask,
    #[serde(default = "linear_input")]
    pub input_projection: InputProjection,
    /// Scales each output row to unit length.
    #[serde(default)]
    pub l2_normalize: bool,
    #[serde(default = "ln_eps")]
    pub layer_norm_eps: f64,
}

fn pre() -> NormPlacement {
    NormPlacement::Pre
}
fn no_mask() -> AttentionMask {
    AttentionMask::None
}
fn linear_input() -> InputProjection {
    InputProjection::Linear
}
fn ln_eps() -> f64 {
    1e-5
}

impl TransformerConfig {
    pub fn paper() -> Self {
        Self {
            n_layers: 8,
            n_heads: 8,
            d_model: 256,
            d_ff: 2048,
            d_embed: 8,
            dropout: 0.05,
            norm_placement: NormPlacement::Pre,
            attention_mask: AttentionMask::None,
            input_projection: InputProjection::Linear,
            l2_normalize: false,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn desk() -> Self {
        Self {
            n_layers: 2,
            n_heads: 2,
            d_model: 32,
            d_ff: 64,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("transformer: {m}")));
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.d_embed == 0 || self.d_ff == 0 {
            return bad("d_embed and d_ff must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.input_projection == InputProjection::ZeroPad && self.d_model < N_FEATURES {
            return bad("zero padding needs d_model >= 5".into());
        }
        if !(self.layer_norm_eps > 0.0) {
            return bad("layer_norm_eps must be positive".into());
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let (d, f) = (self.d_model, self.d_ff);
        let mut specs = Vec::new();
        if self.input_projection == InputProjection::Linear {
            specs.extend(linear_specs("input", N_FEATURES, d));
        }
        let norm = |name: String| {
            [
                ParamSpec::new(format!("{name}.gamma"), [d], Init::Ones),
                ParamSpec::new(format!("{name}.beta"), [d], Init::Zeros),
            ]
        };
        for l in 0..self.n_layers {
            let p = format!("layer{l}");
            specs.extend(norm(format!("{p}.ln1")));
            for m in ["q", "k", "v", "o"] {
                specs.extend(linear_specs(&format!("{p}.attn.{m}"), d, d));
            }
            specs.extend(norm(format!("{p}.ln2")));
            specs.extend(linear_specs(&format!("{p}.ff1"), d, f));
            specs.extend(linear_specs(&format!("{p}.ff2"), f, d));
        }
        if self.norm_placement == NormPlacement::Pre {
            specs.extend(norm("final_ln".into()));
        }
        specs.extend(linear_specs("output", d, self.d_embed));
        specs
    }

    fn norm<'t, T: Scalar>(&self, p: &Bound<'t, T>, x: Var<'t, T>, name: &str) -> Result<Var<'t, T>> {
        x.layer_norm(1, T::of(self.layer_norm_eps))?
            .mul(p.get(&format!("{name}.gamma"))?)?
            .add(p.get(&format!("{name}.beta"))?)
    }

    fn attention<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        layer: &str,
        mode: &mut Mode<'_>,
    ) -> Result<Var<'t, T>> {
        let n = x.shape()[0];
        let dh = self.d_model / self.n_heads;
        let q = linear(p, x, &format!("{layer}.attn.q"))?;
        let k = linear(p, x, &format!("{layer}.attn.k"))?;
        let v = linear(p, x, &format!("{layer}.attn.v"))?;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mask = match self.attention_mask {
            AttentionMask::None => None,
            AttentionMask::Causal => {
                let data = (0..n * n)
                    .map(|ij| if ij % n > ij / n { T::of(-1e9) } else { T::zero() })
                    .collect();
                Some(x.tape().constant(Tensor::new([n, n], data)?))
            }
        };
        let mut heads = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let qh = q.slice(1, h * dh, dh)?;
            let kh = k.slice(1, h * dh, dh)?;
            let vh = v.slice(1, h * dh, dh)?;
            let mut scores = qh.matmul(kh.transpose()?)?.scale(scale);
            if let Some(m) = mask {
                scores = scores.add(m)?;
            }
            let attn = mode.dropout(scores.softmax(1)?, self.dropout);
            heads.push(attn.matmul(vh)?);
        }
        let joined = if heads.len() == 1 {
            heads[0]
        } else {
            x.tape().concat(&heads, 1)?
        };
        linear(p, joined, &format!("{layer}.attn.o"))
    }

    fn feed_forward<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        layer: &str,
        mode: &mut Mode<'_>,
    ) -> Result<Var<'t, T>> {
        let h = linear(p, x, &format!("{layer}.ff1"))?.relu();
        let h = mode.dropout(h, self.dropout);
        linear(p, h, &format!("{layer}.ff2"))
    }

    pub(crate) fn forward<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        mode: &mut Mode<'_>,
    ) -> Result<Var<'t, T>> {
        let n = x.shape()[0];
        let mut h = match self.input_projection {
            InputProjection::Linear => linear(p, x, "input")?,
            InputProjection::ZeroPad => {
                let pad = x.tape().constant(Tensor::zeros([n, self.d_model - N_FEATURES]));
                x.tape().concat(&[x, pad], 1)?
            }
        };
        for l in 0..self.n_layers {
            let layer = format!("layer{l}");
            match self.norm_placement {
                NormPlacement::Pre => {
                    let a = self.attention(p, self.norm(p, h, &format!("{layer}.ln1"))?, &layer, mode)?;
                    h = h.add(mode.dropout(a, self.dropout))?;
                    let f = self.feed_forward(p, self.norm(p, h, &format!("{layer}.ln2"))?, &layer, mode)?;
                    h = h.add(mode.dropout(f, self.dropout))?;
                }
                NormPlacement::Post => {
                    let a = self.attention(p, h, &layer, mode)?;
                    h = self.norm(p, h.add(mode.dropout(a, self.dropout))?, &format!("{layer}.ln1"))?;
                    let f = self.feed_forward(p, h, &layer, mode)?;
                    h = self.norm(p, h.add(mode.dropout(f, self.dropout))?, &format!("{layer}.ln2"))?;
                }
            }
        }
        if self.norm_placement == NormPlacement::Pre {
            h = self.norm(p, h, "final_ln")?;
        }
        let z = linear(p, h, "output")?;
        if self.l2_normalize {
            let norm = z.mul(z)?.sum_axis(1)?.add_scalar(T::of(1e-12)).sqrt().reshape([n, 1])?;
            return z.div(norm);
        }
        Ok(z)
    }
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self::desk()
    }
}

pub fn transformer_embed(
    config: &TransformerConfig,
    params: &ParameterStore<f32>,
    train: &NormalizedTrain,
) -> Result<EmbeddingSet> {
    ModelConfig::Transformer(config.clone()).embed(params, train)
}
