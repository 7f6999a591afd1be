use serde::{Deserialize, Serialize};

use super::{linear, linear_specs, Bound, EmbeddingSet, Init, Mode, ModelConfig, ParamSpec, ParameterStore};
use crate::numerics::{Scalar, Tensor, Var};
use crate::pdw::{NormalizedTrain, N_FEATURES};
use crate::{Error, Result};

/// Stacked unidirectional GRU. Gates are packed `[reset, update, new]` along
/// the last axis of `gru{l}.ih.w` (`[d_in, 3H]`) and `gru{l}.hh.w` (`[H, 3H]`):
///
/// ```text
/// r = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
/// z = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
/// n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruConfig {
    pub n_layers: usize,
    pub hidden: usize,
    pub d_embed: usize,
    /// Applied to the outputs of every layer but the last.
    pub dropout: f64,
}

impl GruConfig {
    pub fn paper() -> Self {
        Self {
            n_layers: 8,
            hidden: 512,
            d_embed: 8,
            dropout: 0.05,
        }
    }

    pub fn desk() -> Self {
        Self {
            n_layers: 2,
            hidden: 64,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.hidden == 0 || self.d_embed == 0 {
            return Err(Error::Config(
                "gru: n_layers, hidden and d_embed must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("gru: dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let h = self.hidden;
        let mut specs = Vec::new();
        for l in 0..self.n_layers {
            let d_in = if l == 0 { N_FEATURES } else { h };
            specs.push(ParamSpec::new(
                format!("gru{l}.ih.w"),
                [d_in, 3 * h],
                Init::FanInUniform,
            ));
            specs.push(ParamSpec::new(format!("gru{l}.ih.b"), [3 * h], Init::Zeros));
            specs.push(ParamSpec::new(format!("gru{l}.hh.w"), [h, 3 * h], Init::FanInUniform));
            specs.push(ParamSpec::new(format!("gru{l}.hh.b"), [3 * h], Init::Zeros));
        }
        specs.extend(linear_specs("output", h, self.d_embed));
        specs
    }

    /// One recurrence step. `gi` is the input contribution `[1, 3H]`.
    pub fn cell<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        layer: usize,
        gi: Var<'t, T>,
        h: Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let hd = self.hidden;
        let gh = h
            .matmul(p.get(&format!("gru{layer}.hh.w"))?)?
            .add(p.get(&format!("gru{layer}.hh.b"))?)?;
        let r = gi.slice(1, 0, hd)?.add(gh.slice(1, 0, hd)?)?.sigmoid();
        let z = gi.slice(1, hd, hd)?.add(gh.slice(1, hd, hd)?)?.sigmoid();
        let n = gi.slice(1, 2 * hd, hd)?.add(r.mul(gh.slice(1, 2 * hd, hd)?)?)?.tanh();
        n.add(z.mul(h.sub(n)?)?)
    }

    pub(crate) fn forward<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        mode: &mut Mode<'_>,
    ) -> Result<Var<'t, T>> {
        let n = x.shape()[0];
        let tape = x.tape();
        let mut seq = x;
        for l in 0..self.n_layers {
            let gi = linear(p, seq, &format!("gru{l}.ih"))?;
            let mut h = tape.constant(Tensor::zeros([1, self.hidden]));
            let mut outs = Vec::with_capacity(n);
            for t in 0..n {
                h = self.cell(p, l, gi.row(t)?, h)?;
                outs.push(h);
            }
            seq = tape.concat(&outs, 0)?;
            if l + 1 < self.n_layers {
                seq = mode.dropout(seq, self.dropout);
            }
        }
        linear(p, seq, "output")
    }
}

impl Default for GruConfig {
    fn default() -> Self {
        Self::desk()
    }
}

pub fn gru_embed(config: &GruConfig, params: &ParameterStore<f32>, train: &NormalizedTrain) -> Result<EmbeddingSet> {
    ModelConfig::Gru(config.clone()).embed(params, train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::random_train;
    use crate::models::{init_params, TransformerConfig};

    #[test]
    fn paper_parameter_count() {
        assert_eq!(ModelConfig::Gru(GruConfig::paper()).parameter_count(), 11_832_840);
    }

    #[test]
    fn paper_sizes_are_comparable() {
        let t = ModelConfig::Transformer(TransformerConfig::paper()).parameter_count() as f64;
        let g = ModelConfig::Gru(GruConfig::paper()).parameter_count() as f64;
        // 8 layers of width 512 come out about 12% above the transformer.
        assert!(g / t > 1.0 && g / t < 1.15, "{}", g / t);
    }

    #[test]
    fn shape_and_order_dependence() {
        let cfg = GruConfig::desk();
        let p = init_params(&ModelConfig::Gru(cfg.clone()), 5);
        let t = random_train(12, 7);
        let z = gru_embed(&cfg, &p, &t).unwrap();
        assert_eq!((z.len(), z.dim()), (12, 8));
        let order: Vec<usize> = (0..12).rev().collect();
        let zp = gru_embed(&cfg, &p, &t.permuted(&order)).unwrap();
        let moved = (0..12).any(|i| z.row(order[i]).iter().zip(zp.row(i)).any(|(a, b)| (a - b).abs() > 1e-4));
        assert!(moved);
    }
}
