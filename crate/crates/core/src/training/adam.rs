use serde::{Deserialize, Serialize};

use crate::models::ParameterStore;
use crate::numerics::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    #[serde(default = "beta1")]
    pub beta1: f64,
    #[serde(default = "beta2")]
    pub beta2: f64,
    #[serde(default = "eps")]
    pub eps: f64,
}

fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: beta1(),
            beta2: beta2(),
            eps: eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// Bias-corrected Adam with one moment pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    /// Number of completed steps.
    pub t: u64,
    pub m: ParameterStore<T>,
    pub v: ParameterStore<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, params: &ParameterStore<T>) -> Self {
        let zeros = |p: &ParameterStore<T>| {
            let mut s = ParameterStore::new();
            for (k, t) in p.iter() {
                s.insert(k, Tensor::zeros(t.shape().to_vec()))
                    .expect("names are unique");
            }
            s
        };
        Self {
            config,
            t: 0,
            m: zeros(params),
            v: zeros(params),
        }
    }

    pub fn step(&mut self, params: &mut ParameterStore<T>, grads: &ParameterStore<T>) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Validation(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let step = T::of(c.learning_rate / bc1);
        let inv_bc2 = T::of(1.0 / bc2);
        let eps = T::of(c.eps);
        for (name, p) in params.iter_mut() {
            let g = grads.get(name)?;
            let m = self.m.get_mut(name)?;
            if g.shape() != p.shape() || m.shape() != p.shape() {
                return Err(Error::shape("adam", p.shape(), g.shape()));
            }
            let v = self.v.get_mut(name)?;
            let (pd, gd, md, vd) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for i in 0..pd.len() {
                md[i] = b1 * md[i] + (T::one() - b1) * gd[i];
                vd[i] = b2 * vd[i] + (T::one() - b2) * gd[i] * gd[i];
                pd[i] = pd[i] - step * md[i] / ((vd[i] * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
