use super::{Gradients, ParamStore, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with one moment pair per parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols()))
                .collect::<Vec<_>>()
        };
        Self {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters with no gradient entry see a zero
    /// gradient. Gradients are consumed.
    pub fn step(&mut self, store: &mut ParamStore, grads: Gradients) -> Result<()> {
        for (id, g) in grads.iter() {
            if !g.all_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter {}",
                    store.get(id).name
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powf(self.step as f64);
        let bc2 = 1.0 - c.beta2.powf(self.step as f64);
        let ids: Vec<_> = store.iter().map(|(id, p)| (id, p.trainable)).collect();
        for (id, trainable) in ids {
            if !trainable {
                continue;
            }
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let g = grads.param(id);
            let p = store.value_mut(id);
            for i in 0..p.len() {
                let gi = g.map_or(0.0, |g| g.data()[i]);
                let mi = c.beta1 * m.data()[i] + (1.0 - c.beta1) * gi;
                let vi = c.beta2 * v.data()[i] + (1.0 - c.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let update = c.lr * (mi / bc1) / ((vi / bc2).sqrt() + c.eps);
                p.data_mut()[i] -= update;
            }
        }
        Ok(())
    }
}
