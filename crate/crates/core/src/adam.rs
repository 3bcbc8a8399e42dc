//! Bias-corrected Adam.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math;
use crate::tensor::{GradStore, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(len: usize) -> Self {
        Moments {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Updates `param` in place for step number `step` (1-based after the
/// increment that precedes the update).
pub fn adam_step(config: &AdamConfig, step: u64, moments: &mut Moments, param: &mut [f64], grad: &[f64]) -> Result<()> {
    if param.len() != grad.len() || moments.m.len() != param.len() || moments.v.len() != param.len() {
        bail!(
            Dimension,
            "adam: param {} / grad {} / moments {} lengths differ",
            param.len(),
            grad.len(),
            moments.m.len()
        );
    }
    if step == 0 {
        bail!(Contract, "adam step numbers start at 1");
    }
    let c1 = 1.0 - math::powi(config.beta1, step);
    let c2 = 1.0 - math::powi(config.beta2, step);
    for (((p, &g), m), v) in param
        .iter_mut()
        .zip(grad)
        .zip(moments.m.iter_mut())
        .zip(moments.v.iter_mut())
    {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= config.lr * m_hat / (math::sqrt(v_hat) + config.eps);
    }
    Ok(())
}

/// Optimizer state for a whole [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub moments: Vec<Moments>,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        AdamState {
            config,
            moments: params.iter().map(|(_, _, t)| Moments::zeros(t.len())).collect(),
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut ParamStore, grads: &GradStore) -> Result<()> {
        if self.moments.len() != params.len() {
            bail!(
                Dimension,
                "adam state tracks {} tensors, store has {}",
                self.moments.len(),
                params.len()
            );
        }
        self.step += 1;
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            adam_step(
                &self.config,
                self.step,
                &mut self.moments[id.index()],
                params.get_mut(id).data_mut(),
                grads.get(id),
            )?;
        }
        Ok(())
    }
}
