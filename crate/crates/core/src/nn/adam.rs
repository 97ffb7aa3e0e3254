use serde::{Deserialize, Serialize};

use super::store::ParamStore;
use super::table::SparseRows;
use crate::error::{Error, Result};

/// Adam hyperparameters. Weight decay is decoupled (applied directly to the
/// parameter, not folded into the gradient).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub weight_decay: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Optimizer moments for every parameter in a [`ParamStore`].
///
/// Dense tensors get the standard AdamW update. Embedding tables use the
/// row-sparse variant: only rows with a gradient in the current step are
/// updated, and no weight decay is applied to them.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    step_count: u64,
    first_moment: Vec<Vec<f32>>,
    second_moment: Vec<Vec<f32>>,
    /// Per table: `[m..., v...]` per touched row.
    table_moments: Vec<SparseRows>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        Self {
            config,
            step_count: 0,
            first_moment: store.tensors().map(|(_, t)| vec![0.0; t.len()]).collect(),
            second_moment: store.tensors().map(|(_, t)| vec![0.0; t.len()]).collect(),
            table_moments: store.tables().map(|(_, t)| SparseRows::new(2 * t.width())).collect(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<f32>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f32>] {
        &self.second_moment
    }

    pub fn table_moments(&self) -> &[SparseRows] {
        &self.table_moments
    }

    /// Rebuilds optimizer state from serialized parts.
    pub fn from_parts(
        config: AdamConfig,
        step_count: u64,
        first_moment: Vec<Vec<f32>>,
        second_moment: Vec<Vec<f32>>,
        table_moments: Vec<SparseRows>,
    ) -> Self {
        Self {
            config,
            step_count,
            first_moment,
            second_moment,
            table_moments,
        }
    }

    /// Applies one update to every parameter, then clears all gradients.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.first_moment.len() != store.tensor_count() || self.table_moments.len() != store.table_count() {
            return Err(Error::contract("optimizer state does not match parameter store"));
        }
        for id in store.tensor_ids() {
            let t = store.tensor(id);
            if t.requires_grad() && t.grad().is_none() {
                return Err(Error::contract(format!(
                    "parameter `{}` has no gradient; run backward before stepping",
                    store.tensor_name(id)
                )));
            }
        }

        self.step_count += 1;
        let c = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - f64::from(c.beta1).powi(t);
        let bias2 = 1.0 - f64::from(c.beta2).powi(t);
        let lr = c.learning_rate;
        let decay = 1.0 - lr * c.weight_decay;

        let update = |p: &mut f32, g: f32, m: &mut f32, v: &mut f32| {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = f64::from(*m) / bias1;
            let v_hat = f64::from(*v) / bias2;
            *p -= (f64::from(lr) * m_hat / (v_hat.sqrt() + f64::from(c.epsilon))) as f32;
        };

        for (i, tensor) in store.tensors_mut().iter_mut().enumerate() {
            if !tensor.requires_grad() {
                continue;
            }
            let (grad, values) = tensor.grad_and_values_mut();
            let grad = grad.expect("checked above");
            let (m, v) = (&mut self.first_moment[i], &mut self.second_moment[i]);
            for j in 0..values.len() {
                if c.weight_decay != 0.0 {
                    values[j] *= decay;
                }
                update(&mut values[j], grad[j], &mut m[j], &mut v[j]);
            }
            tensor.zero_grad();
        }

        for (i, table) in store.tables_mut().iter_mut().enumerate() {
            let grads = table.take_grads();
            let width = table.width();
            let moments = &mut self.table_moments[i];
            for (row, g) in grads.iter() {
                let mv = moments.get_or_insert_with(row, |d| d.fill(0.0));
                let (m, v) = mv.split_at_mut(width);
                let p = table.row_mut(row)?;
                for j in 0..width {
                    update(&mut p[j], g[j], &mut m[j], &mut v[j]);
                }
            }
        }
        Ok(())
    }
}
