use serde::{Deserialize, Serialize};

use super::cell::{DenseCell, Layer};
use super::rollout::Gradients;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    /// Decay of the squared-gradient average.
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            decay: 0.9,
            epsilon: 1e-10,
        }
    }
}

/// Running squared-gradient averages, one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub config: RmsPropConfig,
    accumulators: Vec<Layer>,
}

impl RmsPropState {
    pub fn new(cell: &DenseCell, config: RmsPropConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive",
                config.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&config.decay) || !(config.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(
                "RMSProp decay must be in [0,1), epsilon >= 0".into(),
            ));
        }
        Ok(Self {
            config,
            accumulators: cell.zeros_like(),
        })
    }

    pub fn accumulators(&self) -> &[Layer] {
        &self.accumulators
    }
}

/// `a ← ρa + (1−ρ)g²`, `θ ← θ − α·g / (√a + ε)`, elementwise.
pub fn rmsprop_step(
    state: &mut RmsPropState,
    cell: &mut DenseCell,
    grads: &Gradients,
) -> Result<()> {
    let shapes_ok = state.accumulators.len() == cell.layers().len()
        && grads.layers.len() == cell.layers().len()
        && cell
            .layers()
            .iter()
            .zip(&state.accumulators)
            .zip(&grads.layers)
            .all(|((c, a), g)| c.same_shape(a) && c.same_shape(g));
    if !shapes_ok {
        return Err(Error::ShapeMismatch(
            "optimizer state, cell and gradients differ".into(),
        ));
    }
    let RmsPropConfig {
        learning_rate,
        decay,
        epsilon,
    } = state.config;
    let update = |theta: &mut f64, acc: &mut f64, g: f64| {
        *acc = decay * *acc + (1.0 - decay) * g * g;
        *theta -= learning_rate * g / (acc.sqrt() + epsilon);
    };
    for ((layer, acc), g) in cell
        .layers_mut()
        .iter_mut()
        .zip(&mut state.accumulators)
        .zip(&grads.layers)
    {
        for ((t, a), &gv) in layer
            .weights
            .iter_mut()
            .zip(&mut acc.weights)
            .zip(&g.weights)
        {
            update(t, a, gv);
        }
        for ((t, a), &gv) in layer.bias.iter_mut().zip(&mut acc.bias).zip(&g.bias) {
            update(t, a, gv);
        }
    }
    Ok(())
}
