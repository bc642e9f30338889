use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{BackwardMode, CellSpec, RmsPropConfig};

/// Network geometry, optimiser schedule and initialisation for one
/// training run. Defaults are the tuned production values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Window length `N`.
    pub input_size: usize,
    /// Layer count `K`, input and output included.
    pub depth: usize,
    /// Neurons per hidden layer `H`.
    pub hidden_width: usize,
    /// Rollout length compared with targets, `N_train`.
    pub n_train: usize,
    /// Mini-batch size `B`.
    pub batch_size: usize,
    /// Steps per learning-rate review window, `ΔL`.
    pub window: usize,
    pub initial_rate: f64,
    /// Factor `κ` applied when the window-mean loss did not decrease.
    pub rate_decay: f64,
    /// Total optimiser steps `L_train`.
    pub steps: usize,
    pub b_init: f64,
    pub sigma_init: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    #[serde(with = "backward_mode")]
    pub backward: BackwardMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            input_size: 40,
            depth: 6,
            hidden_width: 64,
            n_train: 10,
            batch_size: 16,
            window: 10_000,
            initial_rate: 1e-4,
            rate_decay: 0.9,
            steps: 270_000,
            b_init: 0.1,
            sigma_init: 0.1,
            rms_decay: 0.9,
            rms_epsilon: 1e-10,
            backward: BackwardMode::ThroughTime,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.cell_spec()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.rate_decay > 0.0 && self.rate_decay < 1.0) {
            return bad(format!("rate decay {} must lie in (0, 1)", self.rate_decay));
        }
        if self.window == 0 || self.steps == 0 || !self.steps.is_multiple_of(self.window) {
            return bad(format!(
                "steps {} must be a positive multiple of the window {}",
                self.steps, self.window
            ));
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        if self.n_train == 0 {
            return bad("n_train must be >= 1".into());
        }
        if !(self.initial_rate > 0.0 && self.initial_rate.is_finite()) {
            return bad(format!(
                "initial rate {} must be positive",
                self.initial_rate
            ));
        }
        if !(0.0..1.0).contains(&self.rms_decay) || !(self.rms_epsilon >= 0.0) {
            return bad("rms decay must lie in [0, 1) and epsilon be >= 0".into());
        }
        if !(self.b_init > 0.0) || !(self.sigma_init > 0.0) {
            return bad("b_init and sigma_init must be positive".into());
        }
        Ok(())
    }

    pub fn cell_spec(&self) -> Result<CellSpec> {
        CellSpec::new(self.input_size, self.depth, self.hidden_width)
    }

    pub fn rmsprop(&self) -> RmsPropConfig {
        RmsPropConfig {
            learning_rate: self.initial_rate,
            decay: self.rms_decay,
            epsilon: self.rms_epsilon,
        }
    }

    pub fn windows(&self) -> usize {
        self.steps / self.window
    }
}

mod backward_mode {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::neural::BackwardMode;

    pub fn serialize<S: Serializer>(m: &BackwardMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match m {
            BackwardMode::ThroughTime => "through_time",
            BackwardMode::StopGradient => "stop_gradient",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BackwardMode, D::Error> {
        match String::deserialize(d)?.as_str() {
            "through_time" => Ok(BackwardMode::ThroughTime),
            "stop_gradient" => Ok(BackwardMode::StopGradient),
            other => Err(serde::de::Error::custom(format!(
                "unknown backward mode {other}"
            ))),
        }
    }
}

/// Disjoint validation / test / training age groups.
///
/// Validation holds ages `1, 6, 11, ..`, test holds `2, 7, 12, ..`, and
/// training keeps the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeSplit {
    pub validation: Vec<u32>,
    pub test: Vec<u32>,
    pub training: Vec<u32>,
}

impl AgeSplit {
    pub fn standard(max_age: u32) -> Self {
        let mut split = Self {
            validation: Vec::new(),
            test: Vec::new(),
            training: Vec::new(),
        };
        for age in 0..=max_age {
            match age % 5 {
                1 => split.validation.push(age),
                2 => split.test.push(age),
                _ => split.training.push(age),
            }
        }
        split
    }

    /// Training and validation ages merged, for the final retraining.
    pub fn training_and_validation(&self) -> Vec<u32> {
        let mut ages: Vec<u32> = self
            .training
            .iter()
            .chain(&self.validation)
            .copied()
            .collect();
        ages.sort_unstable();
        ages
    }

    pub fn validate(&self, max_age: u32) -> Result<()> {
        let mut all: Vec<u32> = self
            .validation
            .iter()
            .chain(&self.test)
            .chain(&self.training)
            .copied()
            .collect();
        all.sort_unstable();
        if all != (0..=max_age).collect::<Vec<_>>() {
            return Err(Error::InvalidConfig(format!(
                "age split must partition 0..={max_age} into disjoint sets"
            )));
        }
        if self.validation.is_empty() || self.training.is_empty() {
            return Err(Error::InvalidConfig("age split has an empty set".into()));
        }
        Ok(())
    }
}
