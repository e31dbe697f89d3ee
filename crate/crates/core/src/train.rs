//! Minibatch Adam training of a [`ModelPair`] under an [`ObjectiveSpec`].

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{backward, Tape, Tensor};
use crate::distributions::standard_normal_vec;
use crate::error::{Error, Result};
use crate::models::ModelPair;
use crate::nn::{AdamConfig, ParamSet, TrainState};
use crate::objectives::{
    objective_loss, DivergenceKind, DivergenceState, LossBreakdown, ObjectiveSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Owns the model, optimizer state and every random stream of a run.
///
/// A step whose loss or gradient is not finite returns
/// [`Error::NonFinite`] and leaves the parameters as they were, so the
/// model always holds the last good state.
pub struct Trainer {
    model: ModelPair,
    spec: ObjectiveSpec,
    state: TrainState,
    divergence: DivergenceState,
    rng: ChaCha8Rng,
    batch_size: usize,
    order: Vec<usize>,
}

impl Trainer {
    pub fn new(model: ModelPair, spec: ObjectiveSpec, cfg: &TrainConfig) -> Result<Self> {
        spec.validate()?;
        if spec.likelihood != model.decoder_kind() {
            return Err(Error::invalid(alloc::format!(
                "objective likelihood {:?} does not match decoder {:?}",
                spec.likelihood,
                model.decoder_kind()
            )));
        }
        if cfg.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let divergence = DivergenceState::new(&spec, model.latent_dim(), cfg.adam, &mut rng)?;
        let state = TrainState::new(model.params(), cfg.adam, cfg.seed);
        Ok(Trainer {
            model,
            spec,
            state,
            divergence,
            rng,
            batch_size: cfg.batch_size,
            order: Vec::new(),
        })
    }

    /// Resumes from a saved optimizer state.
    pub fn with_state(mut self, state: TrainState) -> Result<Self> {
        if state.first_moment.len() != self.model.params().len() {
            return Err(Error::invalid("train state does not match the model"));
        }
        self.state = state;
        Ok(self)
    }

    pub fn model(&self) -> &ModelPair {
        &self.model
    }

    pub fn into_model(self) -> ModelPair {
        self.model
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    /// Changes the model's learning rate for later steps.
    pub fn set_learning_rate(&mut self, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        self.state.config.learning_rate = lr;
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        self.state.step
    }

    /// Next `batch_size` rows from an endless stream of reshuffled epochs,
    /// so a set smaller than the batch is tiled.
    fn batch(&mut self, data: &[Vec<f64>]) -> Result<Tensor> {
        let mut rows: Vec<&Vec<f64>> = Vec::with_capacity(self.batch_size);
        while rows.len() < self.batch_size {
            if self.order.is_empty() {
                let mut idx: Vec<usize> = (0..data.len()).collect();
                idx.shuffle(&mut self.rng);
                self.order = idx;
            }
            let i = self.order.pop().expect("refilled above");
            rows.push(&data[i]);
        }
        Tensor::from_rows(&rows)
    }

    /// One Adam step on the negated objective.
    pub fn step(&mut self, data: &[Vec<f64>]) -> Result<LossBreakdown> {
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        let batch = self.batch(data)?;
        let (b, l) = (batch.rows(), self.model.latent_dim());
        let noise = Tensor::matrix(b, l, standard_normal_vec(&mut self.rng, b * l))?;
        let prior = Tensor::matrix(b, l, standard_normal_vec(&mut self.rng, b * l))?;
        let tape = Tape::new();
        let bound = self.model.bind(Some(&tape));
        let terms = objective_loss(&batch, &bound, &prior, &noise, &self.spec, &self.divergence)?;
        let breakdown = terms.breakdown();
        if !breakdown.total.is_finite() {
            return Err(Error::NonFinite(alloc::format!(
                "loss at step {}",
                self.state.step
            )));
        }
        let grads = backward(&terms.total.neg()?)?;
        let g = ParamSet::gradients(&bound.params, &grads);
        self.state.adam_step(self.model.params_mut(), &g)?;
        if self.spec.divergence == DivergenceKind::Adversarial
            && self.spec.divergence_coefficient() != 0.0
        {
            self.divergence.update(&terms.z.detach(), &prior)?;
        }
        Ok(breakdown)
    }
}
