//! Mini-batch Adam training with early stopping on dev NLL.
//!
//! Each step draws its batch from an RNG seeded by `(seed, step)`, so a run
//! resumed from a saved [`TrainState`] continues exactly like an
//! uninterrupted one. Per-instance gradients are summed in batch order no
//! matter how they were computed, which keeps results independent of the
//! [`Executor`].

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::{AdamConfig, AdamState};
use crate::error::{bail, Error, Result};
use crate::model::{EncodedInstance, LossValue, Model};
use crate::tensor::{GradStore, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_steps: usize,
    pub lr: f64,
    pub eval_every: usize,
    pub patience: usize,
    pub seed: u64,
    /// Rescale the batch gradient to this norm when it is larger.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_steps: 1000,
            lr: 1e-3,
            eval_every: 100,
            patience: 5,
            seed: 0,
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            bail!(Config, "batch_size must be at least 1");
        }
        if self.patience == 0 {
            bail!(Config, "patience must be at least 1");
        }
        if self.eval_every == 0 {
            bail!(Config, "eval_every must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            bail!(Config, "lr must be a finite non-negative number");
        }
        if let Some(n) = self.max_grad_norm {
            if !(n > 0.0 && n.is_finite()) {
                bail!(Config, "max_grad_norm must be positive");
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Runs independent jobs and returns their results in job order.
pub trait Executor {
    fn map<T: Send>(&self, jobs: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T>;
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T: Send>(&self, jobs: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        (0..jobs).map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    /// Mean optimized loss over the step's batch (L2 included).
    pub train_loss: f64,
    /// Dev NLL when this step ran an evaluation.
    pub dev_nll: Option<f64>,
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub step: usize,
    pub adam: AdamState,
    pub best_dev: Option<f64>,
    pub best_step: Option<usize>,
    pub bad_evals: usize,
    pub stopped_early: bool,
    pub curve: Vec<CurvePoint>,
    pub best_params: Option<ParamStore>,
}

impl TrainState {
    pub fn new(config: &TrainConfig, params: &ParamStore) -> Self {
        TrainState {
            step: 0,
            adam: AdamState::new(config.adam(), params),
            best_dev: None,
            best_step: None,
            bad_evals: 0,
            stopped_early: false,
            curve: Vec::new(),
            best_params: None,
        }
    }

    pub fn finished(&self, config: &TrainConfig) -> bool {
        self.stopped_early || self.step >= config.max_steps
    }
}

/// Indices of the batch used at `step` (1-based).
pub fn batch_indices(n: usize, batch_size: usize, seed: u64, step: usize) -> Vec<usize> {
    if batch_size >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    let mut picked = rand::seq::index::sample(&mut rng, n, batch_size).into_vec();
    picked.sort_unstable();
    picked
}

fn non_finite(what: &str, index: usize, instance: &EncodedInstance) -> Error {
    Error::NonFinite(format!(
        "{what} of training instance #{index} (interlocutors {:?}, {} turns, response of {} tokens)",
        instance.interlocutors,
        instance.turns.len(),
        instance.response.len()
    ))
}

/// Mean per-instance response NLL; the L2 term is not included.
pub fn evaluate_loss<E: Executor>(model: &Model, split: &[EncodedInstance], executor: &E) -> Result<f64> {
    if split.is_empty() {
        bail!(Domain, "cannot evaluate an empty split");
    }
    let losses = executor.map(split.len(), &|i| model.forward_loss(&split[i]).map(|l| l.nll));
    let mut total = 0.0;
    for (i, loss) in losses.into_iter().enumerate() {
        let nll = loss?;
        if !nll.is_finite() {
            return Err(non_finite("dev NLL", i, &split[i]));
        }
        total += nll;
    }
    Ok(total / split.len() as f64)
}

/// Runs a training loop over pre-encoded splits.
pub struct Trainer<'a, E> {
    pub config: TrainConfig,
    train: &'a [EncodedInstance],
    dev: &'a [EncodedInstance],
    executor: E,
}

impl<'a, E: Executor> Trainer<'a, E> {
    pub fn new(
        config: TrainConfig,
        train: &'a [EncodedInstance],
        dev: &'a [EncodedInstance],
        executor: E,
    ) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            bail!(Domain, "training split is empty");
        }
        if dev.is_empty() {
            bail!(Domain, "dev split is empty");
        }
        Ok(Trainer {
            config,
            train,
            dev,
            executor,
        })
    }

    /// One optimizer update; returns the batch's mean loss.
    pub fn step(&self, model: &mut Model, state: &mut TrainState, grads: &mut GradStore) -> Result<f64> {
        let step = state.step + 1;
        let batch = batch_indices(self.train.len(), self.config.batch_size, self.config.seed, step);
        let m: &Model = model;
        let results: Vec<Result<(LossValue, GradStore)>> = self.executor.map(batch.len(), &|j| {
            let mut g = GradStore::zeros_like(&m.params);
            let loss = m.loss_and_grads(&self.train[batch[j]], &mut g)?;
            Ok((loss, g))
        });
        grads.zero();
        let mut total = 0.0;
        for (j, result) in results.into_iter().enumerate() {
            let index = batch[j];
            let (loss, g) = result?;
            if !loss.total.is_finite() {
                return Err(non_finite("loss", index, &self.train[index]));
            }
            if !g.is_finite() {
                return Err(non_finite("gradient", index, &self.train[index]));
            }
            grads.add_assign(&g)?;
            total += loss.total;
        }
        let scale = 1.0 / batch.len() as f64;
        grads.scale(scale);
        if let Some(limit) = self.config.max_grad_norm {
            let norm = grads.norm();
            if norm > limit {
                grads.scale(limit / norm);
            }
        }
        state.adam.update(&mut model.params, grads)?;
        if model
            .params
            .iter()
            .any(|(_, _, t)| t.data().iter().any(|x| !x.is_finite()))
        {
            bail!(NonFinite, "parameters became non-finite at step {step}");
        }
        state.step = step;
        Ok(total * scale)
    }

    /// Trains until `max_steps` or until dev NLL fails to improve for
    /// `patience` consecutive evaluations. `on_point` sees each curve point.
    pub fn run(&self, model: &mut Model, state: &mut TrainState, mut on_point: impl FnMut(&CurvePoint)) -> Result<()> {
        let mut grads = GradStore::zeros_like(&model.params);
        while !state.finished(&self.config) {
            let train_loss = self.step(model, state, &mut grads)?;
            let mut point = CurvePoint {
                step: state.step,
                train_loss,
                dev_nll: None,
            };
            if state.step.is_multiple_of(self.config.eval_every) || state.step == self.config.max_steps {
                let dev = evaluate_loss(model, self.dev, &self.executor)?;
                point.dev_nll = Some(dev);
                if state.best_dev.is_none_or(|best| dev < best) {
                    state.best_dev = Some(dev);
                    state.best_step = Some(state.step);
                    state.best_params = Some(model.params.clone());
                    state.bad_evals = 0;
                } else {
                    state.bad_evals += 1;
                    if state.bad_evals >= self.config.patience {
                        log::info!("early stop at step {} (best dev {:?})", state.step, state.best_dev);
                        state.stopped_early = true;
                    }
                }
                log::info!("step {} train {:.6} dev {:.6}", state.step, train_loss, dev);
            }
            on_point(&point);
            state.curve.push(point);
        }
        Ok(())
    }

    /// Replaces the weights with the best dev checkpoint, if any.
    pub fn restore_best(model: &mut Model, state: &TrainState) {
        if let Some(best) = &state.best_params {
            model.params = best.clone();
        }
    }
}
