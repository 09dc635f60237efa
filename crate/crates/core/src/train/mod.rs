//! Offline fitting of the prior to target spectra.

mod gradcheck;
mod loss;

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use gradcheck::{gradient_check, gradient_check_with, GradCheckConfig, GradCheckReport, GroupCheck};
pub use loss::{
    loss_marginal, loss_marginal_grad, loss_spec, loss_spec_grad, loss_support, los_window, support_terms, total_loss,
    total_loss_grad, LossBreakdown, LossWeights, SupportTerms,
};

use crate::exec::SampleMap;
use crate::model::{ParamGroup, ParamLayout, PriorModel, TrainingSample};
use crate::render::{los_bin, render_and_backprop, RenderConfig, RenderGeometry};
use crate::{Error, Result};

/// Per-group step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub opacity: f64,
    /// In units of the delay tap spacing.
    pub delay_residual: f64,
    pub gain: f64,
    /// Metres.
    pub position: f64,
    /// Metres.
    pub scale: f64,
    pub los_gain: f64,
    pub deformer: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            opacity: 0.05,
            delay_residual: 0.02,
            gain: 0.05,
            position: 0.2,
            scale: 0.05,
            los_gain: 0.05,
            deformer: 1e-3,
        }
    }
}

impl LearningRates {
    pub fn zero() -> Self {
        Self {
            opacity: 0.0,
            delay_residual: 0.0,
            gain: 0.0,
            position: 0.0,
            scale: 0.0,
            los_gain: 0.0,
            deformer: 0.0,
        }
    }

    fn for_group(&self, group: ParamGroup, tap_spacing: f64) -> f64 {
        match group {
            ParamGroup::Opacity => self.opacity,
            ParamGroup::DelayResidual => self.delay_residual * tap_spacing,
            ParamGroup::Gain => self.gain,
            ParamGroup::Position => self.position,
            ParamGroup::Scale => self.scale,
            ParamGroup::LosGain => self.los_gain,
            ParamGroup::Deformer => self.deformer,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.opacity,
            self.delay_residual,
            self.gain,
            self.position,
            self.scale,
            self.los_gain,
            self.deformer,
        ];
        if !all.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid("learning rates must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs during which `λ_spec` is scaled by 0.1.
    pub warmup_epochs: usize,
    /// Epochs already completed (for resumed runs); shifts the schedule.
    pub start_epoch: usize,
    pub lr: LearningRates,
    /// Multiplicative learning-rate decay per epoch.
    pub lr_decay: f64,
    pub weights: LossWeights,
    pub render: RenderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 8,
            seed: 0,
            warmup_epochs: 10,
            start_epoch: 0,
            lr: LearningRates::default(),
            lr_decay: 0.995,
            weights: LossWeights::default(),
            render: RenderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::invalid("learning-rate decay must lie in (0, 1]"));
        }
        self.lr.validate()?;
        self.weights.validate()
    }

    fn spec_scale(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            0.1
        } else {
            1.0
        }
    }
}

/// Mean loss components over one epoch (1-based `epoch`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: PriorModel,
    pub history: Vec<EpochRecord>,
}

/// Loss of one sample and its gradient over the flat parameter vector.
pub fn sample_loss_grad(
    model: &PriorModel,
    sample: &TrainingSample,
    geom: &RenderGeometry,
    render: &RenderConfig,
    weights: &LossWeights,
    spec_scale: f64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let bin = los_bin(geom, &sample.ue_position);
    let (_, loss, grad) = render_and_backprop(model, &sample.ue_position, geom, render, |r| {
        total_loss_grad(&r.total.q, &r.nlos_only.q, &sample.target.q, weights, bin, spec_scale)
    })?;
    Ok((loss, grad))
}

/// Loss of one sample without gradients.
pub fn sample_loss(
    model: &PriorModel,
    sample: &TrainingSample,
    geom: &RenderGeometry,
    render: &RenderConfig,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let r = crate::render::render(model, &sample.ue_position, geom, render)?;
    let bin = los_bin(geom, &sample.ue_position);
    Ok(total_loss_grad(&r.total.q, &r.nlos_only.q, &sample.target.q, weights, bin, 1.0)?.0)
}

/// First and second moment estimates of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            steps: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update with per-coordinate step sizes from `lr_of`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr_of: &dyn Fn(usize) -> f64) {
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps);
        let c2 = 1.0 - self.beta2.powi(self.steps);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let lr = lr_of(k);
            if lr == 0.0 {
                continue;
            }
            params[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps);
        }
    }
}

/// Mini-batch Adam over the training samples.
///
/// Per-sample gradients are evaluated through `exec` and reduced in sample
/// order, so a fixed seed reproduces the history bit for bit.
pub fn train_prior<E: SampleMap>(
    init: &PriorModel,
    samples: &[TrainingSample],
    geom: &RenderGeometry,
    cfg: &TrainConfig,
    exec: &E,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("training needs at least one sample"));
    }
    let mut model = init.clone();
    let layout: ParamLayout = model.layout();
    let mut params = model.to_flat();
    let mut adam = Adam::new(params.len());
    let tap = geom.grid.tap_spacing();
    let group_of: Vec<ParamGroup> = (0..layout.len()).map(|k| layout.group_of(k).unwrap_or(ParamGroup::Deformer)).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for e in 0..cfg.epochs {
        let epoch = cfg.start_epoch + e;
        let spec_scale = cfg.spec_scale(epoch);
        let decay = cfg.lr_decay.powi(epoch as i32);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut epoch_loss = LossBreakdown::default();
        for batch in order.chunks(cfg.batch_size) {
            let snapshot = &model;
            let results = exec.map(batch.len(), &|j| {
                sample_loss_grad(snapshot, &samples[batch[j]], geom, &cfg.render, &cfg.weights, spec_scale)
            });
            let mut grad = vec![0.0; params.len()];
            for r in results {
                let (loss, g) = r?;
                if !loss.total.is_finite() || !g.iter().all(|v| v.is_finite()) {
                    return Err(Error::TrainingFailure { epoch: epoch + 1 });
                }
                epoch_loss.add(&loss);
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|v| *v *= inv);
            adam.step(&mut params, &grad, &|k| decay * cfg.lr.for_group(group_of[k], tap));
            if !params.iter().all(|v| v.is_finite()) {
                return Err(Error::TrainingFailure { epoch: epoch + 1 });
            }
            model.set_flat(&params)?;
            // keep the optimizer view in sync with clamped scales
            params = model.to_flat();
        }
        history.push(EpochRecord {
            epoch: epoch + 1,
            loss: epoch_loss.scaled(1.0 / samples.len() as f64),
        });
    }
    Ok(TrainOutcome { model, history })
}
