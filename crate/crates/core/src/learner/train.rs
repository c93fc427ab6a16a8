use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{AdamConfig, AdamState, GeneratorModel, HyperInit, HyperMlp, LinearPropagator, LossKind, Trainable};
use crate::dataset::{stream_rng, Dataset, Sample, Stream};
use crate::error::{Error, Result};
use crate::quantum::SpinModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    Hyper,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Hyper => "hyper",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(ModelKind::Linear),
            "hyper" | "hypermodel" => Ok(ModelKind::Hyper),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub hidden_width: usize,
    pub loss: LossKind,
    pub hyper_init: HyperInit,
}

impl TrainConfig {
    pub fn linear() -> Self {
        Self {
            kind: ModelKind::Linear,
            batch_size: 256,
            batches_per_epoch: 512,
            epochs: 5,
            adam: AdamConfig::default(),
            seed: 0,
            hidden_width: 64,
            loss: LossKind::Norm,
            hyper_init: HyperInit::Identity,
        }
    }

    pub fn hyper() -> Self {
        Self {
            kind: ModelKind::Hyper,
            batches_per_epoch: 256,
            epochs: 500,
            ..Self::linear()
        }
    }

    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Linear => Self::linear(),
            ModelKind::Hyper => Self::hyper(),
        }
    }

    /// Every violated constraint, or nothing.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.batch_size == 0 {
            out.push("batch_size must be positive".to_string());
        }
        if self.batches_per_epoch == 0 {
            out.push("batches_per_epoch must be positive".to_string());
        }
        if self.epochs == 0 {
            out.push("epochs must be positive".to_string());
        }
        if self.hidden_width == 0 {
            out.push("hidden_width must be positive".to_string());
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            out.push(format!("lr = {} must be positive", a.lr));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            out.push("Adam betas must lie in [0, 1)".to_string());
        }
        if !(a.eps > 0.0) {
            out.push(format!("eps = {} must be positive", a.eps));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub train: f64,
    pub val: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: GeneratorModel,
    pub config: TrainConfig,
    pub history: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub dt: f64,
    /// Time scale of the hypermodel input.
    pub t_train: f64,
    /// Spin model the training data came from.
    pub source: SpinModel,
}

impl TrainedModel {
    pub fn best_val_loss(&self) -> f64 {
        self.history[self.best_epoch - 1].val
    }
}

fn initial_model(config: &TrainConfig, t_train: f64) -> Result<GeneratorModel> {
    Ok(match config.kind {
        ModelKind::Linear => GeneratorModel::Linear(LinearPropagator::default()),
        ModelKind::Hyper => {
            GeneratorModel::Hyper(HyperMlp::new(config.hidden_width, t_train, config.hyper_init, config.seed)?)
        }
    })
}

/// Adam on minibatches drawn with replacement from the training split.
/// Validation loss is evaluated once per epoch and the best epoch is kept;
/// without validation samples the epoch's training loss is used instead.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainedModel> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(Error::InvalidArgument(problems.join("; ")));
    }
    if dataset.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let meta = &dataset.meta;
    let mut model = initial_model(config, meta.t_total)?;
    let mut params = model.params();
    let mut adam = AdamState::new(config.adam, params.len());
    let mut rng = stream_rng(config.seed, Stream::Minibatch, 0);
    let mut batch: Vec<Sample> = Vec::with_capacity(config.batch_size);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for epoch in 1..=config.epochs {
        let mut sum = 0.0;
        for _ in 0..config.batches_per_epoch {
            batch.clear();
            batch.extend((0..config.batch_size).map(|_| dataset.train[rng.random_range(0..dataset.train.len())]));
            let (loss, grads) = model.loss_and_grad(&batch, config.loss)?;
            adam.step(&mut params, &grads)?;
            model.set_params(&params)?;
            sum += loss;
        }
        let train_loss = sum / config.batches_per_epoch as f64;
        let val_loss = if dataset.val.is_empty() {
            train_loss
        } else {
            model.loss(&dataset.val, config.loss)?
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence { step: epoch });
        }
        history.push(EpochLoss {
            epoch,
            train: train_loss,
            val: val_loss,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, params.clone()));
        }
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    model.set_params(&best_params)?;
    Ok(TrainedModel {
        model,
        config: *config,
        history,
        best_epoch,
        dt: meta.dt,
        t_train: meta.t_total,
        source: meta.model,
    })
}
