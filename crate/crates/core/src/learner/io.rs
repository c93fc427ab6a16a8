use std::path::Path;

use super::{
    AdamConfig, EpochLoss, GeneratorModel, HyperInit, HyperMlp, LinearPropagator, LossKind, ModelKind, TrainConfig,
    Trainable, TrainedModel,
};
use crate::error::{Error, Result};
use crate::quantum::SpinModel;
use crate::textio::{Header, RecordWriter, TextFile};

/// Contents of a trained-model file.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: GeneratorModel,
    pub config: TrainConfig,
    pub dt: f64,
    pub t_train: f64,
    pub best_epoch: usize,
    pub source: SpinModel,
}

impl From<&TrainedModel> for ModelFile {
    fn from(t: &TrainedModel) -> Self {
        Self {
            model: t.model.clone(),
            config: t.config,
            dt: t.dt,
            t_train: t.t_train,
            best_epoch: t.best_epoch,
            source: t.source,
        }
    }
}

/// Header plus one parameter per line, in the model's flat order.
pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    let c = &file.config;
    let mut header = Header::new().with_model(&file.source);
    header
        .set("kind", file.model.kind())
        .set("hidden_width", c.hidden_width)
        .set("dt", format!("{:?}", file.dt))
        .set("T_train", format!("{:?}", file.t_train))
        .set("seed", c.seed)
        .set("batch_size", c.batch_size)
        .set("batches_per_epoch", c.batches_per_epoch)
        .set("epochs", c.epochs)
        .set("lr", format!("{:?}", c.adam.lr))
        .set("beta1", format!("{:?}", c.adam.beta1))
        .set("beta2", format!("{:?}", c.adam.beta2))
        .set("eps", format!("{:?}", c.adam.eps))
        .set("loss", c.loss)
        .set("hyper_init", c.hyper_init)
        .set("best_epoch", file.best_epoch)
        .set("num_params", file.model.num_params());
    let mut w = RecordWriter::create(path, &header, "param")?;
    for p in file.model.params() {
        w.line(&format!("{p:?}"))?;
    }
    w.finish()
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let file = TextFile::read(path)?;
    let hr = file.header_reader();
    let kind: ModelKind = hr.require("kind")?.parse()?;
    let config = TrainConfig {
        kind,
        batch_size: hr.parse("batch_size")?,
        batches_per_epoch: hr.parse("batches_per_epoch")?,
        epochs: hr.parse("epochs")?,
        adam: AdamConfig {
            lr: hr.parse("lr")?,
            beta1: hr.parse("beta1")?,
            beta2: hr.parse("beta2")?,
            eps: hr.parse("eps")?,
        },
        seed: hr.parse("seed")?,
        hidden_width: hr.parse("hidden_width")?,
        loss: hr.require("loss")?.parse::<LossKind>()?,
        hyper_init: hr.require("hyper_init")?.parse::<HyperInit>()?,
    };
    let dt: f64 = hr.parse("dt")?;
    let t_train: f64 = hr.parse("T_train")?;
    let params = file
        .sections
        .iter()
        .flat_map(|(_, lines)| lines.iter())
        .map(|(line, text)| file.numbers(*line, text, 1).map(|f| f[0]))
        .collect::<Result<Vec<f64>>>()?;
    let mut model = match kind {
        ModelKind::Linear => GeneratorModel::Linear(LinearPropagator::default()),
        ModelKind::Hyper => GeneratorModel::Hyper(HyperMlp::zeros(config.hidden_width, t_train)?),
    };
    model.set_params(&params).map_err(|e| match e {
        Error::ShapeMismatch { expected, found } => {
            file.parse_error(0, format!("expected {expected} parameters, found {found}"))
        }
        other => other,
    })?;
    Ok(ModelFile {
        model,
        config,
        dt,
        t_train,
        best_epoch: hr.parse("best_epoch")?,
        source: hr.model()?,
    })
}

/// Per-epoch training and validation loss.
pub fn save_history(path: &Path, trained: &TrainedModel) -> Result<()> {
    let mut header = Header::new().with_model(&trained.source);
    header
        .set("kind", trained.model.kind())
        .set("seed", trained.config.seed)
        .set("best_epoch", trained.best_epoch);
    let mut w = RecordWriter::create(path, &header, "epoch, train_loss, val_loss")?;
    for EpochLoss { epoch, train, val } in &trained.history {
        w.line(&format!("{epoch}, {train:?}, {val:?}"))?;
    }
    w.finish()
}
