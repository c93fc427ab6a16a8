//! Run configuration: TOML file, `--set` overrides, validation and the
//! resolved effective configuration written next to every output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timelocal_core::analysis::{ExperimentConfig, LinearSplit};
use timelocal_core::dataset::Sampler;
use timelocal_core::learner::{AdamConfig, HyperInit, LossKind, ModelKind, TrainConfig};
use timelocal_core::quantum::{Family, SpinModel};

/// Configuration problems, reported together.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0.join("; "))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub family: String,
    pub n: usize,
    pub omega: f64,
    pub v: f64,
    pub alpha: f64,
    pub omega_prime: f64,
    pub v_prime: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_site: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            family: "model-i".into(),
            n: 7,
            omega: 1.0,
            v: 1.0,
            alpha: 1.0,
            omega_prime: 1.0,
            v_prime: 1.0,
            beta: 0.4,
            system_site: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub train_count: usize,
    pub val_count: usize,
    pub t_train: f64,
    pub t_total: f64,
    pub dt: f64,
    pub seed: u64,
    pub sampler: String,
    pub split: String,
    pub split_fraction: f64,
    pub n_init: usize,
    pub hyper_val_samples: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            train_count: e.train_count,
            val_count: e.val_count,
            t_train: e.t_train,
            t_total: e.t_total,
            dt: e.dt,
            seed: e.seed,
            sampler: e.sampler.to_string(),
            split: e.linear_split.to_string(),
            split_fraction: e.split_fraction,
            n_init: e.n_init,
            hyper_val_samples: e.hyper_val_samples,
        }
    }
}

/// Fields left out take the defaults of the chosen model kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub kind: Option<String>,
    pub batch_size: Option<usize>,
    pub batches_per_epoch: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub hidden_width: Option<usize>,
    pub loss: Option<String>,
    pub hyper_init: Option<String>,
    /// Defaults to the data seed.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into()],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub preset: Option<String>,
    pub metric: Option<String>,
    pub axis1: Option<String>,
    pub values1: Option<Vec<f64>>,
    pub axis2: Option<String>,
    pub values2: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub data: DataSection,
    pub train: TrainSection,
    pub output: OutputSection,
    #[serde(skip_serializing_if = "is_default_sweep")]
    pub sweep: SweepSection,
}

fn is_default_sweep(s: &SweepSection) -> bool {
    *s == SweepSection::default()
}

/// Inputs besides the file itself.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<(), String> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| format!("--set `{assignment}` is not of the form section.key=value"))?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| format!("--set key `{}` is not of the form section.key", key.trim()))?;
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(sec) = entry else {
        return Err(format!("`{section}` is not a section"));
    };
    sec.insert(field.to_string(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), then applies overrides in order: `--set`,
    /// `--seed`, `--out`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(vec![format!("cannot read config {}: {e}", p.display())]))?;
                text.parse::<toml::Table>()
                    .map_err(|e| ConfigError(vec![format!("{}: {}", p.display(), e.message())]))?
            }
            None => toml::Table::new(),
        };
        let problems: Vec<String> = overrides
            .sets
            .iter()
            .filter_map(|s| apply_set(&mut table, s).err())
            .collect();
        if !problems.is_empty() {
            return Err(ConfigError(problems));
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(vec![e.message().to_string()]))?;
        if let Some(seed) = overrides.seed {
            cfg.data.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }

    pub fn spin_model(&self) -> Result<SpinModel, String> {
        let m = &self.model;
        let family: Family = m.family.parse().map_err(|e: timelocal_core::Error| e.to_string())?;
        Ok(match family {
            Family::ModelI => SpinModel::model_i(m.n, m.omega, m.v, m.alpha),
            Family::ModelII => SpinModel::model_ii(m.n, m.omega, m.v, m.omega_prime, m.v_prime, m.beta),
        })
    }

    fn train_config(&self, problems: &mut Vec<String>) -> TrainConfig {
        let t = &self.train;
        let kind = match t.kind.as_deref().unwrap_or("linear").parse::<ModelKind>() {
            Ok(k) => k,
            Err(e) => {
                problems.push(format!("train.kind: {e}"));
                ModelKind::Linear
            }
        };
        let base = TrainConfig::for_kind(kind);
        let loss = match t.loss.as_deref() {
            Some(s) => s.parse::<LossKind>().unwrap_or_else(|e| {
                problems.push(format!("train.loss: {e}"));
                base.loss
            }),
            None => base.loss,
        };
        let hyper_init = match t.hyper_init.as_deref() {
            Some(s) => s.parse::<HyperInit>().unwrap_or_else(|e| {
                problems.push(format!("train.hyper_init: {e}"));
                base.hyper_init
            }),
            None => base.hyper_init,
        };
        TrainConfig {
            kind,
            batch_size: t.batch_size.unwrap_or(base.batch_size),
            batches_per_epoch: t.batches_per_epoch.unwrap_or(base.batches_per_epoch),
            epochs: t.epochs.unwrap_or(base.epochs),
            adam: AdamConfig {
                lr: t.lr.unwrap_or(base.adam.lr),
                beta1: t.beta1.unwrap_or(base.adam.beta1),
                beta2: t.beta2.unwrap_or(base.adam.beta2),
                eps: t.eps.unwrap_or(base.adam.eps),
            },
            seed: t.seed.unwrap_or(self.data.seed),
            hidden_width: t.hidden_width.unwrap_or(base.hidden_width),
            loss,
            hyper_init,
        }
    }

    /// The experiment settings, or every violated constraint.
    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut problems = Vec::new();
        match self.spin_model() {
            Ok(model) => {
                if let Err(e) = model.validate() {
                    problems.push(format!("model: {e}"));
                } else if let Some(site) = self.model.system_site {
                    if site != model.system_site() {
                        problems.push(format!(
                            "model.system_site = {site} but this model's system spin is site {}",
                            model.system_site()
                        ));
                    }
                }
            }
            Err(e) => problems.push(format!("model.family: {e}")),
        }
        let d = &self.data;
        let sampler = d.sampler.parse::<Sampler>().unwrap_or_else(|e| {
            problems.push(format!("data.sampler: {e}"));
            Sampler::Ball
        });
        let linear_split = d.split.parse::<LinearSplit>().unwrap_or_else(|e| {
            problems.push(format!("data.split: {e}"));
            LinearSplit::Time
        });
        let train = self.train_config(&mut problems);
        let exp = ExperimentConfig {
            train_count: d.train_count,
            val_count: d.val_count,
            t_train: d.t_train,
            t_total: d.t_total,
            dt: d.dt,
            seed: d.seed,
            sampler,
            linear_split,
            split_fraction: d.split_fraction,
            n_init: d.n_init,
            hyper_val_samples: d.hyper_val_samples,
            train,
        };
        problems.extend(exp.problems().into_iter().map(|p| format!("data/train: {p}")));
        if self.output.formats.is_empty() {
            problems.push("output.formats must not be empty".into());
        }
        for f in &self.output.formats {
            if f != "csv" {
                problems.push(format!("output.formats: unsupported format `{f}`"));
            }
        }
        if problems.is_empty() {
            Ok(exp)
        } else {
            Err(ConfigError(problems))
        }
    }

    /// Copy with every defaulted field written out.
    pub fn resolved(&self) -> Result<RunConfig, ConfigError> {
        let exp = self.experiment()?;
        let model = self.spin_model().map_err(|e| ConfigError(vec![e]))?;
        let t = exp.train;
        let mut out = self.clone();
        out.model.system_site = Some(model.system_site());
        out.train = TrainSection {
            kind: Some(t.kind.to_string()),
            batch_size: Some(t.batch_size),
            batches_per_epoch: Some(t.batches_per_epoch),
            epochs: Some(t.epochs),
            lr: Some(t.adam.lr),
            beta1: Some(t.adam.beta1),
            beta2: Some(t.adam.beta2),
            eps: Some(t.adam.eps),
            hidden_width: Some(t.hidden_width),
            loss: Some(t.loss.to_string()),
            hyper_init: Some(t.hyper_init.to_string()),
            seed: Some(t.seed),
        };
        Ok(out)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::load(None, &Overrides::default()).unwrap();
        let exp = cfg.experiment().unwrap();
        assert_eq!(exp, ExperimentConfig::default());
        assert_eq!(cfg.spin_model().unwrap(), SpinModel::model_i(7, 1.0, 1.0, 1.0));
    }

    #[test]
    fn overrides_apply_in_order() {
        let ov = Overrides {
            sets: vec![
                "model.family=model-ii".into(),
                "model.v_prime = 2.0".into(),
                "train.kind=hyper".into(),
                "data.seed=3".into(),
            ],
            seed: Some(9),
            out: Some("elsewhere".into()),
        };
        let cfg = RunConfig::load(None, &ov).unwrap();
        assert_eq!(cfg.model.v_prime, 2.0);
        assert_eq!(cfg.data.seed, 9);
        assert_eq!(cfg.output.dir, PathBuf::from("elsewhere"));
        let exp = cfg.experiment().unwrap();
        assert_eq!(exp.train.kind, ModelKind::Hyper);
        assert_eq!(exp.train.epochs, 500);
        assert_eq!(exp.train.seed, 9);
    }

    #[test]
    fn every_problem_is_reported() {
        let ov = Overrides {
            sets: vec![
                "model.n=6".into(),
                "data.dt=-0.1".into(),
                "data.sampler=cube".into(),
                "train.kind=lstm".into(),
                "output.formats=[\"parquet\"]".into(),
            ],
            ..Overrides::default()
        };
        let err = RunConfig::load(None, &ov).unwrap().experiment().unwrap_err();
        assert!(err.0.len() >= 5, "{err}");
        let text = err.to_string();
        for needle in ["model", "dt", "sampler", "lstm", "parquet"] {
            assert!(text.contains(needle), "{needle} missing from {text}");
        }
    }

    #[test]
    fn unknown_keys_and_bad_sets_fail() {
        let ov = Overrides {
            sets: vec!["model.gamma=1".into()],
            ..Overrides::default()
        };
        assert!(RunConfig::load(None, &ov).is_err());
        let ov = Overrides {
            sets: vec!["nodot=1".into(), "also bad".into()],
            ..Overrides::default()
        };
        assert_eq!(RunConfig::load(None, &ov).unwrap_err().0.len(), 2);
    }

    #[test]
    fn resolved_config_round_trips() {
        let ov = Overrides {
            sets: vec!["train.kind=hyper".into(), "train.epochs=7".into()],
            ..Overrides::default()
        };
        let cfg = RunConfig::load(None, &ov).unwrap().resolved().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("effective_config.toml");
        std::fs::write(&path, cfg.to_toml()).unwrap();
        let back = RunConfig::load(Some(&path), &Overrides::default()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.experiment().unwrap(), cfg.experiment().unwrap());
        assert_eq!(back.train.epochs, Some(7));
    }
}
