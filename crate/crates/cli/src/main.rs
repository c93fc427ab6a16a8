//! `timelocal`: generate spin-chain data, train propagator models and
//! evaluate them.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use timelocal_core::analysis::{
    dataset_from, extrapolation_check, preset, preset_names, save_comparison, save_sweep, save_xi, sweep, xi_average,
    xi_series, Axis, ErrorReport, ExperimentConfig, GeneratorTimeSeries, Metric,
};
use timelocal_core::dataset::{
    diagonal_bloch, load_dataset, sample_initial_diagonal, save_dataset, save_trajectories, stream_rng,
    trajectories_from, ExactDynamics, Stream, TrajectoryRequest,
};
use timelocal_core::learner::{load_model, rollout, save_history, save_model, train, ModelFile, ModelKind};
use timelocal_core::quantum::SpinModel;
use timelocal_core::textio::{Header, RecordWriter};
use timelocal_core::TimeGrid;

use config::{ConfigError, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "timelocal", version, about = "Learn time-local generators of reduced spin dynamics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `data.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for trajectory generation and sweep cells.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// `section.key=value`, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact trajectories and the train/validation dataset.
    Generate,
    /// Train the configured model on a dataset file.
    Train {
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Roll a trained model out against exact dynamics.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Bloch components `x,y,z`; defaults to `n_init` diagonal states.
        #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
        initial: Option<String>,
    },
    /// Time dependence of a trained model's generator.
    Xi {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Grid of full pipeline runs.
    Sweep {
        /// One of the named layouts; overrides `sweep.preset`.
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(Debug)]
enum Failure {
    Config(Vec<String>),
    Usage(String),
    Core(timelocal_core::Error),
}

impl Failure {
    fn to_json(&self) -> Value {
        match self {
            Failure::Config(problems) => json!({
                "error": "config",
                "message": problems.join("; "),
                "problems": problems,
            }),
            Failure::Usage(m) => json!({"error": "usage", "message": m}),
            Failure::Core(e) => json!({"error": e.kind(), "message": e.to_string()}),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<timelocal_core::Error> for Failure {
    fn from(e: timelocal_core::Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult = Result<Value, Failure>;

struct Context {
    config: RunConfig,
    exp: ExperimentConfig,
    model: SpinModel,
    out: PathBuf,
}

impl Context {
    fn new(config: RunConfig) -> Result<Self, Failure> {
        let config = config.resolved()?;
        let exp = config.experiment()?;
        let model = config.spin_model().map_err(|e| Failure::Config(vec![e]))?;
        let out = config.output.dir.clone();
        std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
        Ok(Self {
            config,
            exp,
            model,
            out,
        })
    }

    /// Written only after the command succeeds.
    fn write_effective_config(&self) -> Result<PathBuf, Failure> {
        let path = self.path("effective_config.toml");
        std::fs::write(&path, self.config.to_toml()).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn or_default(&self, given: Option<PathBuf>, name: &str) -> PathBuf {
        given.unwrap_or_else(|| self.path(name))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Core(timelocal_core::Error::io(path, e))
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("file not found: {}", path.display())))
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn cmd_generate(ctx: &Context) -> CmdResult {
    let exp = &ctx.exp;
    let exact = ExactDynamics::new(&ctx.model, TimeGrid::from_duration(exp.t_train, exp.dt)?)?;
    let request = TrajectoryRequest::new(exp.train_count, exp.t_train, exp.dt, exp.sampler, exp.seed);
    let trajectories = trajectories_from(&exact, &request)?;
    let dataset = dataset_from(&exact, exp)?;
    let (tpath, dpath) = (ctx.path("trajectories.csv"), ctx.path("dataset.csv"));
    save_trajectories(&tpath, &trajectories, exp.seed, exp.sampler)?;
    save_dataset(&dpath, &dataset)?;
    Ok(json!({
        "command": "generate",
        "trajectories": show(&tpath),
        "dataset": show(&dpath),
        "trajectory_count": trajectories.len(),
        "points_per_trajectory": trajectories[0].len(),
        "train_samples": dataset.train.len(),
        "val_samples": dataset.val.len(),
    }))
}

fn cmd_train(ctx: &Context, dataset: Option<PathBuf>) -> CmdResult {
    let path = ctx.or_default(dataset, "dataset.csv");
    require_file(&path)?;
    let dataset = load_dataset(&path)?;
    let trained = train(&ctx.exp.train, &dataset)?;
    let (mpath, hpath) = (ctx.path("model.txt"), ctx.path("loss_history.csv"));
    save_model(&mpath, &ModelFile::from(&trained))?;
    save_history(&hpath, &trained)?;
    Ok(json!({
        "command": "train",
        "kind": trained.model.kind().to_string(),
        "model": show(&mpath),
        "history": show(&hpath),
        "best_epoch": trained.best_epoch,
        "best_val_loss": trained.best_val_loss(),
    }))
}

fn parse_initial(raw: &str) -> Result<[f64; 3], Failure> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let bad = || Failure::Usage(format!("--initial expects x,y,z, got `{raw}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| bad())?;
    }
    Ok(v)
}

fn load_checked(ctx: &Context, given: Option<PathBuf>) -> Result<(PathBuf, ModelFile), Failure> {
    let path = ctx.or_default(given, "model.txt");
    require_file(&path)?;
    let file = load_model(&path)?;
    if file.source != ctx.model {
        return Err(Failure::Usage(format!(
            "{} was trained on a different spin model than the configured one",
            path.display()
        )));
    }
    if (file.dt - ctx.exp.dt).abs() > 1e-12 * ctx.exp.dt {
        return Err(Failure::Usage(format!(
            "{} uses dt = {} but the configuration has dt = {}",
            path.display(),
            file.dt,
            ctx.exp.dt
        )));
    }
    Ok((path, file))
}

fn cmd_evaluate(ctx: &Context, model: Option<PathBuf>, initial: Option<String>) -> CmdResult {
    let (mpath, file) = load_checked(ctx, model)?;
    let exp = &ctx.exp;
    let initials: Vec<([f64; 3], Option<f64>)> = match initial {
        Some(raw) => vec![(parse_initial(&raw)?, None)],
        None => (0..exp.n_init)
            .map(|k| {
                let c = sample_initial_diagonal(&mut stream_rng(exp.seed, Stream::Evaluation, k as u64));
                (diagonal_bloch(c), Some(c))
            })
            .collect(),
    };
    let exact = ExactDynamics::new(&ctx.model, TimeGrid::from_duration(exp.t_total, exp.dt)?)?;
    let beyond = exp.t_total > exp.t_train;
    let epath = ctx.path("epsilon.csv");
    let mut header = Header::new().with_model(&ctx.model);
    header
        .set("learned_model", file.model.kind())
        .set("dt", format!("{:?}", exp.dt))
        .set("T_train", format!("{:?}", exp.t_train))
        .set("T_tot", format!("{:?}", exp.t_total))
        .set("seed", exp.seed);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (k, (v0, c)) in initials.iter().enumerate() {
        let truth = exact.trajectory(k, *v0)?.series();
        let predicted = rollout(&file.model, &truth.values()[0], exact.grid().steps(), exp.dt)?;
        let report = ErrorReport::new(&predicted, &truth, file.model.kind().to_string(), *v0)?;
        let cpath = ctx.path(&format!("comparison_{k}.csv"));
        save_comparison(&cpath, &ctx.model, &report, &truth, &predicted)?;
        let (inside, after, norm) = if beyond {
            let x = extrapolation_check(&exact, &file.model, *v0, exp.t_train)?;
            (x.in_window, x.beyond, x.max_norm_beyond)
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        rows.push([
            v0[0],
            v0[1],
            v0[2],
            c.unwrap_or(f64::NAN),
            report.epsilon,
            inside,
            after,
            norm,
        ]);
        summary.push(json!({
            "initial": v0,
            "c": c,
            "epsilon": report.epsilon,
            "comparison": show(&cpath),
        }));
    }
    let mean = rows.iter().map(|r| r[4]).sum::<f64>() / rows.len() as f64;
    header.set("epsilon_mean", format!("{mean:?}"));
    let mut w = RecordWriter::create(
        &epath,
        &header,
        "index, v1_0, v2_0, v3_0, c, epsilon, epsilon_train, epsilon_beyond, max_norm_beyond",
    )?;
    for (k, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r.iter().map(|x| format!("{x:?}")).collect();
        w.line(&format!("{k}, {}", cells.join(", ")))?;
    }
    w.finish()?;
    Ok(json!({
        "command": "evaluate",
        "model": show(&mpath),
        "epsilon_file": show(&epath),
        "epsilon_mean": mean,
        "states": summary,
    }))
}

fn cmd_xi(ctx: &Context, model: Option<PathBuf>) -> CmdResult {
    let (mpath, file) = load_checked(ctx, model)?;
    let t = ctx.exp.t_train;
    let gens = GeneratorTimeSeries::from_model(&file.model, file.dt, t)?;
    let xi = xi_series(&gens)?;
    let value = xi_average(&xi, t)?;
    let path = ctx.path("xi.csv");
    save_xi(&path, &ctx.model, &xi, value)?;
    Ok(json!({
        "command": "xi",
        "model": show(&mpath),
        "xi_file": show(&path),
        "Xi": value,
    }))
}

/// Folds a preset into the configuration so the effective config reproduces
/// the run on its own.
fn apply_preset(config: &mut RunConfig, name: &str) -> Result<(), Failure> {
    let p = preset(name).ok_or_else(|| {
        Failure::Usage(format!("unknown preset `{name}`; known: {}", preset_names().join(", ")))
    })?;
    let m = &p.base;
    config.model.family = m.family.to_string();
    config.model.n = m.n;
    config.model.omega = m.omega;
    config.model.v = m.v;
    config.model.alpha = m.alpha;
    config.model.omega_prime = m.omega_prime;
    config.model.v_prime = m.v_prime;
    config.model.beta = m.beta;
    config.model.system_site = None;
    let t = &p.train;
    let tr = &mut config.train;
    tr.kind = Some(t.kind.to_string());
    tr.batch_size = Some(t.batch_size);
    tr.batches_per_epoch = Some(t.batches_per_epoch);
    tr.epochs = Some(t.epochs);
    tr.lr = Some(t.adam.lr);
    tr.beta1 = Some(t.adam.beta1);
    tr.beta2 = Some(t.adam.beta2);
    tr.eps = Some(t.adam.eps);
    tr.hidden_width = Some(t.hidden_width);
    tr.loss = Some(t.loss.to_string());
    tr.hyper_init = Some(t.hyper_init.to_string());
    let s = &mut config.sweep;
    s.preset = Some(name.to_string());
    s.metric = Some(p.metric.to_string());
    s.axis1 = Some(p.axis1.name);
    s.values1 = Some(p.axis1.values);
    s.axis2 = Some(p.axis2.name);
    s.values2 = Some(p.axis2.values);
    Ok(())
}

fn sweep_layout(config: &RunConfig) -> Result<(Axis, Axis, Metric), Failure> {
    let s = &config.sweep;
    let mut problems = Vec::new();
    let metric = match s.metric.as_deref().unwrap_or("epsilon_bar").parse::<Metric>() {
        Ok(m) => Some(m),
        Err(e) => {
            problems.push(format!("sweep.metric: {e}"));
            None
        }
    };
    let mut axis = |name: &Option<String>, values: &Option<Vec<f64>>, key: &str| match (name, values) {
        (Some(n), Some(v)) if !v.is_empty() => Some(Axis::new(n.clone(), v.clone())),
        _ => {
            problems.push(format!("sweep.{key} and sweep.values{} must be set and nonempty", &key[4..]));
            None
        }
    };
    let a1 = axis(&s.axis1, &s.values1, "axis1");
    let a2 = axis(&s.axis2, &s.values2, "axis2");
    match (a1, a2, metric) {
        (Some(a1), Some(a2), Some(m)) if problems.is_empty() => Ok((a1, a2, m)),
        _ => Err(Failure::Config(problems)),
    }
}

fn cmd_sweep(ctx: &Context) -> CmdResult {
    let (axis1, axis2, metric) = sweep_layout(&ctx.config)?;
    if metric == Metric::Xi && ctx.exp.train.kind != ModelKind::Hyper {
        return Err(Failure::Config(vec!["sweep.metric = xi needs train.kind = hyper".into()]));
    }
    let grid = sweep(&ctx.model, &axis1, &axis2, metric, &ctx.exp)?;
    let name = ctx.config.sweep.preset.clone().unwrap_or_else(|| "custom".into());
    let path = ctx.path(&format!("sweep_{name}.csv"));
    save_sweep(&path, &grid)?;
    let failed = grid.cells.iter().filter(|c| c.value.is_none()).count();
    let cells: Vec<Value> = grid
        .cells
        .iter()
        .map(|c| json!({"axis1": c.axis1, "axis2": c.axis2, "value": c.value, "status": c.status}))
        .collect();
    Ok(json!({
        "command": "sweep",
        "sweep_file": show(&path),
        "metric": metric.to_string(),
        "axis1": axis1.name,
        "axis2": axis2.name,
        "failed_cells": failed,
        "cells": cells,
    }))
}

fn run(cli: Cli) -> CmdResult {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot configure worker pool: {e}")))?;
    }
    let overrides = Overrides {
        sets: cli.global.sets,
        seed: cli.global.seed,
        out: cli.global.out,
    };
    let mut config = RunConfig::load(cli.global.config.as_deref(), &overrides)?;
    if let Command::Sweep { preset } = &cli.command {
        if let Some(name) = preset.clone().or_else(|| config.sweep.preset.clone()) {
            apply_preset(&mut config, &name)?;
        }
        sweep_layout(&config)?;
    }
    let ctx = Context::new(config)?;
    let mut summary = match cli.command {
        Command::Generate => cmd_generate(&ctx),
        Command::Train { dataset } => cmd_train(&ctx, dataset),
        Command::Evaluate { model, initial } => cmd_evaluate(&ctx, model, initial),
        Command::Xi { model } => cmd_xi(&ctx, model),
        Command::Sweep { .. } => cmd_sweep(&ctx),
    }?;
    summary["effective_config"] = json!(show(&ctx.write_effective_config()?));
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", json!({"error": "usage", "message": first}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::FAILURE
        }
    }
}
