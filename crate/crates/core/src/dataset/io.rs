use std::path::Path;

use nalgebra::Vector4;

use super::{Dataset, DatasetMeta, Sample, Sampler, SplitKind, Trajectory};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quantum::BlochVector;
use crate::textio::{Header, RecordWriter, TextFile};

const TRAJECTORY_COLUMNS: &str = "traj_id, t, v1, v2, v3";
const TRAJECTORY_COLUMNS_V0: &str = "traj_id, t, v0, v1, v2, v3";
const SAMPLE_COLUMNS: &str = "traj_id, t, v1, v2, v3, v1', v2', v3'";

fn bloch(file: &TextFile, line: usize, v0: f64, spatial: &[f64]) -> Result<BlochVector> {
    BlochVector::try_from_vector(Vector4::new(v0, spatial[0], spatial[1], spatial[2]))
        .map_err(|e| file.parse_error(line, e.to_string()))
}

fn index_of(file: &TextFile, line: usize, t: f64, dt: f64) -> Result<usize> {
    let k = (t / dt).round();
    if k < 0.0 || (t - k * dt).abs() > 1e-9 * dt.max(t.abs()) {
        return Err(file.parse_error(line, format!("time {t} is not on the dt = {dt} grid")));
    }
    Ok(k as usize)
}

/// Writes trajectories sharing one model and grid.
pub fn save_trajectories(path: &Path, trajectories: &[Trajectory], seed: u64, sampler: Sampler) -> Result<()> {
    let first = trajectories.first().ok_or(Error::Empty("trajectories"))?;
    let mut header = Header::new().with_model(&first.model);
    header
        .set("dt", format!("{:?}", first.grid.dt()))
        .set("T", format!("{:?}", first.grid.duration()))
        .set("seed", seed)
        .set("sampler", sampler)
        .set("count", trajectories.len());
    let mut w = RecordWriter::create(path, &header, TRAJECTORY_COLUMNS)?;
    for traj in trajectories {
        if traj.model != first.model || traj.grid != first.grid {
            return Err(Error::InvalidArgument(
                "all trajectories in a file must share model and grid".into(),
            ));
        }
        for (k, v) in traj.vectors.iter().enumerate() {
            let [x, y, z] = v.spatial();
            w.line(&format!("{}, {:?}, {x:?}, {y:?}, {z:?}", traj.id, traj.grid.time(k)))?;
        }
    }
    w.finish()
}

/// Reads a trajectory file, re-validating every Bloch vector. Returns the
/// trajectories with the seed and sampler recorded in the header.
pub fn load_trajectories(path: &Path) -> Result<(Vec<Trajectory>, u64, Sampler)> {
    let file = TextFile::read(path)?;
    let hr = file.header_reader();
    let model = hr.model()?;
    let dt: f64 = hr.parse("dt")?;
    let t_total: f64 = hr.parse("T")?;
    let seed: u64 = hr.parse("seed")?;
    let sampler: Sampler = hr.require("sampler")?.parse()?;
    let grid = TimeGrid::from_duration(t_total, dt)?;
    let with_v0 = match hr.require("columns")? {
        TRAJECTORY_COLUMNS => false,
        TRAJECTORY_COLUMNS_V0 => true,
        other => return Err(file.parse_error(0, format!("unsupported columns `{other}`"))),
    };
    let width = if with_v0 { 6 } else { 5 };

    let mut out: Vec<Trajectory> = Vec::new();
    let mut current: Option<(usize, Vec<BlochVector>)> = None;
    let records = file.sections.iter().flat_map(|(_, lines)| lines.iter());
    let flush = |cur: Option<(usize, Vec<BlochVector>)>, out: &mut Vec<Trajectory>| -> Result<()> {
        if let Some((id, vectors)) = cur {
            let initial = vectors[0].spatial();
            out.push(Trajectory::new(id, model, initial, grid, vectors)?);
        }
        Ok(())
    };
    for (line, text) in records {
        let f = file.numbers(*line, text, width)?;
        let id = f[0] as usize;
        if f[0] < 0.0 || f[0].fract() != 0.0 {
            return Err(file.parse_error(*line, "trajectory id must be a non-negative integer"));
        }
        let (v0, spatial) = if with_v0 { (f[2], &f[3..6]) } else { (1.0, &f[2..5]) };
        let v = bloch(&file, *line, v0, spatial)?;
        let k = index_of(&file, *line, f[1], dt)?;
        match &mut current {
            Some((cid, vectors)) if *cid == id => {
                if k != vectors.len() {
                    return Err(file.parse_error(*line, format!("expected time index {}, found {k}", vectors.len())));
                }
                vectors.push(v);
            }
            _ => {
                if k != 0 {
                    return Err(file.parse_error(*line, "trajectory does not start at t = 0"));
                }
                flush(current.take(), &mut out)?;
                current = Some((id, vec![v]));
            }
        }
    }
    flush(current.take(), &mut out)?;
    if out.is_empty() {
        return Err(file.parse_error(0, "no trajectory records"));
    }
    Ok((out, seed, sampler))
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let meta = &dataset.meta;
    let mut header = Header::new().with_model(&meta.model);
    header
        .set("dt", format!("{:?}", meta.dt))
        .set("T", format!("{:?}", meta.t_total))
        .set("seed", meta.seed)
        .set("split", meta.split)
        .set("train_samples", dataset.train.len())
        .set("val_samples", dataset.val.len());
    let mut w = RecordWriter::create(path, &header, SAMPLE_COLUMNS)?;
    for (name, samples) in [("train", &dataset.train), ("val", &dataset.val)] {
        w.section(name)?;
        for s in samples {
            let [x, y, z] = s.v.spatial();
            let [xn, yn, zn] = s.v_next.spatial();
            w.line(&format!(
                "{}, {:?}, {x:?}, {y:?}, {z:?}, {xn:?}, {yn:?}, {zn:?}",
                s.traj_id, s.t
            ))?;
        }
    }
    w.finish()
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = TextFile::read(path)?;
    let hr = file.header_reader();
    let model = hr.model()?;
    let meta = DatasetMeta {
        model,
        seed: hr.parse("seed")?,
        dt: hr.parse("dt")?,
        t_total: hr.parse("T")?,
        split: hr.require("split")?.parse::<SplitKind>()?,
    };
    if hr.require("columns")? != SAMPLE_COLUMNS {
        return Err(file.parse_error(0, "unsupported sample columns"));
    }
    let read = |name: &str| -> Result<Vec<Sample>> {
        let lines = file.section(name).unwrap_or(&[]);
        lines
            .iter()
            .map(|(line, text)| {
                let f = file.numbers(*line, text, 8)?;
                if f[0] < 0.0 || f[0].fract() != 0.0 {
                    return Err(file.parse_error(*line, "trajectory id must be a non-negative integer"));
                }
                Ok(Sample {
                    traj_id: f[0] as usize,
                    index: index_of(&file, *line, f[1], meta.dt)?,
                    t: f[1],
                    v: bloch(&file, *line, 1.0, &f[2..5])?,
                    v_next: bloch(&file, *line, 1.0, &f[5..8])?,
                })
            })
            .collect()
    };
    let ds = Dataset {
        train: read("train")?,
        val: read("val")?,
        meta,
    };
    ds.validate()?;
    Ok(ds)
}
