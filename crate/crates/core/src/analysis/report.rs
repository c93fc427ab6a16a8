use std::path::Path;

use super::{ErrorReport, ScalarSeries, SweepGrid};
use crate::error::Result;
use crate::quantum::SpinModel;
use crate::series::Series;
use crate::textio::{Header, RecordWriter};

fn single_line(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// One row per cell; failed cells carry `NaN` and the failure message.
pub fn save_sweep(path: &Path, grid: &SweepGrid) -> Result<()> {
    let mut header = Header::new().with_model(&grid.base);
    header
        .set("metric", grid.metric)
        .set("axis1", &grid.axis1.name)
        .set("axis2", &grid.axis2.name)
        .set("cells", grid.cells.len());
    let mut w = RecordWriter::create(path, &header, "axis1, axis2, metric, n_init, seed, status")?;
    for c in &grid.cells {
        let value = c.value.unwrap_or(f64::NAN);
        w.line(&format!(
            "{:?}, {:?}, {value:?}, {}, {}, {}",
            c.axis1,
            c.axis2,
            grid.n_init,
            grid.seed,
            single_line(&c.status)
        ))?;
    }
    w.finish()
}

/// Exact and predicted Bloch components side by side.
pub fn save_comparison(
    path: &Path,
    source: &SpinModel,
    report: &ErrorReport,
    exact: &Series,
    predicted: &Series,
) -> Result<()> {
    let mut header = Header::new().with_model(source);
    let [x, y, z] = report.initial;
    header
        .set("learned_model", &report.model)
        .set("initial", format!("{x:?} {y:?} {z:?}"))
        .set("dt", format!("{:?}", exact.grid().dt()))
        .set("T_tot", format!("{:?}", report.t_total))
        .set("epsilon", format!("{:?}", report.epsilon));
    let mut w = RecordWriter::create(
        path,
        &header,
        "t, v1_ex, v2_ex, v3_ex, v1_mod, v2_mod, v3_mod, residual_norm",
    )?;
    let rows = exact.values().iter().zip(predicted.values()).zip(&report.residuals);
    for (k, ((e, p), r)) in rows.enumerate() {
        w.record(&[exact.grid().time(k), e[1], e[2], e[3], p[1], p[2], p[3], *r])?;
    }
    w.finish()
}

/// `ξ(t)` with `Ξ` in the header.
pub fn save_xi(path: &Path, source: &SpinModel, xi: &ScalarSeries, xi_avg: f64) -> Result<()> {
    let mut header = Header::new().with_model(source);
    header
        .set("dt", format!("{:?}", xi.grid.dt()))
        .set("T", format!("{:?}", xi.grid.duration()))
        .set("Xi", format!("{xi_avg:?}"));
    let mut w = RecordWriter::create(path, &header, "t, xi")?;
    for (k, v) in xi.values.iter().enumerate() {
        w.record(&[xi.grid.time(k), *v])?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{Axis, Metric, SweepCell};
    use crate::grid::TimeGrid;
    use nalgebra::Vector4;

    #[test]
    fn sweep_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let grid = SweepGrid {
            base: SpinModel::model_i(7, 1.0, 1.0, 1.0),
            axis1: Axis::new("v", vec![0.1]),
            axis2: Axis::new("alpha", vec![1.0, 3.0]),
            metric: Metric::EpsilonBar,
            n_init: 5,
            seed: 3,
            cells: vec![
                SweepCell { axis1: 0.1, axis2: 1.0, value: Some(0.25), status: "ok".into(), c_values: vec![] },
                SweepCell { axis1: 0.1, axis2: 3.0, value: None, status: "failed: a, b\nc".into(), c_values: vec![] },
            ],
        };
        save_sweep(&path, &grid).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# schema_version = 1\n"));
        assert!(text.contains("# columns = axis1, axis2, metric, n_init, seed, status\n"));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows, vec!["0.1, 1.0, 0.25, 5, 3, ok", "0.1, 3.0, NaN, 5, 3, failed: a; b;c"]);
    }

    #[test]
    fn comparison_and_xi_rows() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::new(0.5, 2).unwrap();
        let a = Series::new(grid, vec![Vector4::new(1.0, 0.0, 0.0, 0.5); 3]).unwrap();
        let b = Series::new(grid, vec![Vector4::new(1.0, 0.0, 0.0, 0.25); 3]).unwrap();
        let report = ErrorReport::new(&b, &a, "linear", [0.0, 0.0, 0.5]).unwrap();
        let model = SpinModel::model_i(3, 1.0, 1.0, 1.0);
        let path = dir.path().join("c.csv");
        save_comparison(&path, &model, &report, &a, &b).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2], "1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.25, 0.25");
        assert!(text.contains("# epsilon = 0.25\n"));

        let path = dir.path().join("xi.csv");
        let xi = ScalarSeries { grid, values: vec![1.0, 2.0, 3.0] };
        save_xi(&path, &model, &xi, 2.0).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("# Xi = 2.0\n"));
        assert!(text.ends_with("0.5, 2.0\n1.0, 3.0\n"));
    }
}
