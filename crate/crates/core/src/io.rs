//! CSV output. Numbers are written with 17 significant digits so every value
//! round-trips to the same `f64`.

use std::io::Write;

use crate::trajectory::{Method, Trajectory};

pub type CsvResult<T> = std::result::Result<T, csv::Error>;

/// Full-precision scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns `t, x_1..x_n, xstar_1..xstar_n, err`, plus a trailing `method`
/// column for baselines.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> CsvResult<()> {
    let n = traj.dimension();
    let labelled = matches!(traj.method, Method::Baseline(_));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=n).map(|i| format!("xstar_{i}")));
    header.push("err".into());
    if labelled {
        header.push("method".into());
    }
    w.write_record(&header)?;
    for (t, ((x, xs), e)) in traj.iterates.iter().zip(&traj.optima).zip(&traj.errors).enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        row.extend(xs.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(*e));
        if labelled {
            row.push(traj.method.name().into());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One `err_<method>` column per trajectory, aligned on `t`. Shorter runs
/// leave trailing cells empty.
pub fn write_error_traces_csv<W: Write>(out: W, trajs: &[(&str, &Trajectory)]) -> CsvResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(trajs.iter().map(|(name, _)| format!("err_{name}")));
    w.write_record(&header)?;
    let rows = trajs.iter().map(|(_, t)| t.len()).max().unwrap_or(0);
    for t in 0..rows {
        let mut row = vec![t.to_string()];
        row.extend(
            trajs
                .iter()
                .map(|(_, tr)| tr.errors.get(t).map(|e| fmt_f64(*e)).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table with a header row.
pub fn write_table_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> CsvResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}
