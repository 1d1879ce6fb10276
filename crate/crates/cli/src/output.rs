//! CSV files in the column layout of the published data sets.

use std::fs::File;
use std::path::Path;

use crate::{CliError, Report};

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_value(x: f64) -> String {
    format!("{x}")
}

/// Time-step label as used in column names: `0.001`, `0.0001`, `1e-05`.
pub fn dt_label(dt: f64) -> String {
    if dt != 0.0 && (dt.abs() < 1e-4 || dt.abs() >= 1e16) {
        let s = format!("{dt:e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent format");
        let (sign, digits) = match exp.strip_prefix('-') {
            Some(d) => ("-", d),
            None => ("+", exp),
        };
        format!("{mantissa}e{sign}{digits:0>2}")
    } else {
        format!("{dt}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn finish(mut w: csv::Writer<File>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// `x,ref,fluid,kd_old_<dt>...,kd_new_<dt>...`, one row per cell centre.
pub fn write_density(report: &Report, path: &Path) -> Result<(), CliError> {
    let columns = report.density_columns();
    let mut w = writer(path)?;
    let mut header = vec!["x".to_string()];
    header.extend(columns.iter().map(|(name, _)| name.clone()));
    w.write_record(&header)?;
    for (i, x) in report.centers.iter().enumerate() {
        let mut row = vec![format_value(*x)];
        row.extend(columns.iter().map(|(_, d)| format_value(d[i])));
        w.write_record(&row)?;
    }
    finish(w)
}

/// `dt,runtime_old,runtime_new,error_fluid,error_old,error_new`; values
/// that were not computed are left empty.
pub fn write_summary(report: &Report, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["dt", "runtime_old", "runtime_new", "error_fluid", "error_old", "error_new"])?;
    let opt = |v: Option<f64>| v.map(format_value).unwrap_or_default();
    for row in report.summary_rows() {
        w.write_record([
            dt_label(row.dt),
            opt(row.runtime_old),
            opt(row.runtime_new),
            opt(row.error_fluid),
            opt(row.error_old),
            opt(row.error_new),
        ])?;
    }
    finish(w)
}

/// Per-run diagnostics.
pub fn write_metrics(report: &Report, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "solver",
        "dt",
        "runtime_s",
        "total_weight",
        "collisions",
        "steps",
        "diffusive_steps",
        "fallback_steps",
        "fallback_step_fraction",
        "fallback_trajectory_fraction",
        "proposals",
        "rejections",
        "absorbed_weight",
        "far_wall_folds",
        "far_wall_warnings",
    ])?;
    for run in &report.runs {
        let c = &run.counters;
        w.write_record([
            run.solver.name().to_string(),
            run.dt.map(dt_label).unwrap_or_default(),
            format_value(run.metrics.runtime.as_secs_f64()),
            format_value(run.total_weight),
            c.collisions.to_string(),
            c.steps.to_string(),
            c.diffusive_steps.to_string(),
            c.fallback_steps.to_string(),
            format_value(run.metrics.fallback_step_fraction),
            format_value(run.metrics.fallback_trajectory_fraction),
            c.sampler.proposals.to_string(),
            c.sampler.rejections.to_string(),
            format_value(c.absorbed_weight),
            c.far_wall_folds.to_string(),
            c.far_wall_warnings.to_string(),
        ])?;
    }
    finish(w)
}

/// Writes `density.csv`, `summary.csv` and `metrics.csv` into `dir`.
pub fn write_all(report: &Report, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    write_density(report, &dir.join("density.csv"))?;
    write_summary(report, &dir.join("summary.csv"))?;
    write_metrics(report, &dir.join("metrics.csv"))
}

/// A density file read back: the `x` column and every named column.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub x: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl DensityTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

pub fn read_density(path: &Path) -> Result<DensityTable, CliError> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("x") {
        return Err(CliError::Config(format!("{}: first column must be 'x'", path.display())));
    }
    let mut table =
        DensityTable { x: Vec::new(), columns: headers.iter().skip(1).map(|h| (h.to_string(), Vec::new())).collect() };
    for record in r.records() {
        let record = record?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| CliError::Config(format!("{}: bad number '{s}': {e}", path.display())))
        };
        table.x.push(parse(&record[0])?);
        for (j, (_, col)) in table.columns.iter_mut().enumerate() {
            col.push(parse(&record[j + 1])?);
        }
    }
    Ok(table)
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
