//! Writing an experiment report to disk.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::experiment::ExperimentReport;

pub const REPORT_FILE: &str = "report.json";
pub const DEVIATIONS_FILE: &str = "deviations.csv";
pub const PLOT_FILE: &str = "plot_data.csv";
pub const PLOT_LEVELS: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];

pub fn report_json(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Linear-interpolation quantile of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted_column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|r| r[j]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Rows `(t, replication, na_dev, km_dev)`.
pub fn write_deviations<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "replication", "na_dev", "km_dev"])?;
    for (j, t) in report.grid.times.iter().enumerate() {
        for (rep, (na, km)) in report.na_dev.iter().zip(&report.km_dev).enumerate() {
            w.write_record([
                t.to_string(),
                rep.to_string(),
                format!("{:e}", na[j]),
                format!("{:e}", km[j]),
            ])?;
        }
    }
    w.flush().map_err(io_err(Path::new("<csv>")))?;
    Ok(())
}

/// Quantiles of the limit and of the deviations at each grid point, plus
/// `ζ_r(t)` in the long range dependent regime.
pub fn write_plot_data<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "level",
        "limit_na",
        "empirical_na",
        "limit_km",
        "empirical_km",
        "zeta",
    ])?;
    for (j, t) in report.grid.times.iter().enumerate() {
        let (lna, ena) = (
            sorted_column(&report.limit_na, j),
            sorted_column(&report.na_dev, j),
        );
        let (lkm, ekm) = (
            sorted_column(&report.limit_km, j),
            sorted_column(&report.km_dev, j),
        );
        let zeta = report
            .zeta
            .as_ref()
            .map(|z| format!("{:e}", z.substitution[j]))
            .unwrap_or_default();
        for level in PLOT_LEVELS {
            w.write_record([
                t.to_string(),
                level.to_string(),
                format!("{:e}", quantile_sorted(&lna, level)),
                format!("{:e}", quantile_sorted(&ena, level)),
                format!("{:e}", quantile_sorted(&lkm, level)),
                format!("{:e}", quantile_sorted(&ekm, level)),
                zeta.clone(),
            ])?;
        }
    }
    w.flush().map_err(io_err(Path::new("<csv>")))?;
    Ok(())
}

/// Write the JSON report and both CSV files into `dir`; returns their paths.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json_path = dir.join(REPORT_FILE);
    let mut f = create(&json_path)?;
    f.write_all(report_json(report)?.as_bytes())
        .map_err(io_err(&json_path))?;
    f.flush().map_err(io_err(&json_path))?;
    let dev_path = dir.join(DEVIATIONS_FILE);
    write_deviations(report, create(&dev_path)?)?;
    let plot_path = dir.join(PLOT_FILE);
    write_plot_data(report, create(&plot_path)?)?;
    Ok(vec![json_path, dev_path, plot_path])
}
