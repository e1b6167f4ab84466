use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::{ExperimentReport, SweepTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(HarnessError::ConfigInvalid(format!("unknown output format {other:?}"))),
        }
    }
}

pub const ALL_FORMATS: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];

/// Wall time of a run, kept apart from the report so reports stay
/// byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub config_hash: String,
    pub wall_seconds: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns `alpha,T,mean_error,stderr_error,trials_ok`; failed means are
/// left empty.
pub fn errors_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("alpha,T,mean_error,stderr_error,trials_ok\n");
    for c in &report.cells {
        let _ = writeln!(out, "{},{},{},{},{}", c.alpha, c.t, opt(c.mean_error), opt(c.stderr_error), c.trials_ok);
    }
    out
}

/// Columns `alpha,t,mean_deviation`.
pub fn deviation_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("alpha,t,mean_deviation\n");
    for d in &report.deviations {
        for &(t, v) in &d.samples {
            let _ = writeln!(out, "{},{t},{v}", d.alpha);
        }
    }
    out
}

/// Columns `alpha,T,mean_error`; the argmax per `T` goes to `sweep.json`.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("alpha,T,mean_error\n");
    for (a, row) in table.alphas.iter().zip(&table.mean_error) {
        for (t, m) in table.t_values.iter().zip(row) {
            let _ = writeln!(out, "{a},{t},{}", opt(*m));
        }
    }
    out
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    std::fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

type Series = (String, Vec<(f64, f64)>);

fn line_chart(title: &str, x_desc: &str, y_desc: &str, series: &[Series], log_y: bool) -> Result<String> {
    let points = series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0 > 0.0 && (!log_y || p.1 > 0.0));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        (x0, x1) = (1.0, 10.0);
    }
    if !(y0 < y1) {
        (y0, y1) = if log_y { (0.1, 1.0) } else { (0.0, 1.0) };
    }
    if log_y {
        (y0, y1) = (y0 / 1.2, y1 * 1.2);
    } else {
        let pad = 0.05 * (y1 - y0);
        (y0, y1) = (y0 - pad, y1 + pad);
    }
    let plot_err = |e: &dyn std::fmt::Display| HarnessError::Plot(e.to_string());
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(&e))?;
        let mut builder = ChartBuilder::on(&root);
        builder.caption(title, ("sans-serif", 20)).margin(16).x_label_area_size(40).y_label_area_size(70);
        let palette = |i: usize| Palette99::pick(i).to_rgba();
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart.map_err(|e| plot_err(&e))?;
                chart.configure_mesh().x_desc(x_desc).y_desc(y_desc).draw().map_err(|e| plot_err(&e))?;
                for (i, (label, pts)) in series.iter().enumerate() {
                    let color = palette(i);
                    let pts: Vec<(f64, f64)> =
                        pts.iter().copied().filter(|p| p.0 > 0.0 && (!log_y || p.1 > 0.0)).collect();
                    chart
                        .draw_series(LineSeries::new(pts, color.stroke_width(2)))
                        .map_err(|e| plot_err(&e))?
                        .label(label.as_str())
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
                }
                if !series.is_empty() {
                    chart
                        .configure_series_labels()
                        .background_style(WHITE.mix(0.8))
                        .border_style(BLACK)
                        .draw()
                        .map_err(|e| plot_err(&e))?;
                }
            }};
        }
        if log_y {
            draw!(builder.build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale()));
        } else {
            draw!(builder.build_cartesian_2d((x0..x1).log_scale(), y0..y1));
        }
        root.present().map_err(|e| plot_err(&e))?;
    }
    Ok(svg)
}

/// Log-log chart of mean error against `T`, one line per `α`.
pub fn errors_svg(report: &ExperimentReport) -> Result<String> {
    let mut alphas: Vec<f64> = report.cells.iter().map(|c| c.alpha).collect();
    alphas.dedup();
    let series: Vec<Series> = alphas.iter().map(|&a| (format!("alpha = {a}"), report.curve(a))).collect();
    let title = format!("OLS error  [{}]", report.metadata.config_hash.get(..12).unwrap_or(""));
    line_chart(&title, "T", "mean ||W_hat - W||", &series, true)
}

/// Log-x chart of the mean state deviation.
pub fn deviation_svg(report: &ExperimentReport) -> Result<String> {
    let series: Vec<Series> = report
        .deviations
        .iter()
        .map(|d| (format!("alpha = {}", d.alpha), d.samples.iter().map(|&(t, v)| (t as f64, v)).collect()))
        .collect();
    let title = format!("state deviation  [{}]", report.metadata.config_hash.get(..12).unwrap_or(""));
    line_chart(&title, "t", "mean ||x_t - x*_t||^2", &series, false)
}

/// Writes the report in each requested format into `dir` and returns the
/// written paths.
pub fn emit_outputs(report: &ExperimentReport, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            Format::Csv => {
                written.push(write(dir.join("errors.csv"), &errors_csv(report))?);
                written.push(write(dir.join("deviation.csv"), &deviation_csv(report))?);
            }
            Format::Json => {
                let mut json = serde_json::to_string_pretty(report)?;
                json.push('\n');
                written.push(write(dir.join("report.json"), &json)?);
            }
            Format::Svg => {
                written.push(write(dir.join("errors.svg"), &errors_svg(report)?)?);
                written.push(write(dir.join("deviation.svg"), &deviation_svg(report)?)?);
            }
        }
    }
    Ok(written)
}

pub fn emit_sweep(table: &SweepTable, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut json = serde_json::to_string_pretty(table)?;
    json.push('\n');
    Ok(vec![write(dir.join("sweep.csv"), &sweep_csv(table))?, write(dir.join("sweep.json"), &json)?])
}

pub fn emit_timing(timing: &Timing, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    write(dir.join("timing.json"), &serde_json::to_string_pretty(timing)?)
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
